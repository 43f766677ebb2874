#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "ams/experiment.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kRunError = 3;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, Flags& f, bool need_config) {
  auto* opt = cmd->add_option("--config", f.config, "experiment config (JSON)");
  if (need_config) opt->required();
  cmd->add_option("--seed", f.seed, "master seed, overrides the file");
  cmd->add_option("--jobs", f.jobs, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--out", f.out, "output directory");
}

ams::cli::ExperimentConfig load(const Flags& f) {
  auto cfg = ams::cli::load_config(f.config);
  if (f.seed) {
    cfg.seed = *f.seed;
    cfg.source["seed"] = *f.seed;
  }
  if (f.jobs) cfg.jobs = *f.jobs;
  if (f.out) cfg.out = *f.out;
  return cfg;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ams::cli::ConfigError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive multilevel splitting experiments"};
  app.require_subcommand(1);

  Flags run_flags, sweep_flags, mc_flags, diag_flags;
  auto* run = app.add_subcommand("run", "N independent realizations of one configuration");
  add_common(run, run_flags, true);
  auto* sweep = app.add_subcommand("sweep", "run every point of the config's grid");
  add_common(sweep, sweep_flags, true);
  auto* mc = app.add_subcommand("mc-baseline", "direct Monte Carlo for the configured model");
  add_common(mc, mc_flags, true);
  auto* diag = app.add_subcommand("diagnose", "re-aggregate from a per-run CSV");
  std::string runs_path;
  std::size_t n0 = 0;
  bool channels = false;
  diag->add_option("--runs", runs_path, "runs.csv (default: <out>/runs.csv)");
  diag->add_option("--n0", n0, "partial averages over the n0 largest estimates");
  diag->add_flag("--channels", channels, "include channel statistics");
  add_common(diag, diag_flags, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (run->parsed()) {
      const auto cfg = load(run_flags);
      const auto out = ams::cli::run_experiment(cfg);
      ams::cli::write_outputs(out, cfg.out);
      std::cout << ams::cli::dump_json(out.summary["stats"]);
      return out.any_failed() ? kRunError : kOk;
    }
    if (sweep->parsed()) {
      const auto cfg = load(sweep_flags);
      const auto out = ams::cli::sweep(cfg);
      ams::cli::write_sweep(out, cfg.out);
      std::cout << out.table_csv;
      return out.any_failed() ? kRunError : kOk;
    }
    if (mc->parsed()) {
      const auto cfg = load(mc_flags);
      const auto j = ams::cli::mc_baseline(cfg, ams::cli::fnv1a("mc-baseline"));
      std::filesystem::create_directories(cfg.out);
      std::ofstream(std::filesystem::path(cfg.out) / "mc_baseline.json", std::ios::binary) << ams::cli::dump_json(j);
      std::cout << ams::cli::dump_json(j);
      return kOk;
    }
    if (diag->parsed()) {
      std::filesystem::path dir = diag_flags.out.value_or("out");
      if (!diag_flags.config.empty()) {
        const auto cfg = load(diag_flags);
        dir = cfg.out;
        if (n0 == 0) n0 = cfg.n0;
        channels = channels || cfg.model == ams::cli::ModelKind::bichannel;
      }
      const std::filesystem::path csv = runs_path.empty() ? dir / "runs.csv" : std::filesystem::path(runs_path);
      const auto records = ams::cli::parse_runs_csv(slurp(csv));
      const auto stats = ams::cli::summarize_records(records, n0, channels);
      std::filesystem::create_directories(dir);
      std::ofstream(dir / "diagnose.json", std::ios::binary) << ams::cli::dump_json(stats);
      std::cout << ams::cli::dump_json(stats);
      return kOk;
    }
  } catch (const ams::cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRunError;
  }
  return kConfigError;
}
