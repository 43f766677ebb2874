#pragma once

// Experiment harness behind the command-line tool: config parsing, N
// independent realizations with per-run sub-seeds, per-run CSV records,
// JSON summaries and parameter sweeps.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "ams/diagnostics.hpp"
#include "ams/gams.hpp"

namespace ams::cli {

using Json = nlohmann::json;

/// Invalid configuration. The message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ModelKind { drifted_bm, bichannel, allen_cahn, gamblers_ruin, bridge };
enum class Algorithm { ams, ams_exact_k, biased_v1, biased_v2, direct_mc };

std::string to_string(ModelKind m);
std::string to_string(Algorithm a);

struct ExperimentConfig {
  ModelKind model = ModelKind::drifted_bm;
  Algorithm algorithm = Algorithm::ams;
  std::string xi;  // "identity" for scalar models

  // Model parameters; only those of the chosen model may appear in a file.
  double beta = 8.0;
  double gamma = 1.0;
  double mu = 1.0;
  double dt = 0.1;
  double rho = 0.05;
  double a = 0.1;
  double b = 1.9;
  std::size_t kappa = 7;
  double p_up = 0.4;
  int start = 1;
  int L = 9;

  std::size_t n_rep = 100;
  std::size_t k = 1;
  double z_max = 0.0;  // model default unless given
  std::size_t runs = 100;
  std::uint64_t seed = 0;
  LevelStrategy level_strategy;
  unsigned jobs = 1;
  std::string out = "out";
  std::size_t trace_per_decade = 10;
  std::size_t n0 = 0;  // partial averages over the n0 largest; 0 disables
  std::uint64_t mc_samples = 1'000'000;
  std::uint64_t max_iterations = 1'000'000;
  std::uint64_t max_attempts = 1'000'000;  // rejection cap of ams-exact-k
  std::size_t path_cap = 100'000;

  Json grid;    // sweep dimensions, null when absent
  Json source;  // the file contents, minus the grid
};

/// Validate a parsed JSON document. Unknown keys, wrong types, parameters of
/// another model and incompatible (model, xi, z_max) triples are errors.
ExperimentConfig parse_config(const Json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

struct RunRecord {
  std::size_t run = 0;  // 1-based
  double p_hat = 0.0;
  std::size_t q_iter = 0;
  bool extinct = false;
  std::size_t m_b = 0;
  std::size_t m_b_upper = 0;
  std::size_t m_b_lower = 0;
  double p_upper = 0.0;
  double p_lower = 0.0;
  std::size_t ancestors = 0;
  std::string error;  // empty when the run completed

  bool ok() const noexcept { return error.empty(); }
};

/// Realization `run` (1-based) with sub-seed derive_seed(seed, salt, run).
/// Model and run errors become an error record.
RunRecord execute_run(const ExperimentConfig& cfg, std::size_t run, std::uint64_t salt = 0);

/// Aggregates over the completed records, in run order. Failed runs are
/// counted and listed but never enter the statistics.
Json summarize_records(const std::vector<RunRecord>& records, std::size_t n0, bool channels);

struct ExperimentOutput {
  std::vector<RunRecord> records;
  std::vector<diagnostics::TracePoint> trace;
  Json summary;
  bool any_failed() const;
};

ExperimentOutput run_experiment(const ExperimentConfig& cfg, std::uint64_t salt = 0);

std::string runs_csv(const std::vector<RunRecord>& records);
std::vector<RunRecord> parse_runs_csv(const std::string& text);
std::string trace_csv(const std::vector<diagnostics::TracePoint>& trace);
std::string dump_json(const Json& j);

/// Writes runs.csv, summary.json and trace.csv into `dir`.
void write_outputs(const ExperimentOutput& out, const std::filesystem::path& dir);

struct GridPoint {
  std::string name;     // "k=10,n_rep=50", keys in sorted order
  std::uint64_t salt = 0;  // FNV-1a of name
  Json overrides;
  ExperimentConfig config;
};

/// Cartesian product of the grid dimensions of `base`. An empty dimension or
/// an unknown key is a config error.
std::vector<GridPoint> expand_grid(const ExperimentConfig& base);

struct SweepOutput {
  std::vector<GridPoint> points;
  std::vector<ExperimentOutput> outputs;
  Json summary;  // array of per-point summaries
  std::string table_csv;
  bool any_failed() const;
};

SweepOutput sweep(const ExperimentConfig& base);
void write_sweep(const SweepOutput& out, const std::filesystem::path& dir);

/// Direct Monte Carlo baseline for the configured model, `mc_samples` paths
/// sharded over `jobs` threads.
Json mc_baseline(const ExperimentConfig& cfg, std::uint64_t salt = 0);

std::uint64_t fnv1a(const std::string& s);

}  // namespace ams::cli
