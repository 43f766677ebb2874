#include "ams/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "ams/dynamics.hpp"
#include "ams/markov_path.hpp"
#include "ams/oracle.hpp"
#include "ams/parallel.hpp"
#include "ams/random.hpp"
#include "ams/variants.hpp"

namespace ams::cli {

namespace {

const std::set<std::string> kCommonKeys = {
    "model", "algorithm", "xi", "n_rep", "k", "z_max", "runs", "seed", "level_strategy", "subset_size",
    "jobs", "out", "trace_per_decade", "n0", "mc_samples", "max_iterations", "max_attempts", "path_cap", "grid",
    "description"};

const std::map<ModelKind, std::set<std::string>> kModelKeys = {
    {ModelKind::drifted_bm, {"mu", "beta", "dt", "a", "b"}},
    {ModelKind::bichannel, {"beta", "dt", "rho"}},
    {ModelKind::allen_cahn, {"gamma", "beta", "dt", "rho"}},
    {ModelKind::gamblers_ruin, {"p_up", "start", "L"}},
    {ModelKind::bridge, {"kappa"}},
};

ModelKind parse_model(const std::string& s) {
  if (s == "drifted-bm") return ModelKind::drifted_bm;
  if (s == "bichannel") return ModelKind::bichannel;
  if (s == "allen-cahn") return ModelKind::allen_cahn;
  if (s == "gamblers-ruin") return ModelKind::gamblers_ruin;
  if (s == "gaussian-bridge" || s == "bridge") return ModelKind::bridge;
  throw ConfigError("model: unknown model '" + s +
                    "' (expected drifted-bm, bichannel, allen-cahn, gamblers-ruin or gaussian-bridge)");
}

Algorithm parse_algorithm(const std::string& s) {
  if (s == "ams") return Algorithm::ams;
  if (s == "ams-exact-k") return Algorithm::ams_exact_k;
  if (s == "biased-v1") return Algorithm::biased_v1;
  if (s == "biased-v2") return Algorithm::biased_v2;
  if (s == "direct-mc") return Algorithm::direct_mc;
  throw ConfigError("algorithm: unknown algorithm '" + s +
                    "' (expected ams, ams-exact-k, biased-v1, biased-v2 or direct-mc)");
}

double get_real(const Json& doc, const char* key) {
  const auto& v = doc.at(key);
  if (!v.is_number()) throw ConfigError(std::string(key) + ": expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(std::string(key) + ": must be finite");
  return x;
}

std::uint64_t get_unsigned(const Json& doc, const char* key) {
  const auto& v = doc.at(key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    const auto x = v.get<std::int64_t>();
    if (x < 0) throw ConfigError(std::string(key) + ": must be non-negative");
    return static_cast<std::uint64_t>(x);
  }
  throw ConfigError(std::string(key) + ": expected a non-negative integer");
}

std::string get_string(const Json& doc, const char* key) {
  const auto& v = doc.at(key);
  if (!v.is_string()) throw ConfigError(std::string(key) + ": expected a string");
  return v.get<std::string>();
}

template <class T>
void read_real(const Json& doc, const char* key, T& dst) {
  if (doc.contains(key)) dst = get_real(doc, key);
}

template <class T>
void read_unsigned(const Json& doc, const char* key, T& dst) {
  if (!doc.contains(key)) return;
  const std::uint64_t v = get_unsigned(doc, key);
  if (v > static_cast<std::uint64_t>(std::numeric_limits<T>::max())) throw ConfigError(std::string(key) + ": too large");
  dst = static_cast<T>(v);
}

void read_int(const Json& doc, const char* key, int& dst) {
  if (!doc.contains(key)) return;
  const auto& v = doc.at(key);
  if (!v.is_number_integer()) throw ConfigError(std::string(key) + ": expected an integer");
  const auto x = v.get<std::int64_t>();
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
    throw ConfigError(std::string(key) + ": out of range");
  dst = static_cast<int>(x);
}

// Smallest xi over the boundary of the target ball; xi is continuous, so a
// z_max below it is below xi on the whole open ball.
double min_xi_on_ball(const ChainModel<2>& m, double cx, double cy, double rho) {
  double lo = std::numeric_limits<double>::infinity();
  const int n = 3600;
  for (int i = 0; i < n; ++i) {
    const double t = 2.0 * std::numbers::pi * i / n;
    lo = std::min(lo, m.xi(Point<2>{cx + rho * std::cos(t), cy + rho * std::sin(t)}));
  }
  return lo;
}

ChainModel<1> build_chain1(const ExperimentConfig& c) {
  ChainModel<1> m = c.model == ModelKind::drifted_bm ? dynamics::drifted_bm_model(c.mu, c.beta, c.dt, c.a, c.b)
                                                      : dynamics::gamblers_ruin_model(c.p_up, c.start, c.L);
  m.z_max = c.z_max;
  m.path_cap = c.path_cap;
  return m;
}

ChainModel<2> build_chain2(const ExperimentConfig& c) {
  const auto xi = dynamics::parse_xi(c.xi);
  ChainModel<2> m = c.model == ModelKind::bichannel ? dynamics::bichannel_model(c.beta, xi, c.dt, c.rho)
                                                     : dynamics::allen_cahn_model(c.gamma, c.beta, xi, c.dt, c.rho);
  m.z_max = c.z_max;
  m.path_cap = c.path_cap;
  return m;
}

// Calls f with the configured model: ChainModel<1>, ChainModel<2> or
// BridgeModel.
template <class F>
decltype(auto) with_model(const ExperimentConfig& c, F&& f) {
  switch (c.model) {
    case ModelKind::drifted_bm:
    case ModelKind::gamblers_ruin:
      return f(build_chain1(c));
    case ModelKind::bichannel:
    case ModelKind::allen_cahn:
      return f(build_chain2(c));
    case ModelKind::bridge:
      break;
  }
  return f(BridgeModel(c.kappa, c.z_max));
}

GamsConfig gams_config(const ExperimentConfig& c) {
  GamsConfig g;
  g.n_rep = c.n_rep;
  g.k = c.k;
  g.z_max = c.z_max;
  g.level_strategy = c.level_strategy;
  g.max_iterations = c.max_iterations;
  g.seed = c.seed;
  return g;
}

template <class State>
void fill_from_result(RunRecord& rec, const RunResult<State>& res) {
  rec.p_hat = res.p_hat;
  rec.q_iter = res.q_iter;
  rec.extinct = res.extinct;
  rec.m_b = static_cast<std::size_t>(
      std::count_if(res.final_working.begin(), res.final_working.end(), [](const auto& r) { return r.reached_target; }));
  rec.ancestors = diagnostics::ancestry_report(res);
}

template <std::size_t D>
void run_chain(const ChainModel<D>& chain, const ExperimentConfig& c, Rng& rng, RunRecord& rec) {
  if (c.algorithm == Algorithm::direct_mc) {
    rec.p_hat = oracle::direct_mc(chain, c.mc_samples, rng).value;
    return;
  }
  const GamsConfig g = gams_config(c);
  RunResult<StoppedPath<D>> res;
  switch (c.algorithm) {
    case Algorithm::ams:
      res = run_ams(PathModel<D>(chain), g, rng);
      break;
    case Algorithm::ams_exact_k:
      res = run_ams(ExactKPathModel<D>(chain, c.max_attempts), g, rng);
      break;
    case Algorithm::biased_v1:
      res = biased::run_biased(PathModel<D>(chain), g, biased::Version::version1, rng);
      break;
    case Algorithm::biased_v2:
      res = biased::run_biased(PathModel<D>(chain), g, biased::Version::version2, rng);
      break;
    case Algorithm::direct_mc:
      break;
  }
  fill_from_result(rec, res);
  if constexpr (D >= 2) {
    if (chain.channel) {
      const auto ch = diagnostics::channel_record(res, *chain.channel);
      rec.m_b_upper = ch.m_b_upper;
      rec.m_b_lower = ch.m_b_lower;
      rec.p_upper = ch.p_upper;
      rec.p_lower = ch.p_lower;
    }
  }
}

void run_bridge(const BridgeModel& model, const ExperimentConfig& c, Rng& rng, RunRecord& rec) {
  if (c.algorithm == Algorithm::direct_mc) {
    rec.p_hat = oracle::bridge_exceedance_mc(model.kappa(), model.z_max(), c.mc_samples, rng).value;
    return;
  }
  fill_from_result(rec, run_ams(model, gams_config(c), rng));
}

std::string sanitize(std::string s) {
  for (char& ch : s) {
    if (ch == ',' || ch == '"') ch = ';';
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  return s;
}

std::string fmt(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

Json aggregate_json(const diagnostics::Aggregate& a) {
  Json j;
  j["mean"] = a.mean;
  j["ci_width"] = a.ci_width;
  j["ci_lower"] = a.lower();
  j["ci_upper"] = a.upper();
  j["min"] = a.min;
  j["max"] = a.max;
  return j;
}

Json nan_to_null(double x) { return std::isnan(x) ? Json(nullptr) : Json(x); }

Json config_json(const ExperimentConfig& c) {
  Json j;
  j["model"] = to_string(c.model);
  j["algorithm"] = to_string(c.algorithm);
  j["xi"] = c.xi;
  switch (c.model) {
    case ModelKind::drifted_bm:
      j["mu"] = c.mu, j["beta"] = c.beta, j["dt"] = c.dt, j["a"] = c.a, j["b"] = c.b;
      break;
    case ModelKind::bichannel:
      j["beta"] = c.beta, j["dt"] = c.dt, j["rho"] = c.rho;
      break;
    case ModelKind::allen_cahn:
      j["gamma"] = c.gamma, j["beta"] = c.beta, j["dt"] = c.dt, j["rho"] = c.rho;
      break;
    case ModelKind::gamblers_ruin:
      j["p_up"] = c.p_up, j["start"] = c.start, j["L"] = c.L;
      break;
    case ModelKind::bridge:
      j["kappa"] = c.kappa;
      break;
  }
  if (c.algorithm == Algorithm::direct_mc) {
    j["mc_samples"] = c.mc_samples;
  } else {
    j["n_rep"] = c.n_rep;
    j["k"] = c.k;
    j["level_strategy"] =
        c.level_strategy.kind == LevelStrategy::Kind::full_sort ? "full-sort" : "random-subset";
    if (c.level_strategy.kind == LevelStrategy::Kind::random_subset) j["subset_size"] = c.level_strategy.subset_size;
    j["max_iterations"] = c.max_iterations;
    if (c.algorithm == Algorithm::ams_exact_k) j["max_attempts"] = c.max_attempts;
  }
  j["z_max"] = c.z_max;
  j["runs"] = c.runs;
  j["seed"] = c.seed;
  if (c.model != ModelKind::bridge) j["path_cap"] = c.path_cap;
  return j;
}

bool has_channels(const ExperimentConfig& c) { return c.model == ModelKind::bichannel; }

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + p.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing " + p.string());
}

}  // namespace

std::string to_string(ModelKind m) {
  switch (m) {
    case ModelKind::drifted_bm: return "drifted-bm";
    case ModelKind::bichannel: return "bichannel";
    case ModelKind::allen_cahn: return "allen-cahn";
    case ModelKind::gamblers_ruin: return "gamblers-ruin";
    case ModelKind::bridge: return "gaussian-bridge";
  }
  return "?";
}

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::ams: return "ams";
    case Algorithm::ams_exact_k: return "ams-exact-k";
    case Algorithm::biased_v1: return "biased-v1";
    case Algorithm::biased_v2: return "biased-v2";
    case Algorithm::direct_mc: return "direct-mc";
  }
  return "?";
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

void check_grid(const Json& grid) {
  if (!grid.is_object() || grid.empty()) throw ConfigError("grid: expected a non-empty object of value lists");
  for (const auto& [key, values] : grid.items()) {
    if (key == "grid" || key == "out" || key == "jobs" || key == "description")
      throw ConfigError("grid." + key + ": cannot be swept");
    if (!kCommonKeys.count(key)) {
      bool known = false;
      for (const auto& [m, keys] : kModelKeys) known = known || keys.count(key);
      if (!known) throw ConfigError("grid." + key + ": unknown key");
    }
    if (!values.is_array()) throw ConfigError("grid." + key + ": expected a list of values");
    if (values.empty()) throw ConfigError("grid." + key + ": empty dimension");
  }
}

}  // namespace

ExperimentConfig parse_config(const Json& doc) {
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  if (!doc.contains("model")) throw ConfigError("model: missing");
  ExperimentConfig c;
  c.model = parse_model(get_string(doc, "model"));

  const auto& model_keys = kModelKeys.at(c.model);
  for (const auto& [key, value] : doc.items()) {
    if (kCommonKeys.count(key) || model_keys.count(key)) continue;
    bool other_model = false;
    for (const auto& [m, keys] : kModelKeys) other_model = other_model || keys.count(key);
    if (other_model) throw ConfigError(key + ": not a parameter of model " + to_string(c.model));
    throw ConfigError(key + ": unknown key");
  }

  if (c.model == ModelKind::bridge && doc.contains("path_cap"))
    throw ConfigError("path_cap: not a parameter of model gaussian-bridge");
  if (doc.contains("algorithm")) c.algorithm = parse_algorithm(get_string(doc, "algorithm"));
  if (doc.contains("description") && !doc.at("description").is_string())
    throw ConfigError("description: expected a string");

  // Model parameters and their defaults.
  switch (c.model) {
    case ModelKind::drifted_bm: c.beta = 8.0, c.dt = 0.1; break;
    case ModelKind::bichannel: c.beta = 5.0, c.dt = 0.05; break;
    case ModelKind::allen_cahn: c.beta = 10.0, c.dt = 0.05; break;
    default: break;
  }
  read_real(doc, "beta", c.beta);
  read_real(doc, "gamma", c.gamma);
  read_real(doc, "mu", c.mu);
  read_real(doc, "dt", c.dt);
  read_real(doc, "rho", c.rho);
  read_real(doc, "a", c.a);
  read_real(doc, "b", c.b);
  read_unsigned(doc, "kappa", c.kappa);
  read_real(doc, "p_up", c.p_up);
  read_int(doc, "start", c.start);
  read_int(doc, "L", c.L);

  if (!(c.beta > 0.0)) throw ConfigError("beta: must be positive");
  if (!(c.dt > 0.0)) throw ConfigError("dt: must be positive");
  if (!(c.rho > 0.0 && c.rho < 1.0)) throw ConfigError("rho: must lie in (0, 1)");
  if (!(c.gamma > 0.0)) throw ConfigError("gamma: must be positive");
  if (!(c.mu > 0.0)) throw ConfigError("mu: must be positive");
  if (!(c.a < 1.0)) throw ConfigError("a: must be below the starting point 1");
  if (!(c.b > 1.0)) throw ConfigError("b: must be above the starting point 1");
  if (c.kappa == 0) throw ConfigError("kappa: must be at least 1");
  if (!(c.p_up > 0.0 && c.p_up < 1.0)) throw ConfigError("p_up: must lie in (0, 1)");
  if (c.L < 2) throw ConfigError("L: must be at least 2");
  if (!(0 < c.start && c.start < c.L)) throw ConfigError("start: must lie strictly between 0 and L");

  // Reaction coordinate and the compatible range of z_max.
  const bool planar = c.model == ModelKind::bichannel || c.model == ModelKind::allen_cahn;
  if (planar) {
    c.xi = doc.contains("xi") ? get_string(doc, "xi") : "xi1";
    dynamics::XiChoice xi;
    try {
      xi = dynamics::parse_xi(c.xi);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("xi: ") + e.what());
    }
    if (c.model == ModelKind::bichannel && xi == dynamics::XiChoice::magnetization)
      throw ConfigError("xi: xi4 is not defined for the bichannel model");
    c.xi = std::string(dynamics::to_string(xi));
    c.z_max = c.model == ModelKind::bichannel ? dynamics::default_z_max_bichannel(xi)
                                              : dynamics::default_z_max_allen_cahn(xi);
  } else {
    c.xi = doc.contains("xi") ? get_string(doc, "xi") : "identity";
    if (c.xi != "identity") throw ConfigError("xi: model " + to_string(c.model) + " only supports 'identity'");
    switch (c.model) {
      case ModelKind::drifted_bm: c.z_max = c.b; break;
      case ModelKind::gamblers_ruin: c.z_max = c.L - 0.5; break;
      default: c.z_max = 2.0; break;
    }
  }
  read_real(doc, "z_max", c.z_max);

  switch (c.model) {
    case ModelKind::drifted_bm:
      if (c.z_max > c.b) throw ConfigError("z_max: must not exceed b (B must lie above z_max)");
      if (!(c.z_max > 1.0)) throw ConfigError("z_max: must lie above the starting point 1");
      break;
    case ModelKind::gamblers_ruin:
      if (!(c.z_max < c.L)) throw ConfigError("z_max: must lie below L");
      if (!(c.z_max >= c.start)) throw ConfigError("z_max: must not lie below start");
      break;
    case ModelKind::bichannel:
    case ModelKind::allen_cahn: {
      const ChainModel<2> m = build_chain2(c);
      const double cx = c.model == ModelKind::bichannel ? 1.0 : 1.0;
      const double cy = c.model == ModelKind::bichannel ? 0.0 : 1.0;
      if (!(min_xi_on_ball(m, cx, cy, c.rho) > c.z_max))
        throw ConfigError("z_max: " + fmt(c.z_max) + " is not below xi on B for " + c.xi);
      if (!(m.xi(m.x0) <= c.z_max)) throw ConfigError("z_max: starting point already above z_max");
      break;
    }
    case ModelKind::bridge:
      break;
  }

  if (c.model == ModelKind::bridge && c.algorithm != Algorithm::ams && c.algorithm != Algorithm::direct_mc)
    throw ConfigError("algorithm: the bridge model supports only ams and direct-mc");

  read_unsigned(doc, "n_rep", c.n_rep);
  read_unsigned(doc, "k", c.k);
  read_unsigned(doc, "runs", c.runs);
  read_unsigned(doc, "seed", c.seed);
  read_unsigned(doc, "jobs", c.jobs);
  read_unsigned(doc, "trace_per_decade", c.trace_per_decade);
  read_unsigned(doc, "n0", c.n0);
  read_unsigned(doc, "mc_samples", c.mc_samples);
  read_unsigned(doc, "max_iterations", c.max_iterations);
  read_unsigned(doc, "max_attempts", c.max_attempts);
  read_unsigned(doc, "path_cap", c.path_cap);
  if (doc.contains("out")) c.out = get_string(doc, "out");

  if (c.n_rep < 2) throw ConfigError("n_rep: must be at least 2");
  if (c.k < 1 || c.k >= c.n_rep) throw ConfigError("k: must lie in [1, n_rep - 1]");
  if (c.runs < 1) throw ConfigError("runs: must be at least 1");
  if (c.jobs < 1) throw ConfigError("jobs: must be at least 1");
  if (c.mc_samples < 1) throw ConfigError("mc_samples: must be at least 1");
  if (c.max_iterations < 1) throw ConfigError("max_iterations: must be at least 1");
  if (c.max_attempts < 1) throw ConfigError("max_attempts: must be at least 1");
  if (c.path_cap < 2) throw ConfigError("path_cap: must be at least 2");
  if (c.n0 != 0 && c.n0 >= c.runs) throw ConfigError("n0: must be smaller than runs");

  std::string strategy = "full-sort";
  if (doc.contains("level_strategy")) strategy = get_string(doc, "level_strategy");
  if (strategy == "full-sort") {
    if (doc.contains("subset_size")) throw ConfigError("subset_size: only valid with level_strategy random-subset");
    c.level_strategy = LevelStrategy::full_sort();
  } else if (strategy == "random-subset") {
    if (!doc.contains("subset_size")) throw ConfigError("subset_size: required with level_strategy random-subset");
    std::size_t m = 0;
    read_unsigned(doc, "subset_size", m);
    if (m < c.k || m > c.n_rep) throw ConfigError("subset_size: must lie in [k, n_rep]");
    c.level_strategy = LevelStrategy::random_subset(m);
  } else {
    throw ConfigError("level_strategy: expected full-sort or random-subset");
  }

  if (doc.contains("grid")) {
    c.grid = doc.at("grid");
    check_grid(c.grid);
  }
  c.source = doc;
  c.source.erase("grid");
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return parse_config(doc);
}

RunRecord execute_run(const ExperimentConfig& cfg, std::size_t run, std::uint64_t salt) {
  RunRecord rec;
  rec.run = run;
  Rng rng(derive_seed(cfg.seed, salt, run));
  try {
    with_model(cfg, [&](const auto& model) {
      using M = std::decay_t<decltype(model)>;
      if constexpr (std::is_same_v<M, BridgeModel>) {
        run_bridge(model, cfg, rng, rec);
      } else {
        run_chain(model, cfg, rng, rec);
      }
    });
  } catch (const std::exception& e) {
    RunRecord failed;
    failed.run = run;
    failed.error = sanitize(e.what());
    if (failed.error.empty()) failed.error = "unknown error";
    return failed;
  }
  return rec;
}

Json summarize_records(const std::vector<RunRecord>& records, std::size_t n0, bool channels) {
  Json s;
  std::vector<double> p;
  std::vector<diagnostics::ChannelRecord> ch;
  Json errors = Json::array();
  std::size_t extinctions = 0, nonzero = 0;
  double q_sum = 0.0, anc_sum = 0.0;
  for (const auto& r : records) {
    if (!r.ok()) {
      errors.push_back({{"run", r.run}, {"error", r.error}});
      continue;
    }
    p.push_back(r.p_hat);
    ch.push_back({r.p_hat, r.m_b, r.m_b_upper, r.m_b_lower, r.p_upper, r.p_lower});
    extinctions += r.extinct ? 1 : 0;
    nonzero += r.p_hat != 0.0 ? 1 : 0;
    q_sum += static_cast<double>(r.q_iter);
    anc_sum += static_cast<double>(r.ancestors);
  }
  s["runs_total"] = records.size();
  s["runs_completed"] = p.size();
  s["runs_failed"] = records.size() - p.size();
  s["errors"] = errors;
  s["extinctions"] = extinctions;
  s["nonzero_runs"] = nonzero;
  const double n = static_cast<double>(p.size());
  s["mean_q_iter"] = p.empty() ? Json(nullptr) : Json(q_sum / n);
  s["mean_ancestors"] = p.empty() ? Json(nullptr) : Json(anc_sum / n);
  if (p.size() >= 2) {
    const auto a = diagnostics::aggregate(p);
    s["p_bar"] = a.mean;
    s["ci_width"] = a.ci_width;
    s["ci_lower"] = a.lower();
    s["ci_upper"] = a.upper();
    s["min"] = a.min;
    s["max"] = a.max;
    s["relative_half_width"] = a.mean > 0.0 ? Json(0.5 * a.ci_width / a.mean) : Json(nullptr);
  } else {
    s["p_bar"] = p.empty() ? Json(nullptr) : Json(p.front());
    s["ci_width"] = nullptr;
    s["ci_lower"] = nullptr;
    s["ci_upper"] = nullptr;
    s["min"] = p.empty() ? Json(nullptr) : Json(p.front());
    s["max"] = p.empty() ? Json(nullptr) : Json(p.front());
    s["relative_half_width"] = nullptr;
  }
  if (n0 > 0 && n0 < p.size()) {
    const auto pa = diagnostics::partial_averages(p, n0);
    s["partial_averages"] = {{"n0", n0}, {"large", pa.large}, {"small", pa.small}};
  }
  if (channels && !ch.empty()) {
    const auto cs = diagnostics::channel_stats(ch);
    Json c;
    c["R_N"] = cs.R_N;
    c["rho_upper"] = cs.rho_upper;
    c["rho_lower"] = cs.rho_lower;
    c["rho_mix"] = cs.rho_mix;
    c["p_tilde_upper"] = nan_to_null(cs.p_tilde_upper);
    c["p_tilde_lower"] = nan_to_null(cs.p_tilde_lower);
    c["p_tilde_mix"] = nan_to_null(cs.p_tilde_mix);
    c["recombined"] = cs.recombined();
    if (ch.size() >= 2) {
      c["upper"] = aggregate_json(cs.upper);
      c["lower"] = aggregate_json(cs.lower);
    }
    s["channels"] = c;
  }
  return s;
}

bool ExperimentOutput::any_failed() const {
  return std::any_of(records.begin(), records.end(), [](const RunRecord& r) { return !r.ok(); });
}

ExperimentOutput run_experiment(const ExperimentConfig& cfg, std::uint64_t salt) {
  ExperimentOutput out;
  out.records.resize(cfg.runs);
  parallel_for_index(cfg.runs, cfg.jobs, [&](std::size_t i) { out.records[i] = execute_run(cfg, i + 1, salt); });

  std::vector<double> p;
  for (const auto& r : out.records)
    if (r.ok()) p.push_back(r.p_hat);
  out.trace = diagnostics::convergence_trace(p, cfg.trace_per_decade == 0 ? 10 : cfg.trace_per_decade);

  out.summary["config"] = config_json(cfg);
  out.summary["salt"] = salt;
  out.summary["stats"] = summarize_records(out.records, cfg.n0, has_channels(cfg));
  return out;
}

std::string runs_csv(const std::vector<RunRecord>& records) {
  std::string s = "run,p_hat,q_iter,extinct,m_b,m_b_upper,m_b_lower,p_upper,p_lower,ancestors,error\n";
  for (const auto& r : records) {
    s += std::to_string(r.run) + ',' + fmt(r.p_hat) + ',' + std::to_string(r.q_iter) + ',' +
         (r.extinct ? "1" : "0") + ',' + std::to_string(r.m_b) + ',' + std::to_string(r.m_b_upper) + ',' +
         std::to_string(r.m_b_lower) + ',' + fmt(r.p_upper) + ',' + fmt(r.p_lower) + ',' +
         std::to_string(r.ancestors) + ',' + sanitize(r.error) + '\n';
  }
  return s;
}

std::vector<RunRecord> parse_runs_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) ||
      line != "run,p_hat,q_iter,extinct,m_b,m_b_upper,m_b_lower,p_upper,p_lower,ancestors,error")
    throw ConfigError("runs.csv: unexpected header");
  std::vector<RunRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t pos = 0;
    for (int i = 0; i < 10; ++i) {
      const auto comma = line.find(',', pos);
      if (comma == std::string::npos) throw ConfigError("runs.csv: line " + std::to_string(line_no) + " is short");
      f.push_back(line.substr(pos, comma - pos));
      pos = comma + 1;
    }
    f.push_back(line.substr(pos));
    auto num = [&](const std::string& s, auto& dst) {
      const auto r = std::from_chars(s.data(), s.data() + s.size(), dst);
      if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw ConfigError("runs.csv: line " + std::to_string(line_no) + ": bad field '" + s + "'");
    };
    RunRecord r;
    int extinct = 0;
    num(f[0], r.run);
    num(f[1], r.p_hat);
    num(f[2], r.q_iter);
    num(f[3], extinct);
    num(f[4], r.m_b);
    num(f[5], r.m_b_upper);
    num(f[6], r.m_b_lower);
    num(f[7], r.p_upper);
    num(f[8], r.p_lower);
    num(f[9], r.ancestors);
    r.extinct = extinct != 0;
    r.error = f[10];
    out.push_back(std::move(r));
  }
  return out;
}

std::string trace_csv(const std::vector<diagnostics::TracePoint>& trace) {
  std::string s = "n,mean,ci_width\n";
  for (const auto& t : trace) s += std::to_string(t.n) + ',' + fmt(t.mean) + ',' + fmt(t.ci_width) + '\n';
  return s;
}

std::string dump_json(const Json& j) { return j.dump(2) + '\n'; }

void write_outputs(const ExperimentOutput& out, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir / "runs.csv", runs_csv(out.records));
  write_file(dir / "summary.json", dump_json(out.summary));
  write_file(dir / "trace.csv", trace_csv(out.trace));
}

std::vector<GridPoint> expand_grid(const ExperimentConfig& base) {
  if (base.grid.is_null()) throw ConfigError("grid: missing (sweep needs at least one dimension)");
  if (!base.grid.is_object() || base.grid.empty()) throw ConfigError("grid: expected a non-empty object");
  check_grid(base.grid);
  std::vector<std::pair<std::string, std::vector<Json>>> dims;
  for (const auto& [key, values] : base.grid.items())
    dims.emplace_back(key, std::vector<Json>(values.begin(), values.end()));

  std::vector<GridPoint> points;
  std::vector<std::size_t> idx(dims.size(), 0);
  while (true) {
    GridPoint gp;
    Json doc = base.source;
    gp.overrides = Json::object();
    for (std::size_t d = 0; d < dims.size(); ++d) {
      const Json& v = dims[d].second[idx[d]];
      doc[dims[d].first] = v;
      gp.overrides[dims[d].first] = v;
      if (!gp.name.empty()) gp.name += ',';
      gp.name += dims[d].first + '=' + (v.is_string() ? v.get<std::string>() : v.dump());
    }
    gp.salt = fnv1a(gp.name);
    try {
      gp.config = parse_config(doc);
    } catch (const ConfigError& e) {
      throw ConfigError("grid point " + gp.name + ": " + e.what());
    }
    gp.config.jobs = base.jobs;
    gp.config.out = base.out;
    points.push_back(std::move(gp));

    std::size_t d = dims.size();
    while (d > 0) {
      --d;
      if (++idx[d] < dims[d].second.size()) break;
      idx[d] = 0;
      if (d == 0) return points;
    }
    if (dims.empty()) return points;
  }
}

bool SweepOutput::any_failed() const {
  return std::any_of(outputs.begin(), outputs.end(), [](const ExperimentOutput& o) { return o.any_failed(); });
}

SweepOutput sweep(const ExperimentConfig& base) {
  SweepOutput s;
  s.points = expand_grid(base);
  s.summary = Json::array();
  std::vector<std::string> keys;
  for (const auto& [key, v] : base.grid.items()) keys.push_back(key);
  for (const auto& k : keys) s.table_csv += k + ',';
  s.table_csv += "runs_completed,p_bar,ci_lower,ci_upper,ci_width,mean_q_iter\n";
  auto cell = [](const Json& j) { return j.is_null() ? std::string() : j.is_number_float() ? fmt(j.get<double>()) : j.dump(); };
  for (const auto& gp : s.points) {
    s.outputs.push_back(run_experiment(gp.config, gp.salt));
    const auto& out = s.outputs.back();
    s.summary.push_back({{"point", gp.name}, {"overrides", gp.overrides}, {"summary", out.summary}});
    for (const auto& k : keys) {
      const Json& v = gp.overrides.at(k);
      s.table_csv += (v.is_string() ? v.get<std::string>() : v.dump()) + ',';
    }
    const auto& st = out.summary.at("stats");
    s.table_csv += cell(st.at("runs_completed")) + ',' + cell(st.at("p_bar")) + ',' + cell(st.at("ci_lower")) + ',' +
                   cell(st.at("ci_upper")) + ',' + cell(st.at("ci_width")) + ',' + cell(st.at("mean_q_iter")) + '\n';
  }
  return s;
}

void write_sweep(const SweepOutput& out, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < out.points.size(); ++i) {
    std::string sub = out.points[i].name;
    std::replace(sub.begin(), sub.end(), ',', '_');
    std::replace(sub.begin(), sub.end(), '/', '_');
    write_outputs(out.outputs[i], dir / sub);
  }
  write_file(dir / "sweep.json", dump_json(out.summary));
  write_file(dir / "table.csv", out.table_csv);
}

Json mc_baseline(const ExperimentConfig& cfg, std::uint64_t salt) {
  constexpr std::uint64_t shard = 100'000;
  oracle::OracleResult r = with_model(cfg, [&](const auto& model) {
    using M = std::decay_t<decltype(model)>;
    if constexpr (std::is_same_v<M, BridgeModel>) {
      const std::uint64_t shards = (cfg.mc_samples + shard - 1) / shard;
      std::vector<std::uint64_t> hits(shards, 0);
      parallel_for_index(shards, cfg.jobs, [&](std::size_t s) {
        Rng rng(derive_seed(cfg.seed, salt, s));
        const std::uint64_t count = std::min<std::uint64_t>(shard, cfg.mc_samples - s * shard);
        hits[s] = oracle::bridge_exceedance_mc(model.kappa(), model.z_max(), count, rng).hits;
      });
      std::uint64_t total = 0;
      for (auto h : hits) total += h;
      return oracle::detail::binomial(total, cfg.mc_samples, "bridge-dense-mc");
    } else {
      return oracle::direct_mc_parallel(model, cfg.mc_samples, cfg.seed, salt, cfg.jobs, shard);
    }
  });
  Json j;
  Json c = config_json(cfg);
  for (const char* key : {"n_rep", "k", "level_strategy", "subset_size", "max_iterations", "runs", "algorithm"})
    c.erase(key);
  c["mc_samples"] = cfg.mc_samples;
  j["config"] = c;
  j["salt"] = salt;
  j["method"] = r.method;
  j["samples"] = r.samples;
  j["hits"] = r.hits;
  j["value"] = r.value;
  j["standard_error"] = r.standard_error;
  j["ci_width"] = r.ci_width();
  j["ci_lower"] = r.value - 0.5 * r.ci_width();
  j["ci_upper"] = r.value + 0.5 * r.ci_width();
  j["degenerate"] = r.degenerate;
  if (r.hits < 10) j["warning"] = "fewer than 10 hits; the error bar is not meaningful";
  return j;
}

}  // namespace ams::cli
