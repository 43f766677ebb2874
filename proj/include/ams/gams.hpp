#pragma once

// Generic adaptive multilevel splitting engine.
//
// One iteration at level Z:
//   split     working replicas with max level <= Z retire (K of them); K
//             children get parents drawn among the survivors
//   resample  each child copies its parent up to the branching point of Z
//             and is completed by the model's resampling kernel
//   level     next Z is the k-th order statistic of the working max levels,
//             or +inf when every working replica sits at or below it
// The loop stops once Z > z_max. Weights follow G' = G / E[B | past], which
// for the uniform multinomial branching of classical AMS is G (n - K) / n.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ams/level.hpp"
#include "ams/model.hpp"
#include "ams/random.hpp"

namespace ams {

using Label = std::uint64_t;
inline constexpr Label kNoParent = 0;

struct LevelStrategy {
  enum class Kind { full_sort, random_subset };
  Kind kind = Kind::full_sort;
  std::size_t subset_size = 0;

  static LevelStrategy full_sort() { return {}; }
  static LevelStrategy random_subset(std::size_t size) { return {Kind::random_subset, size}; }
};

struct GamsConfig {
  std::size_t n_rep = 100;
  std::size_t k = 1;
  double z_max = 0.0;
  LevelStrategy level_strategy;
  std::uint64_t max_iterations = 1'000'000;
  std::uint64_t seed = 0;
  // Keep retired replicas (states and weights). Needed for observables that
  // do not vanish on retired replicas; the rare-event probability does not.
  bool retain_retired = false;
  bool record_ancestry = true;

  void validate() const {
    if (n_rep < 2) throw std::invalid_argument("n_rep must be at least 2");
    if (k < 1 || k > n_rep - 1) throw std::invalid_argument("k must lie in [1, n_rep - 1]");
    if (max_iterations == 0) throw std::invalid_argument("max_iterations must be positive");
    if (std::isnan(z_max)) throw std::invalid_argument("z_max is NaN");
    if (level_strategy.kind == LevelStrategy::Kind::random_subset &&
        (level_strategy.subset_size < k || level_strategy.subset_size > n_rep)) {
      throw std::invalid_argument("random-subset size must lie in [k, n_rep]");
    }
  }
};

enum class ReplicaStatus { working, retired };

template <class State>
struct Replica {
  Label label = 0;
  State state{};
  double weight = 0.0;
  ReplicaStatus status = ReplicaStatus::working;
  Label parent = kNoParent;
  std::size_t birth_iteration = 0;
  ExtendedLevel cached_max_level;
};

template <class State>
struct ReplicaSystem {
  std::vector<Replica<State>> working;
  // Populated only with GamsConfig::retain_retired.
  std::vector<Replica<State>> retired;
  // Audit of every retired replica, retained or not.
  std::size_t retired_count = 0;
  double retired_weight = 0.0;

  ExtendedLevel current_level = ExtendedLevel::minus_infinity();
  std::size_t iteration = 0;
  std::vector<std::size_t> k_history;

  Label next_label = 1;
  // parent_of[label]; kNoParent for the initial replicas. Empty unless
  // ancestry is recorded.
  std::vector<Label> parent_of;

  double total_weight() const {
    double sum = retired_weight;
    for (const auto& r : working) sum += r.weight;
    return sum;
  }
};

// ---------------------------------------------------------------------------
// Branching policies

struct BranchingContext {
  // Max levels of the survivors, in working order.
  std::span<const double> survivor_levels;
  std::size_t retired_count = 0;
  std::size_t working_count = 0;
  ExtendedLevel level;
  std::size_t iteration = 0;
};

struct BranchingDecision {
  // Survivor index (into BranchingContext::survivor_levels) of each child.
  std::vector<std::size_t> parents;
  // Per survivor: 1 / E[B | information at the current level]. Must be > 0.
  std::vector<double> weight_factor;
};

/// Extension point for alternative selection rules. A policy must return
/// branching numbers whose conditional expectation is positive and report
/// the matching weight factors; the engine does not check unbiasedness.
using BranchingPolicy = std::function<BranchingDecision(const BranchingContext&, Rng&)>;

/// Classical rule: one uniform survivor per retired replica, with replacement.
inline BranchingDecision uniform_branching(const BranchingContext& ctx, Rng& rng) {
  const std::size_t survivors = ctx.survivor_levels.size();
  BranchingDecision d;
  d.parents.reserve(ctx.retired_count);
  for (std::size_t i = 0; i < ctx.retired_count; ++i) d.parents.push_back(rng.index(survivors));
  const double factor = static_cast<double>(ctx.working_count - ctx.retired_count) /
                        static_cast<double>(ctx.working_count);
  d.weight_factor.assign(survivors, factor);
  return d;
}

struct BranchingPlan {
  ExtendedLevel level;
  std::vector<std::size_t> retired;    // indices into working, ascending
  std::vector<std::size_t> survivors;  // indices into working, ascending
  std::vector<std::size_t> child_parent;  // working index of each child's parent
  std::vector<double> survivor_factor;    // aligned with survivors
  std::size_t K() const noexcept { return retired.size(); }
};

// ---------------------------------------------------------------------------
// Results

struct ReplicaSummary {
  Label label = 0;
  ExtendedLevel max_level;
  double weight = 0.0;
  bool reached_target = false;
  Label root = 0;
};

template <class State>
struct RunResult {
  double p_hat = 0.0;
  double p_corr = 0.0;
  std::size_t q_iter = 0;
  std::vector<std::size_t> k_history;
  bool extinct = false;
  std::optional<double> phi_hat;

  std::vector<ReplicaSummary> final_working;
  std::vector<State> final_states;     // aligned with final_working
  std::vector<Replica<State>> retired;  // only with retain_retired

  std::vector<double> levels;                     // Z^(0), ..., Z^(Q_iter)
  std::vector<double> per_iteration_weight_sums;  // after init and each iteration
  std::vector<Label> parent_of;                   // empty unless ancestry recorded
  bool ancestry_recorded = false;
};

template <class State>
using Observable = std::function<double(const State&)>;

template <class State>
using IterationObserver = std::function<void(const ReplicaSystem<State>&)>;

template <class State>
struct RunOptions {
  std::optional<Observable<State>> observable;
  BranchingPolicy policy;  // empty means uniform_branching
  IterationObserver<State> observer;  // called after init and each iteration
  // Stop after exactly this many iterations (or at extinction), ignoring
  // z_max. Used to study the fixed-iteration estimator.
  std::optional<std::size_t> fixed_iterations;
};

// ---------------------------------------------------------------------------
// Operations

template <ModelContract M>
ReplicaSystem<typename M::State> initialize_system(const M& model, const GamsConfig& cfg, Rng& rng) {
  cfg.validate();
  ReplicaSystem<typename M::State> sys;
  sys.working.reserve(cfg.n_rep);
  const double w = 1.0 / static_cast<double>(cfg.n_rep);
  if (cfg.record_ancestry) sys.parent_of.assign(cfg.n_rep + 1, kNoParent);
  for (std::size_t n = 0; n < cfg.n_rep; ++n) {
    Replica<typename M::State> r;
    r.label = sys.next_label++;
    try {
      r.state = model.sample_initial(rng);
    } catch (const ModelError& e) {
      throw RunError(std::string("initialization, replica ") + std::to_string(r.label) + ": " + e.what(),
                     0, {});
    }
    r.weight = w;
    r.cached_max_level = ExtendedLevel(model.max_level(r.state));
    sys.working.push_back(std::move(r));
  }
  return sys;
}

struct LevelComputation {
  ExtendedLevel level;      // what the engine uses (+inf on extinction)
  ExtendedLevel candidate;  // the k-th order statistic itself
};

template <class State>
LevelComputation compute_level_detailed(const ReplicaSystem<State>& sys, std::size_t k,
                                        const LevelStrategy& strategy, Rng& rng) {
  const auto& working = sys.working;
  std::vector<double> levels;
  if (strategy.kind == LevelStrategy::Kind::full_sort) {
    if (working.size() < k) throw std::invalid_argument("compute_level: fewer working replicas than k");
    levels.reserve(working.size());
    for (const auto& r : working) levels.push_back(r.cached_max_level.value());
    std::nth_element(levels.begin(), levels.begin() + static_cast<std::ptrdiff_t>(k - 1), levels.end());
  } else {
    const std::size_t m = std::min(strategy.subset_size, working.size());
    if (m < k) throw std::invalid_argument("compute_level: subset smaller than k");
    std::vector<std::size_t> idx(working.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < m; ++i) std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
    levels.reserve(m);
    for (std::size_t i = 0; i < m; ++i) levels.push_back(working[idx[i]].cached_max_level.value());
    std::sort(levels.begin(), levels.end());
  }
  const ExtendedLevel candidate(levels[k - 1]);
  const bool all_at_or_below =
      std::all_of(working.begin(), working.end(),
                  [&](const auto& r) { return r.cached_max_level <= candidate; });
  return {all_at_or_below ? ExtendedLevel::plus_infinity() : candidate, candidate};
}

/// k-th order statistic of the working max levels, or +inf on extinction.
template <class State>
ExtendedLevel compute_level(const ReplicaSystem<State>& sys, std::size_t k, const LevelStrategy& strategy,
                            Rng& rng) {
  return compute_level_detailed(sys, k, strategy, rng).level;
}

/// Partition at level Z, draw parents, compute weight factors.
template <class State>
BranchingPlan split_step(const ReplicaSystem<State>& sys, ExtendedLevel Z, Rng& rng,
                         const BranchingPolicy& policy = {}) {
  if (!Z.is_finite()) throw std::logic_error("split_step: level must be finite");
  BranchingPlan plan;
  plan.level = Z;
  std::vector<double> survivor_levels;
  survivor_levels.reserve(sys.working.size());
  plan.survivors.reserve(sys.working.size());
  plan.retired.reserve(sys.working.size());
  for (std::size_t i = 0; i < sys.working.size(); ++i) {
    const auto& lvl = sys.working[i].cached_max_level;
    if (lvl <= Z) {
      plan.retired.push_back(i);
    } else {
      plan.survivors.push_back(i);
      survivor_levels.push_back(lvl.value());
    }
  }
  if (plan.survivors.empty()) throw std::logic_error("split_step: no replica above the level (extinction)");

  const BranchingContext ctx{survivor_levels, plan.retired.size(), sys.working.size(), Z, sys.iteration};
  BranchingDecision d = policy ? policy(ctx, rng) : uniform_branching(ctx, rng);
  if (d.weight_factor.size() != plan.survivors.size())
    throw std::logic_error("branching policy: one weight factor per survivor required");
  for (double f : d.weight_factor)
    if (!(f > 0.0) || !std::isfinite(f)) throw std::logic_error("branching policy: weight factor must be positive");
  plan.child_parent.reserve(d.parents.size());
  for (std::size_t p : d.parents) {
    if (p >= plan.survivors.size()) throw std::logic_error("branching policy: parent index out of range");
    plan.child_parent.push_back(plan.survivors[p]);
  }
  plan.survivor_factor = std::move(d.weight_factor);
  return plan;
}

namespace detail {

enum class Kernel { strict, at_or_above };

template <class M>
concept HasInclusiveResample = requires(const M& m, const typename M::State& s, Rng& rng, double z) {
  { m.resample_at_or_above(s, z, rng) } -> std::same_as<typename M::State>;
};

template <ModelContract M>
void apply_plan(ReplicaSystem<typename M::State>& sys, const M& model, const BranchingPlan& plan,
                const GamsConfig& cfg, Rng& rng, Kernel kernel) {
  using State = typename M::State;
  const std::size_t q = sys.iteration;
  const double z = plan.level.value();

  // Survivors keep their state; their weight is divided by E[B].
  std::vector<double> updated_weight(sys.working.size(), 0.0);
  for (std::size_t s = 0; s < plan.survivors.size(); ++s) {
    const std::size_t i = plan.survivors[s];
    updated_weight[i] = sys.working[i].weight * plan.survivor_factor[s];
  }

  // Children, in label order.
  std::vector<Replica<State>> children;
  children.reserve(plan.child_parent.size());
  for (std::size_t i : plan.child_parent) {
    const auto& parent = sys.working[i];
    Replica<State> child;
    child.label = sys.next_label++;
    child.parent = parent.label;
    child.birth_iteration = q + 1;
    child.weight = updated_weight[i];
    try {
      if (kernel == Kernel::strict) {
        child.state = model.resample(parent.state, z, rng);
      } else {
        if constexpr (HasInclusiveResample<M>) {
          child.state = model.resample_at_or_above(parent.state, z, rng);
        } else {
          throw std::logic_error("model has no inclusive resampling kernel");
        }
      }
    } catch (const ModelError& e) {
      throw RunError(std::string("iteration ") + std::to_string(q) + ", resampling replica " +
                         std::to_string(child.label) + ": " + e.what(),
                     q, sys.k_history);
    }
    child.cached_max_level = ExtendedLevel(model.max_level(child.state));
    if (cfg.record_ancestry) {
      if (sys.parent_of.size() <= child.label) sys.parent_of.resize(child.label + 1, kNoParent);
      sys.parent_of[child.label] = parent.label;
    }
    children.push_back(std::move(child));
  }

  for (std::size_t i : plan.survivors) sys.working[i].weight = updated_weight[i];
  for (std::size_t i : plan.retired) {
    auto& r = sys.working[i];
    r.status = ReplicaStatus::retired;
    sys.retired_weight += r.weight;
    ++sys.retired_count;
    if (cfg.retain_retired) sys.retired.push_back(std::move(r));
  }
  // Children take the retired slots in ascending order; any surplus on
  // either side is appended or compacted away.
  const std::size_t shared = std::min(children.size(), plan.retired.size());
  for (std::size_t c = 0; c < shared; ++c) sys.working[plan.retired[c]] = std::move(children[c]);
  for (std::size_t c = shared; c < children.size(); ++c) sys.working.push_back(std::move(children[c]));
  if (plan.retired.size() > shared) {
    std::vector<bool> drop(sys.working.size(), false);
    for (std::size_t c = shared; c < plan.retired.size(); ++c) drop[plan.retired[c]] = true;
    std::size_t w = 0;
    for (std::size_t i = 0; i < sys.working.size(); ++i)
      if (!drop[i]) {
        if (w != i) sys.working[w] = std::move(sys.working[i]);
        ++w;
      }
    sys.working.resize(w);
  }
  sys.k_history.push_back(plan.K());
  sys.iteration = q + 1;
}

}  // namespace detail

/// Draw every child of `plan` from the model's level-Z kernel and commit the
/// new system. Survivors keep their positions; children fill the retired
/// positions in label order.
template <ModelContract M>
void resample_step(ReplicaSystem<typename M::State>& sys, const M& model, const BranchingPlan& plan,
                   const GamsConfig& cfg, Rng& rng) {
  detail::apply_plan(sys, model, plan, cfg, rng, detail::Kernel::strict);
}

template <class State>
double estimate_observable(std::span<const Replica<State>> replicas, const Observable<State>& phi) {
  double sum = 0.0;
  for (const auto& r : replicas) sum += r.weight * phi(r.state);
  return sum;
}

namespace detail {

// Split rules. `classical` is the unbiased algorithm; the other two are the
// deliberately biased demonstrations reachable only through ams::biased.
enum class SplitRule { classical, exactly_k_strict_parents, exactly_k_loose_parents };

template <class State>
BranchingPlan split_exactly_k(const ReplicaSystem<State>& sys, ExtendedLevel Z, std::size_t k, bool loose, Rng& rng) {
  const auto& w = sys.working;
  std::vector<std::size_t> order(w.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double la = w[a].cached_max_level.value(), lb = w[b].cached_max_level.value();
                      if (la != lb) return la < lb;
                      return w[a].label < w[b].label;
                    });
  std::vector<bool> retire(w.size(), false);
  for (std::size_t i = 0; i < k; ++i) retire[order[i]] = true;

  BranchingPlan plan;
  plan.level = Z;
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (retire[i]) {
      plan.retired.push_back(i);
    } else {
      plan.survivors.push_back(i);
      if (loose || w[i].cached_max_level > Z) eligible.push_back(i);
    }
  }
  if (eligible.empty()) throw std::logic_error("split: no eligible parent");
  for (std::size_t c = 0; c < k; ++c) plan.child_parent.push_back(eligible[rng.index(eligible.size())]);
  const double factor = static_cast<double>(w.size() - k) / static_cast<double>(w.size());
  plan.survivor_factor.assign(plan.survivors.size(), factor);
  return plan;
}

template <ModelContract M>
RunResult<typename M::State> run_engine(const M& model, const GamsConfig& cfg,
                                        const RunOptions<typename M::State>& opts, SplitRule rule, Rng& rng) {
  using State = typename M::State;
  cfg.validate();
  ReplicaSystem<State> sys = initialize_system(model, cfg, rng);
  RunResult<State> res;

  auto level = compute_level_detailed(sys, cfg.k, cfg.level_strategy, rng);
  sys.current_level = level.level;
  res.levels.push_back(level.level.value());
  res.per_iteration_weight_sums.push_back(sys.total_weight());
  if (opts.observer) opts.observer(sys);

  const ExtendedLevel z_max(cfg.z_max);
  auto keep_going = [&] {
    if (sys.current_level.is_plus_infinity()) return false;
    if (opts.fixed_iterations) return sys.iteration < *opts.fixed_iterations;
    return !(sys.current_level > z_max);
  };

  while (keep_going()) {
    if (sys.iteration >= cfg.max_iterations) {
      throw RunError("iteration cap of " + std::to_string(cfg.max_iterations) +
                         " reached; check z_max or look for a trap state",
                     sys.iteration, sys.k_history);
    }
    BranchingPlan plan;
    Kernel kernel = Kernel::strict;
    switch (rule) {
      case SplitRule::classical:
        plan = split_step(sys, sys.current_level, rng, opts.policy);
        break;
      case SplitRule::exactly_k_strict_parents:
        plan = split_exactly_k(sys, sys.current_level, cfg.k, false, rng);
        break;
      case SplitRule::exactly_k_loose_parents:
        plan = split_exactly_k(sys, sys.current_level, cfg.k, true, rng);
        kernel = Kernel::at_or_above;
        break;
    }
    apply_plan(sys, model, plan, cfg, rng, kernel);

    level = compute_level_detailed(sys, cfg.k, cfg.level_strategy, rng);
    sys.current_level = level.level;
    res.levels.push_back(level.level.value());
    res.per_iteration_weight_sums.push_back(sys.total_weight());
    if (opts.observer) opts.observer(sys);
  }

  // Extinction proper: the +inf rule fired while the k-th order statistic was
  // still at or below z_max. Above z_max the run would have stopped anyway.
  const bool fixed = opts.fixed_iterations.has_value();
  res.extinct = level.level.is_plus_infinity() && (fixed || level.candidate <= z_max);
  res.q_iter = sys.iteration;
  res.k_history = sys.k_history;

  std::size_t hits = 0;
  double p_hat = 0.0;
  res.final_working.reserve(sys.working.size());
  res.final_states.reserve(sys.working.size());
  for (auto& r : sys.working) {
    const bool hit = model.in_target(r.state);
    if (hit) {
      ++hits;
      p_hat += r.weight;
    }
    Label root = r.label;
    if (cfg.record_ancestry)
      while (sys.parent_of[root] != kNoParent) root = sys.parent_of[root];
    res.final_working.push_back({r.label, r.cached_max_level, r.weight, hit, root});
  }
  for (const auto& r : sys.retired)
    if (model.in_target(r.state)) p_hat += r.weight;
  res.p_corr = static_cast<double>(hits) / static_cast<double>(sys.working.size());
  if ((opts.policy && rule == SplitRule::classical) || fixed) {
    // Weighted sum; with a fixed iteration count retired replicas may be in
    // the target too (pass retain_retired to count them).
    res.p_hat = p_hat;
  } else {
    // Product form: prod_j (n - K_j)/n times the corrector. The biased rules
    // record K_j = k, giving ((n - k)/n)^Q_iter.
    double prod = 1.0;
    for (std::size_t K : sys.k_history)
      prod *= static_cast<double>(cfg.n_rep - K) / static_cast<double>(cfg.n_rep);
    res.p_hat = prod * res.p_corr;
  }

  if (opts.observable) {
    double phi = estimate_observable<State>(sys.working, *opts.observable);
    phi += estimate_observable<State>(sys.retired, *opts.observable);
    res.phi_hat = phi;
  }

  for (auto& r : sys.working) res.final_states.push_back(std::move(r.state));
  res.retired = std::move(sys.retired);
  res.ancestry_recorded = cfg.record_ancestry;
  res.parent_of = std::move(sys.parent_of);
  return res;
}

}  // namespace detail

/// One realization of adaptive multilevel splitting.
template <ModelContract M>
RunResult<typename M::State> run_ams(const M& model, const GamsConfig& cfg, Rng& rng,
                                     const RunOptions<typename M::State>& opts = {}) {
  return detail::run_engine(model, cfg, opts, detail::SplitRule::classical, rng);
}

}  // namespace ams
