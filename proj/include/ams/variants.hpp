#pragma once

// Algorithmic variants of the splitting engine:
//   - a path kernel that resamples exactly k replicas per iteration by
//     redrawing the branch point conditionally on crossing the level;
//   - a static Gaussian-bridge model;
//   - two deliberately biased splitting rules, kept in ams::biased.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ams/gams.hpp"
#include "ams/markov_path.hpp"
#include "ams/random.hpp"

namespace ams {

// ---------------------------------------------------------------------------
// Exactly-k resampling

/// Copy indices 0..T_z-1 of the parent, draw the state at T_z from the
/// transition kernel conditioned on xi > z (by rejection), then run freely.
/// Requires T_z(parent) < +inf.
template <std::size_t D>
StoppedPath<D> exact_k_resample(const StoppedPath<D>& parent, double z, const ChainModel<D>& model, Rng& rng,
                                std::uint64_t max_attempts = 1'000'000) {
  const auto t = entrance_time(parent, z);
  if (!t) throw std::invalid_argument("exact_k_resample: parent never exceeds the level");
  if (*t == 0) {
    // The deterministic start is already above z; nothing to redraw.
    return branch_resample(parent, z, model, rng);
  }
  StoppedPath<D> child = detail::copy_prefix(parent, *t - 1);
  const Point<D> from = child.states.back();
  for (std::uint64_t attempt = 0; attempt < max_attempts; ++attempt) {
    Point<D> y = model.transition(from, rng);
    const double level = model.xi(y);
    if (level > z) {
      child.states.push_back(y);
      child.xi.push_back(level);
      detail::extend_path(child, model, rng);
      return child;
    }
  }
  throw ModelError(model.name + ": rejection sampling above level " + std::to_string(z) + " exceeded " +
                   std::to_string(max_attempts) + " attempts");
}

template <std::size_t D>
class ExactKPathModel {
 public:
  using State = StoppedPath<D>;

  explicit ExactKPathModel(ChainModel<D> chain, std::uint64_t max_attempts = 1'000'000)
      : chain_(std::move(chain)), max_attempts_(max_attempts) {
    chain_.validate();
  }

  const ChainModel<D>& chain() const noexcept { return chain_; }

  State sample_initial(Rng& rng) const { return simulate_path(chain_, chain_.x0, rng); }
  double max_level(const State& s) const { return ams::max_level(s); }
  bool in_target(const State& s) const { return s.stopped_in_B || reached_B_before_A(s, chain_); }

  State resample(const State& s, double z, Rng& rng) const {
    if (!entrance_time(s, z)) return s;
    return exact_k_resample(s, z, chain_, rng, max_attempts_);
  }

  // The shared prefix stops one index before T_z.
  bool prefix_equal(const State& a, const State& b, double z) const {
    const auto t = entrance_time(a, z);
    const std::size_t n = t ? (*t == 0 ? 1 : *t) : a.length();
    if (b.length() < n) return false;
    return std::equal(a.states.begin(), a.states.begin() + static_cast<std::ptrdiff_t>(n), b.states.begin());
  }

 private:
  ChainModel<D> chain_;
  std::uint64_t max_attempts_;
};

// ---------------------------------------------------------------------------
// Gaussian bridge

/// (x_1, ..., x_kappa) of a Gaussian random walk pinned at 0 on both ends.
struct BridgeState {
  std::vector<double> values;
  std::size_t kappa() const noexcept { return values.size(); }
  bool operator==(const BridgeState&) const = default;
};

/// Overwrite values[from..kappa) with a bridge draw pinned at values[from-1]
/// (0 when from == 0) and at 0 after the last point. Uses the sequential
/// conditionals X_i | X_{i-1} = a ~ N(a - a/d, (d - 1)/d), d = increments left.
void fill_bridge(std::span<double> values, std::size_t from, Rng& rng);

/// Discrete Brownian bridge of kappa interior points. Level of a state is
/// max_i x_i; T_z is the first i with x_i > z; the level-z kernel keeps
/// x_1..x_{T_z} and redraws the rest from the bridge pinned at (x_{T_z}, 0).
class BridgeModel {
 public:
  using State = BridgeState;

  BridgeModel(std::size_t kappa, double z_max);

  std::size_t kappa() const noexcept { return kappa_; }
  double z_max() const noexcept { return z_max_; }

  State sample_initial(Rng& rng) const;
  double max_level(const State& s) const;
  State resample(const State& s, double z, Rng& rng) const;
  bool prefix_equal(const State& a, const State& b, double z) const;
  bool in_target(const State& s) const { return max_level(s) > z_max_; }

 private:
  std::size_t kappa_;
  double z_max_;
};

BridgeModel bridge_model(std::size_t kappa, double z_max);

// ---------------------------------------------------------------------------
// Biased demonstrations

namespace biased {

/// version1: retire exactly the k lowest (ties by label), never branch from a
///           replica sitting exactly at the level, weight factor (n - k)/n.
/// version2: as version1, but parents may sit at the level and branching
///           happens at the first index with xi >= z.
/// Both estimate p by ((n - k)/n)^Q_iter times the corrector. Neither is
/// unbiased; they exist to show what goes wrong when ties are mishandled.
enum class Version { version1, version2 };

template <std::size_t D>
RunResult<StoppedPath<D>> run_biased(const PathModel<D>& model, const GamsConfig& cfg, Version kind, Rng& rng) {
  const auto rule = kind == Version::version1 ? detail::SplitRule::exactly_k_strict_parents
                                              : detail::SplitRule::exactly_k_loose_parents;
  return detail::run_engine(model, cfg, RunOptions<StoppedPath<D>>{}, rule, rng);
}

}  // namespace biased

}  // namespace ams
