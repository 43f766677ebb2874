#pragma once

// Ground truth for validating the splitting estimators. Nothing here shares
// sampling code with the engine or with the models' resampling kernels: the
// direct Monte Carlo walks the transition kernel on its own, and the bridge
// sampler factorizes the joint precision matrix instead of sampling
// sequentially.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ams/markov_path.hpp"
#include "ams/parallel.hpp"
#include "ams/random.hpp"
#include "ams/variants.hpp"

namespace ams::oracle {

struct OracleResult {
  double value = 0.0;
  double standard_error = 0.0;  // zero for closed forms
  std::string method;
  std::uint64_t samples = 0;
  std::uint64_t hits = 0;
  bool degenerate = false;  // zero hits: the error bar is meaningless

  double ci_width() const noexcept { return 2.0 * 1.96 * standard_error; }
};

/// P(reach L before 0) for the walk started at `start` with up-probability
/// p_up: (1 - r^start) / (1 - r^L), r = (1 - p_up)/p_up, and start/L when
/// p_up = 1/2.
double gamblers_ruin_exact(double p_up, int start, int L);

namespace detail {

struct PathOutcome {
  bool reached_B = false;
  double max_xi = 0.0;
};

template <std::size_t D>
PathOutcome walk(const ChainModel<D>& model, Rng& rng) {
  Point<D> x = model.x0;
  PathOutcome out{false, model.xi(x)};
  for (std::size_t t = 1;; ++t) {
    if (model.region_A(x)) return out;
    if (model.region_B(x)) {
      out.reached_B = true;
      if (model.stop_in_B) return out;
    }
    if (t >= model.path_cap) throw ModelError(model.name + ": path cap reached in direct Monte Carlo");
    x = model.transition(x, rng);
    out.max_xi = std::max(out.max_xi, model.xi(x));
  }
}

inline OracleResult binomial(std::uint64_t hits, std::uint64_t n, std::string method) {
  OracleResult r;
  r.method = std::move(method);
  r.samples = n;
  r.hits = hits;
  r.value = static_cast<double>(hits) / static_cast<double>(n);
  r.standard_error = std::sqrt(r.value * (1.0 - r.value) / static_cast<double>(n));
  r.degenerate = hits == 0;
  return r;
}

}  // namespace detail

/// Fraction of independent paths that reach B before A.
template <std::size_t D>
OracleResult direct_mc(const ChainModel<D>& model, std::uint64_t n_samples, Rng& rng) {
  std::uint64_t hits = 0;
  for (std::uint64_t i = 0; i < n_samples; ++i) hits += detail::walk(model, rng).reached_B ? 1 : 0;
  return detail::binomial(hits, n_samples, "direct-mc");
}

/// Fraction of independent paths whose maximum level exceeds `level`.
template <std::size_t D>
OracleResult direct_mc_level(const ChainModel<D>& model, double level, std::uint64_t n_samples, Rng& rng) {
  std::uint64_t hits = 0;
  for (std::uint64_t i = 0; i < n_samples; ++i) hits += detail::walk(model, rng).max_xi > level ? 1 : 0;
  return detail::binomial(hits, n_samples, "direct-mc-level");
}

/// Sharded direct Monte Carlo: shard s uses stream derive_seed(seed, salt, s)
/// and shards are reduced in index order, so the result does not depend on
/// `jobs`.
template <std::size_t D>
OracleResult direct_mc_parallel(const ChainModel<D>& model, std::uint64_t n_samples, std::uint64_t seed,
                                std::uint64_t salt, unsigned jobs, std::uint64_t shard_size = 100'000) {
  if (shard_size == 0) shard_size = 1;
  const std::uint64_t shards = (n_samples + shard_size - 1) / shard_size;
  std::vector<std::uint64_t> hits(shards, 0);
  parallel_for_index(shards, jobs, [&](std::size_t s) {
    Rng rng(derive_seed(seed, salt, s));
    const std::uint64_t count = std::min<std::uint64_t>(shard_size, n_samples - s * shard_size);
    hits[s] = direct_mc(model, count, rng).hits;
  });
  std::uint64_t total = 0;
  for (auto h : hits) total += h;
  return detail::binomial(total, n_samples, "direct-mc");
}

/// Exact joint sampler of the discrete bridge: draws N(0, Q^{-1}) where Q is
/// tridiagonal with 2 on the diagonal and -1 beside it, via Q = L L^T.
class DenseBridgeSampler {
 public:
  explicit DenseBridgeSampler(std::size_t kappa);

  std::size_t kappa() const noexcept { return kappa_; }
  BridgeState sample(Rng& rng) const;
  Eigen::MatrixXd covariance() const;

 private:
  std::size_t kappa_;
  Eigen::MatrixXd lower_;  // Cholesky factor of the precision
};

BridgeState dense_bridge_sampler(std::size_t kappa, Rng& rng);

/// P(max_i x_i > z) for the bridge by direct sampling with the dense sampler.
OracleResult bridge_exceedance_mc(std::size_t kappa, double z, std::uint64_t n_samples, Rng& rng);

}  // namespace ams::oracle
