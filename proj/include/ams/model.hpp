#pragma once

#include <concepts>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "ams/random.hpp"

namespace ams {

/// What a rare-event model provides to the splitting engine.
///
///  - sample_initial: one draw from the target law.
///  - max_level: the maximum level of a state (may be +inf).
///  - resample: draw from the level-z resampling kernel. The result must agree
///    with the input up to the branching point (prefix_equal), and must equal
///    the input when max_level(s) <= z.
///  - prefix_equal: testing hook for the prefix-copy invariant.
///  - in_target: indicator of the rare event, used for the probability
///    estimator and the corrector term.
template <class M>
concept ModelContract = requires(const M& m, const typename M::State& s, Rng& rng, double z) {
  typename M::State;
  { m.sample_initial(rng) } -> std::same_as<typename M::State>;
  { m.max_level(s) } -> std::convertible_to<double>;
  { m.resample(s, z, rng) } -> std::same_as<typename M::State>;
  { m.prefix_equal(s, s, z) } -> std::convertible_to<bool>;
  { m.in_target(s) } -> std::convertible_to<bool>;
};

/// A model could not produce a state (path cap breached, rejection cap hit...).
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A run aborted. Carries the iteration reached and the K sequence so far.
class RunError : public std::runtime_error {
 public:
  RunError(const std::string& what, std::size_t iteration, std::vector<std::size_t> k_history)
      : std::runtime_error(what), iteration_(iteration), k_history_(std::move(k_history)) {}

  std::size_t iteration() const noexcept { return iteration_; }
  const std::vector<std::size_t>& k_history() const noexcept { return k_history_; }

 private:
  std::size_t iteration_;
  std::vector<std::size_t> k_history_;
};

}  // namespace ams
