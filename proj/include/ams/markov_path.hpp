#pragma once

// Stopped Markov-chain paths as splitting states.
//
// A path starts at x0 and runs the transition kernel until it enters A (or,
// with stop_in_B, until it enters B). Levels come from a reaction coordinate
// xi; the entrance time T_z is the first index with xi > z (strict), and the
// level-z kernel copies a parent through T_z inclusive before continuing.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ams/model.hpp"
#include "ams/random.hpp"

namespace ams {

template <std::size_t D>
using Point = std::array<double, D>;

/// Which side of a dividing line a reactive path crossed on. A path belongs
/// to the upper channel if, at the first index where coordinate
/// `crossing_axis` exceeds `crossing_threshold`, coordinate `split_axis` is
/// strictly above `split_threshold`; otherwise to the lower channel.
struct ChannelSpec {
  std::size_t crossing_axis = 0;
  double crossing_threshold = 0.0;
  std::size_t split_axis = 1;
  double split_threshold = 0.5;
};

template <std::size_t D>
struct StoppedPath {
  std::vector<Point<D>> states;
  std::vector<double> xi;  // xi(states[t])
  bool stopped_in_A = false;
  bool stopped_in_B = false;

  std::size_t length() const noexcept { return states.size(); }
  bool operator==(const StoppedPath&) const = default;
};

template <std::size_t D>
struct ChainModel {
  std::string name;
  std::function<Point<D>(const Point<D>&, Rng&)> transition;
  Point<D> x0{};
  std::function<bool(const Point<D>&)> region_A;
  std::function<bool(const Point<D>&)> region_B;
  std::function<double(const Point<D>&)> xi;
  double z_max = 0.0;
  std::size_t path_cap = 100'000;
  // Stop on entering B as well as A. Levels above z_max never matter to the
  // algorithm, and metastable B regions would otherwise trap paths.
  bool stop_in_B = true;
  std::optional<ChannelSpec> channel;

  void validate() const {
    if (!transition || !region_A || !region_B || !xi) throw std::invalid_argument(name + ": incomplete model");
    if (region_A(x0) || region_B(x0)) throw std::invalid_argument(name + ": x0 must lie outside A and B");
    if (path_cap < 2) throw std::invalid_argument(name + ": path_cap must be at least 2");
  }
};

namespace detail {

// Appends states until the path stops. Checks that every state of B lies
// strictly above z_max.
template <std::size_t D>
void extend_path(StoppedPath<D>& path, const ChainModel<D>& model, Rng& rng) {
  while (true) {
    const Point<D>& last = path.states.back();
    if (model.region_A(last)) {
      path.stopped_in_A = true;
      return;
    }
    if (model.region_B(last)) {
      if (!(path.xi.back() > model.z_max))
        throw ModelError(model.name + ": state in B with xi <= z_max (reaction coordinate incompatible with B)");
      if (model.stop_in_B) {
        path.stopped_in_B = true;
        return;
      }
    }
    if (path.states.size() >= model.path_cap)
      throw ModelError(model.name + ": path cap of " + std::to_string(model.path_cap) +
                       " states reached before entering A");
    Point<D> next = model.transition(last, rng);
    path.xi.push_back(model.xi(next));
    path.states.push_back(next);
  }
}

}  // namespace detail

/// Run the chain from `from_state` until it stops. Throws ModelError when the
/// path cap is reached first.
template <std::size_t D>
StoppedPath<D> simulate_path(const ChainModel<D>& model, const Point<D>& from_state, Rng& rng) {
  if (model.region_A(from_state)) throw std::invalid_argument(model.name + ": start state lies in A");
  StoppedPath<D> path;
  path.states.push_back(from_state);
  path.xi.push_back(model.xi(from_state));
  detail::extend_path(path, model, rng);
  return path;
}

/// First index t with xi_t > z; nullopt stands for +inf.
inline std::optional<std::size_t> entrance_time(std::span<const double> xi_values, double z) {
  for (std::size_t t = 0; t < xi_values.size(); ++t)
    if (xi_values[t] > z) return t;
  return std::nullopt;
}

template <std::size_t D>
std::optional<std::size_t> entrance_time(const StoppedPath<D>& path, double z) {
  return entrance_time(std::span<const double>(path.xi), z);
}

/// First index t with xi_t >= z. Only the biased demonstration uses this.
inline std::optional<std::size_t> entrance_time_at_or_above(std::span<const double> xi_values, double z) {
  for (std::size_t t = 0; t < xi_values.size(); ++t)
    if (xi_values[t] >= z) return t;
  return std::nullopt;
}

inline double max_level(std::span<const double> xi_values) {
  if (xi_values.empty()) return -std::numeric_limits<double>::infinity();
  return *std::max_element(xi_values.begin(), xi_values.end());
}

template <std::size_t D>
double max_level(const StoppedPath<D>& path) {
  return max_level(std::span<const double>(path.xi));
}

namespace detail {

template <std::size_t D>
StoppedPath<D> copy_prefix(const StoppedPath<D>& parent, std::size_t last_index) {
  StoppedPath<D> child;
  child.states.reserve(parent.states.size());
  child.xi.reserve(parent.xi.size());
  child.states.assign(parent.states.begin(), parent.states.begin() + static_cast<std::ptrdiff_t>(last_index + 1));
  child.xi.assign(parent.xi.begin(), parent.xi.begin() + static_cast<std::ptrdiff_t>(last_index + 1));
  return child;
}

}  // namespace detail

/// Level-z resampling kernel: copy through T_z(parent) inclusive, then run the
/// chain from that state. Returns the parent itself when T_z = +inf.
template <std::size_t D>
StoppedPath<D> branch_resample(const StoppedPath<D>& parent, double z, const ChainModel<D>& model, Rng& rng) {
  const auto t = entrance_time(parent, z);
  if (!t) return parent;
  StoppedPath<D> child = detail::copy_prefix(parent, *t);
  detail::extend_path(child, model, rng);
  return child;
}

/// True iff the path visits B strictly before it enters A.
template <std::size_t D>
bool reached_B_before_A(const StoppedPath<D>& path, const ChainModel<D>& model) {
  for (const auto& x : path.states) {
    if (model.region_A(x)) return false;
    if (model.region_B(x)) return true;
  }
  return false;
}

/// Debug/trace dump: one line per state, "time coord... xi".
template <std::size_t D>
void write_path(std::ostream& out, const StoppedPath<D>& path, double dt = 1.0) {
  for (std::size_t t = 0; t < path.states.size(); ++t) {
    out << static_cast<double>(t) * dt;
    for (double c : path.states[t]) out << ' ' << c;
    out << ' ' << path.xi[t] << '\n';
  }
}

/// Adapter that lets the splitting engine drive a ChainModel.
template <std::size_t D>
class PathModel {
 public:
  using State = StoppedPath<D>;

  explicit PathModel(ChainModel<D> chain) : chain_(std::move(chain)) { chain_.validate(); }

  const ChainModel<D>& chain() const noexcept { return chain_; }

  State sample_initial(Rng& rng) const { return simulate_path(chain_, chain_.x0, rng); }
  double max_level(const State& s) const { return ams::max_level(s); }
  State resample(const State& s, double z, Rng& rng) const { return branch_resample(s, z, chain_, rng); }
  bool in_target(const State& s) const { return s.stopped_in_B || reached_B_before_A(s, chain_); }

  bool prefix_equal(const State& a, const State& b, double z) const {
    const auto t = entrance_time(a, z);
    const std::size_t n = t ? *t + 1 : a.length();
    if (b.length() < n) return false;
    return std::equal(a.states.begin(), a.states.begin() + static_cast<std::ptrdiff_t>(n), b.states.begin());
  }

  // Branching at the first index with xi >= z. Biased on purpose; reachable
  // only through ams::biased.
  State resample_at_or_above(const State& s, double z, Rng& rng) const {
    const auto t = entrance_time_at_or_above(std::span<const double>(s.xi), z);
    if (!t) return s;
    State child = detail::copy_prefix(s, *t);
    detail::extend_path(child, chain_, rng);
    return child;
  }

 private:
  ChainModel<D> chain_;
};

}  // namespace ams
