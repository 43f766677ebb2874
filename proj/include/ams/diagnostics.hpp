#pragma once

// Reductions over independent runs: empirical means with 95% interval
// widths, heavy-tail partial averages, channel statistics for two-channel
// problems, and ancestry degeneracy.

#include <cmath>
#include <algorithm>
#include <cstddef>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <vector>

#include "ams/gams.hpp"
#include "ams/markov_path.hpp"

namespace ams::diagnostics {

struct Aggregate {
  std::size_t n_runs = 0;
  double mean = 0.0;
  // delta_N = 2 * 1.96 / sqrt(N) * sqrt(mean of squares - squared mean);
  // the 95% interval is [mean - delta/2, mean + delta/2].
  double ci_width = 0.0;
  double min = 0.0;
  double max = 0.0;

  double lower() const noexcept { return mean - 0.5 * ci_width; }
  double upper() const noexcept { return mean + 0.5 * ci_width; }
  bool contains(double x) const noexcept { return lower() <= x && x <= upper(); }
};

/// Mean and 95% interval width of `values` (N >= 2), summed in index order.
Aggregate aggregate(std::span<const double> values);

/// True iff the two 95% intervals intersect.
bool overlap(const Aggregate& a, const Aggregate& b);

struct PartialAverages {
  double large = 0.0;  // mean of the n0 largest values
  double small = 0.0;  // mean of the other N - n0 values
};

/// Order-statistics split; mean = (n0/N) large + (1 - n0/N) small.
PartialAverages partial_averages(std::span<const double> values, std::size_t n0);

struct TracePoint {
  std::size_t n = 0;
  double mean = 0.0;
  double ci_width = 0.0;
};

/// Running mean and interval width at logarithmically spaced prefix sizes
/// (`per_decade` points per decade, always including N).
std::vector<TracePoint> convergence_trace(std::span<const double> values, std::size_t per_decade = 10);

enum class Channel { upper, lower, not_crossed };

/// Classify by the first index where the crossing coordinate exceeds its
/// threshold: upper if the split coordinate is > its threshold there, lower
/// if it is <= (large inequality on the lower side).
template <std::size_t D>
Channel classify_channel(const StoppedPath<D>& path, const ChannelSpec& spec) {
  static_assert(D >= 2, "channel classification needs at least two coordinates");
  for (const auto& x : path.states) {
    if (x[spec.crossing_axis] > spec.crossing_threshold)
      return x[spec.split_axis] > spec.split_threshold ? Channel::upper : Channel::lower;
  }
  return Channel::not_crossed;
}

/// Per-run quantities behind the channel statistics.
struct ChannelRecord {
  double p_hat = 0.0;
  std::size_t m_b = 0;        // final working replicas reaching B before A
  std::size_t m_b_upper = 0;
  std::size_t m_b_lower = 0;
  double p_upper = 0.0;       // sum of weights over B-reaching upper replicas
  double p_lower = 0.0;       // p_hat - p_upper
};

template <std::size_t D>
ChannelRecord channel_record(const RunResult<StoppedPath<D>>& run, const ChannelSpec& spec) {
  ChannelRecord rec;
  rec.p_hat = run.p_hat;
  for (std::size_t i = 0; i < run.final_working.size(); ++i) {
    const auto& r = run.final_working[i];
    if (!r.reached_target) continue;
    ++rec.m_b;
    // A path reaching B has crossed; not_crossed is counted as lower so that
    // M_B = M_B_upper + M_B_lower always holds.
    if (classify_channel(run.final_states[i], spec) == Channel::upper) {
      ++rec.m_b_upper;
      rec.p_upper += r.weight;
    } else {
      ++rec.m_b_lower;
    }
  }
  // p_upper is rounded to a multiple of the ulp of p_hat; its complement is
  // then exact, so p_upper + p_lower == p_hat holds in floating point.
  if (rec.m_b_lower == 0) {
    rec.p_upper = rec.p_hat;
  } else if (rec.m_b_upper == 0) {
    rec.p_lower = rec.p_hat;
  } else {
    const double u = rec.p_hat - std::nextafter(rec.p_hat, 0.0);
    rec.p_upper = std::min(std::nearbyint(rec.p_upper / u) * u, rec.p_hat);
    rec.p_lower = rec.p_hat - rec.p_upper;
  }
  return rec;
}

struct ChannelStats {
  std::size_t n_runs = 0;
  std::size_t n_nonzero = 0;
  double R_N = 0.0;
  double rho_upper = 0.0;
  double rho_lower = 0.0;
  double rho_mix = 0.0;
  // Conditional means; NaN when the class is empty.
  double p_tilde_upper = std::numeric_limits<double>::quiet_NaN();
  double p_tilde_lower = std::numeric_limits<double>::quiet_NaN();
  double p_tilde_mix = std::numeric_limits<double>::quiet_NaN();
  double p_bar = 0.0;
  Aggregate upper;  // aggregate of the per-run p_upper
  Aggregate lower;  // aggregate of the per-run p_lower

  /// R_N (rho_up p~_up + rho_low p~_low + rho_mix p~_mix), empty classes
  /// contributing zero.
  double recombined() const;
};

ChannelStats channel_stats(std::span<const ChannelRecord> runs);

/// Number of distinct initial ancestors among the final working replicas.
template <class State>
std::size_t ancestry_report(const RunResult<State>& run) {
  if (!run.ancestry_recorded) throw std::logic_error("ancestry_report: ancestry was not recorded");
  std::set<Label> roots;
  for (const auto& r : run.final_working) {
    Label l = r.label;
    while (run.parent_of.at(l) != kNoParent) l = run.parent_of[l];
    roots.insert(l);
  }
  return roots.size();
}

}  // namespace ams::diagnostics
