#include "ams/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace ams::diagnostics {

Aggregate aggregate(std::span<const double> values) {
  if (values.size() < 2) throw std::invalid_argument("aggregate: need at least two values");
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  Aggregate a;
  a.n_runs = values.size();
  a.min = values.front();
  a.max = values.front();
  for (double v : values) {
    sum += v;
    a.min = std::min(a.min, v);
    a.max = std::max(a.max, v);
  }
  a.mean = std::clamp(sum / n, a.min, a.max);
  // Mean of squares minus squared mean, evaluated as the centred second moment.
  double var = 0.0;
  if (a.min != a.max) {
    for (double v : values) var += (v - a.mean) * (v - a.mean);
    var /= n;
  }
  a.ci_width = 2.0 * 1.96 / std::sqrt(n) * std::sqrt(var);
  return a;
}

bool overlap(const Aggregate& a, const Aggregate& b) {
  return a.lower() <= b.upper() && b.lower() <= a.upper();
}

PartialAverages partial_averages(std::span<const double> values, std::size_t n0) {
  const std::size_t n = values.size();
  if (n0 == 0 || n0 >= n) throw std::invalid_argument("partial_averages: need 0 < N0 < N");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double small = 0.0, large = 0.0;
  for (std::size_t i = 0; i < n - n0; ++i) small += sorted[i];
  for (std::size_t i = n - n0; i < n; ++i) large += sorted[i];
  return {large / static_cast<double>(n0), small / static_cast<double>(n - n0)};
}

std::vector<TracePoint> convergence_trace(std::span<const double> values, std::size_t per_decade) {
  std::vector<TracePoint> out;
  if (values.size() < 2 || per_decade == 0) return out;
  std::vector<std::size_t> checkpoints;
  const double step = std::pow(10.0, 1.0 / static_cast<double>(per_decade));
  for (double x = 2.0; x < static_cast<double>(values.size()); x *= step) {
    const auto c = static_cast<std::size_t>(std::llround(x));
    if (checkpoints.empty() || c > checkpoints.back()) checkpoints.push_back(c);
  }
  if (checkpoints.empty() || checkpoints.back() != values.size()) checkpoints.push_back(values.size());

  double sum = 0.0, sum_sq = 0.0;
  std::size_t next = 0;
  for (std::size_t i = 0; i < values.size() && next < checkpoints.size(); ++i) {
    sum += values[i];
    sum_sq += values[i] * values[i];
    if (i + 1 == checkpoints[next]) {
      const double n = static_cast<double>(i + 1);
      const double mean = sum / n;
      const double var = std::max(0.0, sum_sq / n - mean * mean);
      out.push_back({i + 1, mean, 2.0 * 1.96 / std::sqrt(n) * std::sqrt(var)});
      ++next;
    }
  }
  return out;
}

double ChannelStats::recombined() const {
  auto term = [](double rho, double p) { return rho > 0.0 ? rho * p : 0.0; };
  return R_N * (term(rho_upper, p_tilde_upper) + term(rho_lower, p_tilde_lower) + term(rho_mix, p_tilde_mix));
}

ChannelStats channel_stats(std::span<const ChannelRecord> runs) {
  ChannelStats s;
  s.n_runs = runs.size();
  if (runs.empty()) return s;
  std::size_t n_up = 0, n_low = 0, n_mix = 0;
  double sum_up = 0.0, sum_low = 0.0, sum_mix = 0.0, sum = 0.0;
  std::vector<double> p_upper, p_lower;
  p_upper.reserve(runs.size());
  p_lower.reserve(runs.size());
  for (const auto& r : runs) {
    sum += r.p_hat;
    p_upper.push_back(r.p_upper);
    p_lower.push_back(r.p_lower);
    if (r.p_hat == 0.0) continue;
    ++s.n_nonzero;
    if (r.m_b_lower == 0) {
      ++n_up;
      sum_up += r.p_hat;
    } else if (r.m_b_upper == 0) {
      ++n_low;
      sum_low += r.p_hat;
    } else {
      ++n_mix;
      sum_mix += r.p_hat;
    }
  }
  const double n = static_cast<double>(runs.size());
  s.p_bar = sum / n;
  s.R_N = static_cast<double>(s.n_nonzero) / n;
  if (s.n_nonzero > 0) {
    const double e = static_cast<double>(s.n_nonzero);
    s.rho_upper = static_cast<double>(n_up) / e;
    s.rho_lower = static_cast<double>(n_low) / e;
    s.rho_mix = static_cast<double>(n_mix) / e;
  }
  if (n_up) s.p_tilde_upper = sum_up / static_cast<double>(n_up);
  if (n_low) s.p_tilde_lower = sum_low / static_cast<double>(n_low);
  if (n_mix) s.p_tilde_mix = sum_mix / static_cast<double>(n_mix);
  if (runs.size() >= 2) {
    s.upper = aggregate(p_upper);
    s.lower = aggregate(p_lower);
  }
  return s;
}

}  // namespace ams::diagnostics
