#include "ams/variants.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ams {

void fill_bridge(std::span<double> values, std::size_t from, Rng& rng) {
  const std::size_t kappa = values.size();
  for (std::size_t i = from; i < kappa; ++i) {
    const double a = i == 0 ? 0.0 : values[i - 1];
    const double d = static_cast<double>(kappa + 1 - i);
    values[i] = a - a / d + std::sqrt((d - 1.0) / d) * rng.gaussian();
  }
}

BridgeModel::BridgeModel(std::size_t kappa, double z_max) : kappa_(kappa), z_max_(z_max) {
  if (kappa == 0) throw std::invalid_argument("bridge: kappa must be at least 1");
  if (std::isnan(z_max)) throw std::invalid_argument("bridge: z_max is NaN");
}

BridgeState BridgeModel::sample_initial(Rng& rng) const {
  BridgeState s;
  s.values.assign(kappa_, 0.0);
  fill_bridge(s.values, 0, rng);
  return s;
}

double BridgeModel::max_level(const State& s) const {
  return *std::max_element(s.values.begin(), s.values.end());
}

BridgeState BridgeModel::resample(const State& s, double z, Rng& rng) const {
  const auto t = entrance_time(std::span<const double>(s.values), z);
  if (!t) return s;
  BridgeState child = s;
  fill_bridge(child.values, *t + 1, rng);
  return child;
}

bool BridgeModel::prefix_equal(const State& a, const State& b, double z) const {
  if (a.kappa() != b.kappa()) return false;
  const auto t = entrance_time(std::span<const double>(a.values), z);
  const std::size_t n = t ? *t + 1 : a.kappa();
  return std::equal(a.values.begin(), a.values.begin() + static_cast<std::ptrdiff_t>(n), b.values.begin());
}

BridgeModel bridge_model(std::size_t kappa, double z_max) { return BridgeModel(kappa, z_max); }

}  // namespace ams
