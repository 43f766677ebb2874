#pragma once

// Overdamped Langevin test problems discretized with Euler-Maruyama, plus a
// gambler's-ruin walk used as an exactly solvable chain.

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>

#include "ams/markov_path.hpp"
#include "ams/random.hpp"

namespace ams::dynamics {

/// E(x) = mu x: the constant-drift potential of drifted Brownian motion.
struct LinearPotential {
  static constexpr std::size_t dimension = 1;
  double mu = 1.0;
  double value(const Point<1>& p) const { return mu * p[0]; }
  Point<1> gradient(const Point<1>&) const { return {mu}; }
};

/// E(x) = x^2 / 2.
struct QuadraticPotential {
  static constexpr std::size_t dimension = 1;
  double value(const Point<1>& p) const { return 0.5 * p[0] * p[0]; }
  Point<1> gradient(const Point<1>& p) const { return {p[0]}; }
};

/// Two global minima near (-1, 0) and (1, 0) joined by an upper channel
/// (shallow minimum near (0, 1.5)) and a lower channel (saddle near (0, -0.5)).
struct BiChannelPotential {
  static constexpr std::size_t dimension = 2;
  double value(const Point<2>& p) const;
  Point<2> gradient(const Point<2>& p) const;
};

/// E(x, y) = gamma (x - y)^2 + (V(x) + V(y)) / 2 with V(z) = z^4/4 - z^2/2.
struct AllenCahnPotential {
  static constexpr std::size_t dimension = 2;
  double gamma = 1.0;
  double value(const Point<2>& p) const;
  Point<2> gradient(const Point<2>& p) const;
};

template <class Potential>
struct LangevinScheme {
  double dt = 0.1;
  double beta = 1.0;
  Potential potential{};

  double noise_scale() const { return std::sqrt(2.0 * dt / beta); }
};

/// x - dt grad E(x) + sqrt(2 dt / beta) g, with g standard normal per coordinate.
template <class Potential, std::size_t D = Potential::dimension>
Point<D> em_step(const Point<D>& x, const LangevinScheme<Potential>& scheme, const Point<D>& gaussian_draw) {
  const Point<D> grad = scheme.potential.gradient(x);
  const double s = scheme.noise_scale();
  Point<D> out;
  for (std::size_t i = 0; i < D; ++i) out[i] = x[i] - scheme.dt * grad[i] + s * gaussian_draw[i];
  return out;
}

/// One Euler-Maruyama step drawing exactly D normals from `rng`.
template <class Potential, std::size_t D = Potential::dimension>
Point<D> em_step(const Point<D>& x, const LangevinScheme<Potential>& scheme, Rng& rng) {
  Point<D> g;
  for (auto& c : g) c = rng.gaussian();
  return em_step(x, scheme, g);
}

/// Reaction coordinates of the 2-D problems.
enum class XiChoice { norm_to_A = 1, norm_to_B = 2, abscissa = 3, magnetization = 4 };

XiChoice parse_xi(std::string_view name);
std::string_view to_string(XiChoice xi);

/// 1-D drifted Brownian motion: x0 = 1, A = ]-inf, a[, B = ]b, +inf[,
/// xi = identity, z_max = b.
ChainModel<1> drifted_bm_model(double mu, double beta, double dt = 0.1, double a = 0.1, double b = 1.9);

/// Bi-channel problem: x0 = (-0.9, 0), A and B open balls of radius rho
/// around (-1, 0) and (1, 0). z_max defaults to 1.9 (norm_to_A, norm_to_B)
/// or 0.9 (abscissa).
ChainModel<2> bichannel_model(double beta, XiChoice xi, double dt = 0.05, double rho = 0.05);

/// Allen-Cahn-type problem: x0 = (-0.9, -0.9), A and B balls around (-1, -1)
/// and (1, 1). z_max defaults to sqrt(7.6) for the norms and 0.9 otherwise.
ChainModel<2> allen_cahn_model(double gamma, double beta, XiChoice xi, double dt = 0.05, double rho = 0.05);

/// Default z_max for a 2-D reaction coordinate.
double default_z_max_bichannel(XiChoice xi);
double default_z_max_allen_cahn(XiChoice xi);

/// Walk on {0, ..., L}: up with probability p_up, down otherwise, started at
/// `start`. A = {0}, B = {L}, xi = identity, z_max = L - 1/2.
ChainModel<1> gamblers_ruin_model(double p_up, int start, int L);

}  // namespace ams::dynamics
