#include "ams/dynamics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ams::dynamics {

namespace {

constexpr double kThird = 1.0 / 3.0;
constexpr double kFiveThirds = 5.0 / 3.0;

double dist(const Point<2>& p, double cx, double cy) { return std::hypot(p[0] - cx, p[1] - cy); }

std::function<double(const Point<2>&)> make_xi(XiChoice xi, Point<2> m_A, Point<2> m_B) {
  switch (xi) {
    case XiChoice::norm_to_A:
      return [m_A](const Point<2>& p) { return dist(p, m_A[0], m_A[1]); };
    case XiChoice::norm_to_B: {
      const double span = dist(m_B, m_A[0], m_A[1]);
      return [m_B, span](const Point<2>& p) { return span - dist(p, m_B[0], m_B[1]); };
    }
    case XiChoice::abscissa:
      return [](const Point<2>& p) { return p[0]; };
    case XiChoice::magnetization:
      return [](const Point<2>& p) { return 0.5 * (p[0] + p[1]); };
  }
  throw std::invalid_argument("unknown reaction coordinate");
}

}  // namespace

double BiChannelPotential::value(const Point<2>& p) const {
  const double x = p[0], y = p[1];
  const double y1 = y - kThird, y2 = y - kFiveThirds;
  return 0.2 * x * x * x * x + 0.2 * y1 * y1 * y1 * y1 + 3.0 * std::exp(-x * x - y1 * y1) -
         3.0 * std::exp(-x * x - y2 * y2) - 5.0 * std::exp(-(x - 1.0) * (x - 1.0) - y * y) -
         5.0 * std::exp(-(x + 1.0) * (x + 1.0) - y * y);
}

Point<2> BiChannelPotential::gradient(const Point<2>& p) const {
  const double x = p[0], y = p[1];
  const double y1 = y - kThird, y2 = y - kFiveThirds;
  const double e1 = 3.0 * std::exp(-x * x - y1 * y1);
  const double e2 = 3.0 * std::exp(-x * x - y2 * y2);
  const double e3 = 5.0 * std::exp(-(x - 1.0) * (x - 1.0) - y * y);
  const double e4 = 5.0 * std::exp(-(x + 1.0) * (x + 1.0) - y * y);
  const double gx = 0.8 * x * x * x - 2.0 * x * e1 + 2.0 * x * e2 + 2.0 * (x - 1.0) * e3 + 2.0 * (x + 1.0) * e4;
  const double gy = 0.8 * y1 * y1 * y1 - 2.0 * y1 * e1 + 2.0 * y2 * e2 + 2.0 * y * e3 + 2.0 * y * e4;
  return {gx, gy};
}

double AllenCahnPotential::value(const Point<2>& p) const {
  auto V = [](double z) { return 0.25 * z * z * z * z - 0.5 * z * z; };
  const double d = p[0] - p[1];
  return gamma * d * d + 0.5 * (V(p[0]) + V(p[1]));
}

Point<2> AllenCahnPotential::gradient(const Point<2>& p) const {
  const double d = p[0] - p[1];
  return {2.0 * gamma * d + 0.5 * (p[0] * p[0] * p[0] - p[0]),
          -2.0 * gamma * d + 0.5 * (p[1] * p[1] * p[1] - p[1])};
}

XiChoice parse_xi(std::string_view name) {
  if (name == "xi1" || name == "norm-to-A") return XiChoice::norm_to_A;
  if (name == "xi2" || name == "norm-to-B") return XiChoice::norm_to_B;
  if (name == "xi3" || name == "abscissa") return XiChoice::abscissa;
  if (name == "xi4" || name == "magnetization") return XiChoice::magnetization;
  throw std::invalid_argument("unknown reaction coordinate '" + std::string(name) + "'");
}

std::string_view to_string(XiChoice xi) {
  switch (xi) {
    case XiChoice::norm_to_A: return "xi1";
    case XiChoice::norm_to_B: return "xi2";
    case XiChoice::abscissa: return "xi3";
    case XiChoice::magnetization: return "xi4";
  }
  return "?";
}

ChainModel<1> drifted_bm_model(double mu, double beta, double dt, double a, double b) {
  if (!(mu > 0.0)) throw std::invalid_argument("drifted-bm: mu must be positive");
  if (!(beta > 0.0) || !(dt > 0.0)) throw std::invalid_argument("drifted-bm: beta and dt must be positive");
  if (!(a < 1.0 && 1.0 < b)) throw std::invalid_argument("drifted-bm: need a < x0 = 1 < b");
  const LangevinScheme<LinearPotential> scheme{dt, beta, LinearPotential{mu}};
  ChainModel<1> m;
  m.name = "drifted-bm";
  m.transition = [scheme](const Point<1>& x, Rng& rng) { return em_step(x, scheme, rng); };
  m.x0 = {1.0};
  m.region_A = [a](const Point<1>& x) { return x[0] < a; };
  m.region_B = [b](const Point<1>& x) { return x[0] > b; };
  m.xi = [](const Point<1>& x) { return x[0]; };
  m.z_max = b;
  return m;
}

double default_z_max_bichannel(XiChoice xi) {
  switch (xi) {
    case XiChoice::norm_to_A:
    case XiChoice::norm_to_B: return 1.9;
    case XiChoice::abscissa: return 0.9;
    case XiChoice::magnetization: break;
  }
  throw std::invalid_argument("bichannel: reaction coordinate xi4 is not defined for this model");
}

double default_z_max_allen_cahn(XiChoice xi) {
  switch (xi) {
    case XiChoice::norm_to_A:
    case XiChoice::norm_to_B: return std::sqrt(7.6);
    case XiChoice::abscissa:
    case XiChoice::magnetization: return 0.9;
  }
  throw std::invalid_argument("allen-cahn: unknown reaction coordinate");
}

ChainModel<2> bichannel_model(double beta, XiChoice xi, double dt, double rho) {
  if (!(beta > 0.0) || !(dt > 0.0) || !(rho > 0.0)) throw std::invalid_argument("bichannel: bad parameters");
  const Point<2> m_A{-1.0, 0.0}, m_B{1.0, 0.0};
  const LangevinScheme<BiChannelPotential> scheme{dt, beta, {}};
  ChainModel<2> m;
  m.name = "bichannel";
  m.z_max = default_z_max_bichannel(xi);
  m.transition = [scheme](const Point<2>& x, Rng& rng) { return em_step(x, scheme, rng); };
  m.x0 = {-0.9, 0.0};
  m.region_A = [m_A, rho](const Point<2>& x) { return dist(x, m_A[0], m_A[1]) < rho; };
  m.region_B = [m_B, rho](const Point<2>& x) { return dist(x, m_B[0], m_B[1]) < rho; };
  m.xi = make_xi(xi, m_A, m_B);
  m.channel = ChannelSpec{0, 0.0, 1, 0.5};
  return m;
}

ChainModel<2> allen_cahn_model(double gamma, double beta, XiChoice xi, double dt, double rho) {
  if (!(gamma > 0.0) || !(beta > 0.0) || !(dt > 0.0) || !(rho > 0.0))
    throw std::invalid_argument("allen-cahn: bad parameters");
  const Point<2> m_A{-1.0, -1.0}, m_B{1.0, 1.0};
  const LangevinScheme<AllenCahnPotential> scheme{dt, beta, AllenCahnPotential{gamma}};
  ChainModel<2> m;
  m.name = "allen-cahn";
  m.z_max = default_z_max_allen_cahn(xi);
  m.transition = [scheme](const Point<2>& x, Rng& rng) { return em_step(x, scheme, rng); };
  m.x0 = {-0.9, -0.9};
  m.region_A = [m_A, rho](const Point<2>& x) { return dist(x, m_A[0], m_A[1]) < rho; };
  m.region_B = [m_B, rho](const Point<2>& x) { return dist(x, m_B[0], m_B[1]) < rho; };
  m.xi = make_xi(xi, m_A, m_B);
  return m;
}

ChainModel<1> gamblers_ruin_model(double p_up, int start, int L) {
  if (!(p_up > 0.0 && p_up < 1.0)) throw std::invalid_argument("gamblers-ruin: p_up must lie in (0, 1)");
  if (!(0 < start && start < L)) throw std::invalid_argument("gamblers-ruin: need 0 < start < L");
  ChainModel<1> m;
  m.name = "gamblers-ruin";
  m.transition = [p_up](const Point<1>& x, Rng& rng) { return Point<1>{rng.bernoulli(p_up) ? x[0] + 1.0 : x[0] - 1.0}; };
  m.x0 = {static_cast<double>(start)};
  m.region_A = [](const Point<1>& x) { return x[0] < 0.5; };
  const double top = static_cast<double>(L);
  m.region_B = [top](const Point<1>& x) { return x[0] > top - 0.5; };
  m.xi = [](const Point<1>& x) { return x[0]; };
  m.z_max = top - 0.5;
  return m;
}

}  // namespace ams::dynamics
