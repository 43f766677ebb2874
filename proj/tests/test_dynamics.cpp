#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "ams/dynamics.hpp"

using namespace ams;
using namespace ams::dynamics;

namespace {

template <class P>
double fd_relative_error(const P& pot, Point<2> x, double h = 1e-5) {
  const auto g = pot.gradient(x);
  double num = 0.0, den = 0.0;
  for (int i = 0; i < 2; ++i) {
    Point<2> a = x, b = x;
    a[i] += h;
    b[i] -= h;
    const double fd = (pot.value(a) - pot.value(b)) / (2.0 * h);
    num += (g[i] - fd) * (g[i] - fd);
    den += g[i] * g[i];
  }
  return std::sqrt(num / den);
}

Point<2> random_point(Rng& rng) { return {-2.0 + 4.0 * rng.uniform(), -2.0 + 4.0 * rng.uniform()}; }

}  // namespace

TEST_CASE("euler-maruyama step") {
  const LangevinScheme<LinearPotential> flat{0.1, 8.0, LinearPotential{0.0}};
  CHECK(em_step(Point<1>{0.7}, flat, Point<1>{0.0})[0] == 0.7);
  const LangevinScheme<LinearPotential> drift{0.1, 8.0, LinearPotential{1.0}};
  CHECK(em_step(Point<1>{1.0}, drift, Point<1>{0.0})[0] == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(em_step(Point<1>{1.0}, drift, Point<1>{1.0})[0] ==
        doctest::Approx(0.9 + std::sqrt(0.2 / 8.0)).epsilon(1e-15));
  CHECK(drift.noise_scale() == doctest::Approx(0.158113883008419).epsilon(1e-14));

  const auto m = drifted_bm_model(1.0, 8.0);
  Rng a(1), b(1);
  const Point<1> step = m.transition(m.x0, a);
  CHECK(step[0] == 1.0 - 0.1 + std::sqrt(2.0 * 0.1 / 8.0) * b.gaussian());
}

TEST_CASE("quadratic chain has the AR(1) stationary variance") {
  const double dt = 0.1, beta = 1.0;
  const LangevinScheme<QuadraticPotential> s{dt, beta, {}};
  const double exact = (2.0 * dt / beta) / (1.0 - (1.0 - dt) * (1.0 - dt));
  CHECK(exact == doctest::Approx(1.0526315789473684).epsilon(1e-14));
  Rng rng(2);
  Point<1> x{0.0};
  for (int i = 0; i < 1000; ++i) x = em_step(x, s, rng);
  double sum = 0.0, sq = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    x = em_step(x, s, rng);
    sum += x[0];
    sq += x[0] * x[0];
  }
  const double var = sq / n - (sum / n) * (sum / n);
  CHECK(std::abs(var / exact - 1.0) < 0.05);
}

TEST_CASE("potential values") {
  const BiChannelPotential bi;
  const double e = 3.0 - 3.0 * std::exp(-16.0 / 9.0) - 10.0 * std::exp(-10.0 / 9.0);
  CHECK(bi.value({0.0, 1.0 / 3.0}) == doctest::Approx(e).epsilon(1e-14));
  CHECK(e == doctest::Approx(-0.7986).epsilon(1e-3));

  for (double g : {0.1, 1.0, 3.0}) {
    const AllenCahnPotential ac{g};
    CHECK(ac.value({-1.0, -1.0}) == -0.25);
    CHECK(ac.value({1.0, 1.0}) == -0.25);
  }
  CHECK(LinearPotential{2.0}.value({3.0}) == 6.0);
}

TEST_CASE("gradients match finite differences") {
  Rng rng(3);
  const BiChannelPotential bi;
  const AllenCahnPotential ac1{1.0}, ac01{0.1};
  for (int i = 0; i < 100; ++i) {
    const auto p = random_point(rng);
    CHECK(fd_relative_error(bi, p) <= 1e-6);
    CHECK(fd_relative_error(ac1, p) <= 1e-6);
    CHECK(fd_relative_error(ac01, p) <= 1e-6);
    const LinearPotential lin{0.5 + rng.uniform()};
    const double x = p[0], h = 1e-5;
    const double fd = (lin.value({x + h}) - lin.value({x - h})) / (2.0 * h);
    CHECK(std::abs(fd - lin.gradient({x})[0]) / lin.mu <= 1e-6);
  }
}

TEST_CASE("symmetries") {
  Rng rng(4);
  const BiChannelPotential bi;
  const AllenCahnPotential ac{1.0};
  for (int i = 0; i < 100; ++i) {
    const auto p = random_point(rng);
    CHECK(std::abs(bi.value(p) - bi.value({-p[0], p[1]})) <= 1e-12);
    CHECK(std::abs(ac.value(p) - ac.value({p[1], p[0]})) <= 1e-12);
    CHECK(std::abs(ac.value(p) - ac.value({-p[0], -p[1]})) <= 1e-12);
  }
}

TEST_CASE("weak coupling turns the origin into a local maximum") {
  auto hessian = [](const AllenCahnPotential& pot) {
    const double h = 1e-5;
    double H[2][2];
    for (int j = 0; j < 2; ++j) {
      Point<2> a{0.0, 0.0}, b{0.0, 0.0};
      a[j] += h;
      b[j] -= h;
      const auto ga = pot.gradient(a), gb = pot.gradient(b);
      for (int i = 0; i < 2; ++i) H[i][j] = (ga[i] - gb[i]) / (2.0 * h);
    }
    const double tr = H[0][0] + H[1][1], det = H[0][0] * H[1][1] - H[0][1] * H[1][0];
    return std::pair{tr, det};
  };
  // Exact Hessian at the origin: [[2g - 1/2, -2g], [-2g, 2g - 1/2]].
  const auto [tr01, det01] = hessian(AllenCahnPotential{0.1});
  CHECK(tr01 < 0.0);
  CHECK(det01 > 0.0);  // both eigenvalues negative
  const auto [tr1, det1] = hessian(AllenCahnPotential{1.0});
  CHECK(det1 < 0.0);  // a saddle
}

TEST_CASE("reaction coordinates and regions") {
  CHECK(parse_xi("xi1") == XiChoice::norm_to_A);
  CHECK(parse_xi("abscissa") == XiChoice::abscissa);
  CHECK_THROWS(parse_xi("xi5"));
  CHECK(to_string(XiChoice::magnetization) == "xi4");
  CHECK_THROWS(default_z_max_bichannel(XiChoice::magnetization));
  CHECK(default_z_max_allen_cahn(XiChoice::norm_to_B) == std::sqrt(7.6));

  const auto x1 = bichannel_model(5.0, XiChoice::norm_to_A);
  const auto x2 = bichannel_model(5.0, XiChoice::norm_to_B);
  CHECK(x1.xi({1.0, 0.0}) == 2.0);
  CHECK(x2.xi({1.0, 0.0}) == x1.xi({1.0, 0.0}));
  CHECK(x1.x0 == Point<2>{-0.9, 0.0});
  CHECK(x1.z_max == 1.9);
  CHECK(bichannel_model(5.0, XiChoice::abscissa).z_max == 0.9);

  Rng rng(5);
  auto sample_ball = [&](double cx, double cy) {
    const double r = 0.05 * std::sqrt(rng.uniform()), t = 2.0 * M_PI * rng.uniform();
    return Point<2>{cx + r * std::cos(t), cy + r * std::sin(t)};
  };
  for (auto xi : {XiChoice::norm_to_A, XiChoice::norm_to_B, XiChoice::abscissa}) {
    const auto m = bichannel_model(5.0, xi);
    for (int i = 0; i < 1000; ++i) {
      const auto p = sample_ball(1.0, 0.0);
      if (!m.region_B(p)) continue;
      CHECK(m.xi(p) > m.z_max);
    }
  }
  for (auto xi : {XiChoice::norm_to_A, XiChoice::norm_to_B, XiChoice::abscissa, XiChoice::magnetization}) {
    const auto m = allen_cahn_model(1.0, 10.0, xi);
    CHECK(m.x0 == Point<2>{-0.9, -0.9});
    for (int i = 0; i < 1000; ++i) {
      const auto p = sample_ball(1.0, 1.0);
      if (!m.region_B(p)) continue;
      CHECK(m.xi(p) > m.z_max);
    }
  }
}

TEST_CASE("model factories reject bad parameters") {
  CHECK_THROWS(drifted_bm_model(0.0, 8.0));
  CHECK_THROWS(drifted_bm_model(1.0, -1.0));
  CHECK_THROWS(drifted_bm_model(1.0, 8.0, 0.1, 1.2, 1.9));
  CHECK_THROWS(bichannel_model(0.0, XiChoice::abscissa));
  CHECK_THROWS(allen_cahn_model(0.0, 1.0, XiChoice::abscissa));
  CHECK_THROWS(gamblers_ruin_model(1.0, 1, 9));
  CHECK_THROWS(gamblers_ruin_model(0.4, 0, 9));
}

TEST_CASE("gambler's ruin walk") {
  const auto m = gamblers_ruin_model(0.4, 1, 9);
  CHECK(m.z_max == 8.5);
  CHECK(m.region_A({0.0}));
  CHECK(m.region_B({9.0}));
  CHECK_FALSE(m.region_B({8.0}));
  Rng rng(6);
  int up = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double y = m.transition({4.0}, rng)[0];
    CHECK((y == 3.0 || y == 5.0));
    up += y == 5.0 ? 1 : 0;
  }
  CHECK(std::abs(up / double(n) - 0.4) < 4.0 * std::sqrt(0.24 / n));
}
