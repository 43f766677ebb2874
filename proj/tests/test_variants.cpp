#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "ams/dynamics.hpp"
#include "ams/variants.hpp"

using namespace ams;

namespace {

ChainModel<1> step_model(std::function<Point<1>(const Point<1>&, Rng&)> step) {
  ChainModel<1> m;
  m.name = "step";
  m.transition = std::move(step);
  m.x0 = {0.0};
  m.region_A = [](const Point<1>& x) { return x[0] < -5.0; };
  m.region_B = [](const Point<1>& x) { return x[0] > 5.0; };
  m.xi = [](const Point<1>& x) { return x[0]; };
  m.z_max = 5.0;
  m.path_cap = 1000;
  return m;
}

// The start sits far below every later level, so the max level has no atom.
ChainModel<1> atomless_walk() {
  ChainModel<1> m;
  m.name = "atomless";
  m.transition = [](const Point<1>& x, Rng& rng) {
    if (x[0] < -50.0) return Point<1>{rng.gaussian()};
    return Point<1>{x[0] - 0.1 + 0.5 * rng.gaussian()};
  };
  m.x0 = {-100.0};
  m.region_A = [](const Point<1>& x) { return x[0] < -1.0 && x[0] > -50.0; };
  m.region_B = [](const Point<1>& x) { return x[0] > 2.0; };
  m.xi = [](const Point<1>& x) { return x[0]; };
  m.z_max = 2.0;
  return m;
}

GamsConfig config(std::size_t n, std::size_t k, double z_max) {
  GamsConfig c;
  c.n_rep = n;
  c.k = k;
  c.z_max = z_max;
  return c;
}

double bridge_covariance(std::size_t i, std::size_t j, std::size_t kappa) {
  // 1-based interior indices of a bridge with kappa + 1 unit increments.
  const double a = static_cast<double>(std::min(i, j)), b = static_cast<double>(std::max(i, j));
  return a * (static_cast<double>(kappa) + 1.0 - b) / (static_cast<double>(kappa) + 1.0);
}

}  // namespace

static_assert(ModelContract<ExactKPathModel<1>>);
static_assert(ModelContract<BridgeModel>);

TEST_CASE("exact-k resample redraws the crossing state") {
  const auto m = dynamics::drifted_bm_model(1.0, 4.0);
  Rng rng(1);
  std::size_t checked = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto parent = simulate_path(m, m.x0, rng);
    const double top = max_level(parent);
    CHECK_THROWS_AS(exact_k_resample(parent, top, m, rng), std::invalid_argument);
    const double z = m.x0[0] + (top - m.x0[0]) * rng.uniform();
    const auto t = entrance_time(parent, z);
    if (!t || *t == 0) continue;
    const auto child = exact_k_resample(parent, z, m, rng);
    for (std::size_t j = 0; j < *t; ++j) CHECK(child.states[j] == parent.states[j]);
    CHECK(child.xi[*t] > z);
    CHECK(child.states[*t] != parent.states[*t]);
    CHECK(entrance_time(child, z) == t);
    ++checked;
  }
  CHECK(checked > 100);
}

TEST_CASE("exact-k resample with a certain crossing reproduces the kernel") {
  const auto m = step_model([](const Point<1>& x, Rng&) { return Point<1>{x[0] + 2.0}; });
  Rng rng(2);
  const auto parent = simulate_path(m, m.x0, rng);
  CHECK(exact_k_resample(parent, 1.0, m, rng) == parent);
  CHECK(exact_k_resample(parent, 3.5, m, rng) == parent);
}

TEST_CASE("exact-k rejection cap") {
  auto m = step_model([](const Point<1>& x, Rng& rng) {
    return Point<1>{x[0] < 0.5 ? x[0] + (rng.uniform() < 0.5 ? 1.0 : -0.5) : 6.0};
  });
  StoppedPath<1> parent;
  for (double v : {0.0, 6.0}) {
    parent.states.push_back({v});
    parent.xi.push_back(v);
  }
  parent.stopped_in_B = true;
  Rng rng(3);
  // From 0 the kernel reaches at most 1.
  CHECK_THROWS_AS(exact_k_resample(parent, 1.5, m, rng, 1000), ModelError);
  const auto child = exact_k_resample(parent, 0.5, m, rng, 1000);
  CHECK(child.xi[1] == 1.0);
}

TEST_CASE("exact-k runs retire exactly k replicas once the start atom is gone") {
  const auto chain = dynamics::drifted_bm_model(1.0, 4.0);
  const ExactKPathModel<1> model(chain, 100'000'000);
  std::size_t first_over = 0, later_over = 0, ties = 0;
  const std::size_t runs = 100;
  for (std::size_t r = 0; r < runs; ++r) {
    Rng rng(derive_seed(4, 0, r));
    RunOptions<StoppedPath<1>> opts;
    opts.observer = [&](const ReplicaSystem<StoppedPath<1>>& sys) {
      if (sys.iteration == 0) return;
      std::set<double> levels;
      for (const auto& rep : sys.working) levels.insert(rep.cached_max_level.value());
      ties += sys.working.size() - levels.size();
    };
    const auto res = run_ams(model, config(20, 2, chain.z_max), rng, opts);
    CHECK_FALSE(res.extinct);
    for (std::size_t q = 0; q < res.k_history.size(); ++q) {
      if (res.k_history[q] == 2) continue;
      ++(q == 0 ? first_over : later_over);
    }
  }
  CHECK(later_over == 0);
  CHECK(ties == 0);
  // Every path that steps down first has max level xi(x0): the first level is tied.
  CHECK(first_over > runs / 2);
}

TEST_CASE("exact-k prefix agreement stops before the crossing") {
  const auto chain = dynamics::drifted_bm_model(1.0, 4.0);
  const ExactKPathModel<1> model(chain);
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const auto parent = model.sample_initial(rng);
    const double top = model.max_level(parent);
    CHECK(model.resample(parent, top, rng) == parent);
    const double z = chain.x0[0] + (top - chain.x0[0]) * rng.uniform();
    const auto t = entrance_time(parent, z);
    if (!t || *t == 0) continue;
    CHECK(model.prefix_equal(parent, model.resample(parent, z, rng), z));
  }
}

TEST_CASE("biased version 1 coincides with classical splitting without ties") {
  const PathModel<1> model(atomless_walk());
  const auto cfg = config(5, 1, 2.0);
  std::size_t compared = 0;
  for (std::size_t r = 0; r < 2000; ++r) {
    Rng a(derive_seed(6, 0, r)), b(derive_seed(6, 0, r));
    const auto classical = run_ams(model, cfg, a);
    bool tie_free = !classical.extinct;
    for (auto kq : classical.k_history) tie_free = tie_free && kq == 1;
    if (!tie_free) continue;
    const auto v1 = biased::run_biased(model, cfg, biased::Version::version1, b);
    CHECK(v1.p_hat == classical.p_hat);
    CHECK(v1.q_iter == classical.q_iter);
    ++compared;
  }
  CHECK(compared > 100);
}

TEST_CASE("biased versions retire exactly k and use the fixed factor") {
  const PathModel<1> model(dynamics::drifted_bm_model(1.0, 4.0));
  for (auto version : {biased::Version::version1, biased::Version::version2}) {
    for (std::size_t r = 0; r < 50; ++r) {
      Rng rng(derive_seed(7, 0, r));
      const auto res = biased::run_biased(model, config(20, 3, 1.9), version, rng);
      for (auto kq : res.k_history) CHECK(kq == 3);
      CHECK(res.p_hat == doctest::Approx(std::pow(17.0 / 20.0, res.q_iter) * res.p_corr).epsilon(1e-12));
    }
  }
}

TEST_CASE("biased version 2 branches at the first index at or above the level") {
  const auto chain = dynamics::drifted_bm_model(1.0, 4.0);
  const PathModel<1> model(chain);
  Rng rng(8);
  std::size_t checked = 0;
  for (int i = 0; i < 500; ++i) {
    const auto parent = model.sample_initial(rng);
    const double z = model.max_level(parent);
    const auto t = entrance_time_at_or_above(parent.xi, z);
    REQUIRE(t.has_value());
    const auto child = model.resample_at_or_above(parent, z, rng);
    for (std::size_t j = 0; j <= *t; ++j) CHECK(child.states[j] == parent.states[j]);
    CHECK(max_level(child) >= z);
    ++checked;
  }
  CHECK(checked == 500);
}

TEST_CASE("single-point bridge has variance one half") {
  const BridgeModel m(1, 2.0);
  Rng rng(9);
  const int n = 1000000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = m.sample_initial(rng).values[0];
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n, var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 3.0 * std::sqrt(0.5 / n));
  CHECK(std::abs(var - 0.5) < 3.0 * std::sqrt(2.0) * 0.5 / std::sqrt(n));
}

TEST_CASE("sequential bridge matches the bridge covariance") {
  const std::size_t kappa = 7;
  const BridgeModel m(kappa, 2.0);
  Rng rng(10);
  const int n = 1000000;
  std::vector<double> sum(kappa, 0.0), sq(kappa, 0.0), cross(kappa - 1, 0.0);
  for (int s = 0; s < n; ++s) {
    const auto x = m.sample_initial(rng).values;
    for (std::size_t i = 0; i < kappa; ++i) {
      sum[i] += x[i];
      sq[i] += x[i] * x[i];
      if (i + 1 < kappa) cross[i] += x[i] * x[i + 1];
    }
  }
  for (std::size_t i = 0; i < kappa; ++i) {
    const double v = bridge_covariance(i + 1, i + 1, kappa);
    // Sign symmetry: every coordinate is centred.
    CHECK(std::abs(sum[i] / n) < 3.0 * std::sqrt(v / n));
    CHECK(std::abs(sq[i] / n - v) < 3.0 * std::sqrt(2.0) * v / std::sqrt(n));
    if (i + 1 < kappa) {
      const double c = bridge_covariance(i + 1, i + 2, kappa);
      const double w = bridge_covariance(i + 2, i + 2, kappa);
      CHECK(std::abs(cross[i] / n - c) < 3.0 * std::sqrt((v * w + c * c) / n));
    }
  }
}

TEST_CASE("bridge resampling keeps the prefix through the crossing") {
  const BridgeModel m(7, 2.0);
  CHECK(m.kappa() == 7);
  CHECK(m.z_max() == 2.0);
  CHECK_THROWS_AS(BridgeModel(0, 2.0), std::invalid_argument);
  Rng rng(11);
  std::size_t redrawn = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto s = m.sample_initial(rng);
    const double top = m.max_level(s);
    CHECK(m.resample(s, top, rng) == s);
    const double z = top - 0.5 * rng.uniform();
    const auto t = entrance_time(std::span<const double>(s.values), z);
    REQUIRE(t.has_value());
    const auto c = m.resample(s, z, rng);
    for (std::size_t j = 0; j <= *t; ++j) CHECK(c.values[j] == s.values[j]);
    CHECK(m.prefix_equal(s, c, z));
    CHECK(m.max_level(c) > z);
    if (*t + 1 < s.kappa()) {
      CHECK(c.values[*t + 1] != s.values[*t + 1]);
      ++redrawn;
    }
  }
  CHECK(redrawn > 0);
}

TEST_CASE("bridge target") {
  const BridgeModel m(3, 1.0);
  CHECK(m.in_target(BridgeState{{0.0, 1.5, 0.2}}));
  CHECK_FALSE(m.in_target(BridgeState{{0.0, 1.0, 0.2}}));
  CHECK(m.max_level(BridgeState{{0.0, 1.0, 0.2}}) == 1.0);
}
