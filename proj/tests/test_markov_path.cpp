#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <sstream>

#include "ams/dynamics.hpp"
#include "ams/markov_path.hpp"

using namespace ams;

namespace {

ChainModel<1> line_model(std::function<Point<1>(const Point<1>&, Rng&)> step, std::size_t cap = 1000) {
  ChainModel<1> m;
  m.name = "line";
  m.transition = std::move(step);
  m.x0 = {0.0};
  m.region_A = [](const Point<1>& x) { return x[0] < -5.0; };
  m.region_B = [](const Point<1>& x) { return x[0] > 5.0; };
  m.xi = [](const Point<1>& x) { return x[0]; };
  m.z_max = 5.0;
  m.path_cap = cap;
  return m;
}

StoppedPath<1> path_from(std::vector<double> values) {
  StoppedPath<1> p;
  for (double v : values) {
    p.states.push_back({v});
    p.xi.push_back(v);
  }
  return p;
}

}  // namespace

TEST_CASE("simulate path") {
  Rng rng(1);
  auto jump = line_model([](const Point<1>&, Rng&) { return Point<1>{-10.0}; });
  const auto p = simulate_path(jump, jump.x0, rng);
  CHECK(p.length() == 2);
  CHECK(p.stopped_in_A);
  CHECK_FALSE(p.stopped_in_B);

  auto stuck = line_model([](const Point<1>& x, Rng&) { return x; }, 100);
  CHECK_THROWS_AS(simulate_path(stuck, stuck.x0, rng), ModelError);

  CHECK_THROWS_AS(simulate_path(jump, Point<1>{-6.0}, rng), std::invalid_argument);

  auto up = line_model([](const Point<1>& x, Rng&) { return Point<1>{x[0] + 2.0}; });
  const auto q = simulate_path(up, up.x0, rng);
  CHECK(q.stopped_in_B);
  CHECK(q.length() == 4);
  CHECK(reached_B_before_A(q, up));

  auto wrong = up;
  wrong.z_max = 7.0;  // B contains states with xi = 6 <= z_max
  CHECK_THROWS_AS(simulate_path(wrong, wrong.x0, rng), ModelError);
}

TEST_CASE("drifted paths hit A after about nine steps") {
  const auto m = dynamics::drifted_bm_model(1.0, 8.0);
  Rng rng(2);
  double steps = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) steps += static_cast<double>(simulate_path(m, m.x0, rng).length() - 1);
  steps /= n;
  CHECK(steps > 9.0 * 0.7);
  CHECK(steps < 9.0 * 1.3);
}

TEST_CASE("entrance time is strict") {
  const std::vector<double> a{0.2, 0.5, 0.5, 0.8};
  CHECK(entrance_time(a, 0.5) == 3u);
  CHECK(entrance_time(std::vector<double>{0.2, 0.3}, 0.9) == std::nullopt);
  CHECK(entrance_time(a, 0.1) == 0u);
  CHECK(entrance_time(a, std::nextafter(0.5, 0.0)) == 1u);
  CHECK(entrance_time_at_or_above(a, 0.5) == 1u);

  CHECK(max_level(std::vector<double>{0.2, 0.5, 0.8, 0.3}) == 0.8);
  CHECK(max_level(path_from({0.4, 0.4, 0.4})) == 0.4);
}

TEST_CASE("max level and entrance time agree") {
  const auto m = dynamics::drifted_bm_model(1.0, 4.0);
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const auto p = simulate_path(m, m.x0, rng);
    const double z = 0.5 + 1.5 * rng.uniform();
    CHECK((max_level(p) <= z) == !entrance_time(p, z).has_value());
    // Nesting.
    const double z2 = z + 0.3 * rng.uniform();
    const auto t1 = entrance_time(p, z), t2 = entrance_time(p, z2);
    if (t2) CHECK((t1 && *t1 <= *t2));
    // Attained values never trigger.
    for (std::size_t t = 0; t < p.length(); ++t) {
      const auto e = entrance_time(p, p.xi[t]);
      if (e) CHECK(p.xi[*e] > p.xi[t]);
    }
  }
}

TEST_CASE("branch resample copies the prefix through the branch point") {
  const auto m = dynamics::drifted_bm_model(1.0, 4.0);
  Rng rng(4);
  std::size_t collisions = 0, ties = 0;
  for (int i = 0; i < 1000; ++i) {
    auto parent = simulate_path(m, m.x0, rng);
    const double top = max_level(parent);
    CHECK(branch_resample(parent, top, m, rng) == parent);

    const double z = std::nextafter(m.x0[0], 2.0) + (top - m.x0[0]) * 0.5 * rng.uniform();
    const auto t = entrance_time(parent, z);
    if (!t) continue;
    const auto c1 = branch_resample(parent, z, m, rng);
    const auto c2 = branch_resample(parent, z, m, rng);
    for (std::size_t j = 0; j <= *t; ++j) {
      CHECK(c1.states[j] == parent.states[j]);
      CHECK(c2.states[j] == parent.states[j]);
    }
    CHECK(max_level(c1) >= parent.xi[*t]);
    CHECK(max_level(c1) > z);
    PathModel<1> pm(m);
    CHECK(pm.prefix_equal(parent, c1, z));
    if (c1.length() > *t + 1 && c2.length() > *t + 1 && c1.states[*t + 1] == c2.states[*t + 1]) ++collisions;
    if (max_level(c1) == max_level(parent)) ++ties;
  }
  CHECK(collisions == 0);
  CHECK(ties > 0);  // children can reproduce the parent's maximum exactly
}

TEST_CASE("reached B before A") {
  auto m = line_model([](const Point<1>& x, Rng&) { return x; });
  CHECK_FALSE(reached_B_before_A(path_from({0, -1, -6}), m));
  CHECK(reached_B_before_A(path_from({0, 1, 2, 3, 4, 6}), m));
  CHECK_FALSE(reached_B_before_A(path_from({0, -6, 6}), m));

  const auto drift = dynamics::drifted_bm_model(1.0, 8.0);
  Rng rng(5);
  std::size_t hits = 0;
  const std::size_t n = 200000;
  for (std::size_t i = 0; i < n; ++i) hits += reached_B_before_A(simulate_path(drift, drift.x0, rng), drift) ? 1 : 0;
  const double p = static_cast<double>(hits) / n;
  CHECK(std::abs(p - 3.6e-4) < 4.0 * std::sqrt(3.6e-4 / n));
}

TEST_CASE("path dump") {
  std::ostringstream out;
  write_path(out, path_from({1.0, 0.5}), 0.1);
  CHECK(out.str() == "0 1 1\n0.1 0.5 0.5\n");
}

TEST_CASE("model validation") {
  auto m = line_model([](const Point<1>& x, Rng&) { return x; });
  m.x0 = {-6.0};
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  m = line_model({});
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
}
