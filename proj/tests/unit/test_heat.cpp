#include <doctest.h>

#include <cmath>
#include <set>

#include "mfpinn/errors.hpp"
#include "mfpinn/heat.hpp"

using namespace mfpinn;
using heat::FieldSolution;
using heat::ThermalSetup;

TEST_CASE("air_temperature: piecewise-linear interpolation") {
  heat::CureCycle c;
  c.knots = {{0.0, 0.0}, {500.0, 180.0}, {2000.0, 180.0}, {2500.0, 20.0}};
  CHECK(c.air_temperature(250.0) == doctest::Approx(90.0));
  CHECK(c.air_temperature(1000.0) == doctest::Approx(180.0));
  CHECK(c.air_temperature(0.0) == doctest::Approx(0.0));
  CHECK(c.air_temperature(2500.0) == doctest::Approx(20.0));
  CHECK(c.air_temperature(2250.0) == doctest::Approx(100.0));
  CHECK_THROWS_AS(c.air_temperature(-1.0), DomainError);
  CHECK_THROWS_AS(c.air_temperature(2500.1), DomainError);
}

TEST_CASE("default cycle anchors: ramp to 500 s, cooldown from 2000 s") {
  const heat::CureCycle c = heat::default_cycle();
  CHECK(c.air_temperature(250.0) == doctest::Approx(90.0));
  CHECK(c.air_temperature(500.0) == doctest::Approx(180.0));
  CHECK(c.air_temperature(2000.0) == doctest::Approx(180.0));
  CHECK(c.total_duration() == doctest::Approx(2500.0));
  CHECK(c.air_temperature(2500.0) < 180.0);  // cooldown happened
}

TEST_CASE("cycle validation") {
  heat::CureCycle c;
  c.knots = {{0.0, 0.0}};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.knots = {{10.0, 0.0}, {20.0, 1.0}};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.knots = {{0.0, 0.0}, {5.0, 1.0}, {5.0, 2.0}};
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("table values give the expected diffusivities") {
  CHECK(heat::composite1_setup().material.diffusivity() ==
        doctest::Approx(3.0899e-7).epsilon(1e-4));
  CHECK(heat::composite2_setup().material.diffusivity() ==
        doctest::Approx(4.1098e-7).epsilon(1e-4));
}

TEST_CASE("equilibrium is a fixed point of the scheme") {
  ThermalSetup s = heat::composite2_setup();
  s.initial_temperature = 20.0;
  s.cycle.knots = {{0.0, 20.0}, {2500.0, 20.0}};
  const FieldSolution f = heat::solve(s, 20, 2.5, 1.0, 51);
  for (double T : f.temperatures) CHECK(std::fabs(T - 20.0) <= 1e-9);
}

TEST_CASE("maximum principle and monotone heating toward a constant ambient") {
  ThermalSetup s = heat::composite2_setup();
  s.initial_temperature = 0.0;
  s.cycle.knots = {{0.0, 100.0}, {2500.0, 100.0}};
  const FieldSolution f = heat::solve(s, 40, 1.0, 1.0, 126);
  const int nn = f.n_nodes();
  for (int snap = 0; snap < f.n_snapshots(); ++snap) {
    for (int i = 0; i < nn; ++i) {
      const double T = f.at(snap, i);
      CHECK(T >= -1e-12);
      CHECK(T <= 100.0 + 1e-9);
      if (snap > 0) CHECK(T >= f.at(snap - 1, i) - 1e-9);
    }
  }
  CHECK(f.at(f.n_snapshots() - 1, nn / 2) > 90.0);
}

TEST_CASE("insulated slab conserves thermal energy per step") {
  ThermalSetup s = heat::composite2_setup();
  s.htc_bottom = 0.0;
  s.htc_top = 0.0;
  const int n_el = 20;
  std::vector<double> profile(n_el + 1);
  for (int i = 0; i <= n_el; ++i)
    profile[i] = 20.0 + 100.0 * static_cast<double>(i) / n_el;
  // dt equals the snapshot spacing, so consecutive snapshots are one step
  // apart.
  const double duration = s.cycle.total_duration();
  const int n_snap = 1001;
  const double dt = duration / (n_snap - 1);
  const FieldSolution f = heat::solve(s, n_el, dt, 1000.0, n_snap, profile);
  const double dx = s.thickness / n_el;
  const double rho_cp = s.material.density * s.material.specific_heat;
  auto energy = [&](int snap) {
    double sum = 0.5 * f.at(snap, 0) + 0.5 * f.at(snap, n_el);
    for (int i = 1; i < n_el; ++i) sum += f.at(snap, i);
    return rho_cp * dx * sum;
  };
  const double e0 = energy(0);
  for (int snap = 1; snap < n_snap; ++snap) {
    CHECK(std::fabs(energy(snap) - energy(snap - 1)) <= 1e-8 * std::fabs(e0));
  }
  // and the profile actually evolves (diffusion is happening)
  CHECK(std::fabs(f.at(n_snap - 1, 0) - profile[0]) > 1.0);
}

TEST_CASE("self-convergence with spatial order >= 1.8") {
  const ThermalSetup s = heat::composite2_setup();
  const double base_dt = 1.0;
  const int n_snap = 26;
  const FieldSolution ref = heat::solve(s, 320, base_dt / 16.0, 1000.0, n_snap);
  double prev_err = 0.0;
  std::vector<double> errs;
  for (int level = 0; level < 3; ++level) {
    const int n = 40 << level;               // 40, 80, 160
    const double dt = base_dt / (1 << (2 * level));  // dt, dt/4, dt/16
    const FieldSolution f = heat::solve(s, n, dt, 1000.0, n_snap);
    const int stride = 320 / n;
    double err = 0.0;
    for (int snap = 0; snap < n_snap; ++snap) {
      for (int i = 0; i <= n; ++i) {
        err = std::max(err, std::fabs(f.at(snap, i) - ref.at(snap, i * stride)));
      }
    }
    errs.push_back(err);
    if (level > 0) {
      CHECK(err < prev_err);  // monotone decrease
      const double order = std::log2(prev_err / err);
      CHECK(order >= 1.8);
    }
    prev_err = err;
  }
}

TEST_CASE("the two composites separate at the midpoint during the ramp") {
  // With the shipped properties the conductivity gain of composite 2
  // outweighs its extra heat capacity, so its center runs slightly hotter
  // through the ramp; the curves stay distinct by over a degree.
  const FieldSolution f1 = heat::solve(heat::composite1_setup(), 40, 0.5, 1.0, 126);
  const FieldSolution f2 = heat::solve(heat::composite2_setup(), 40, 0.5, 1.0, 126);
  double best_gap = 0.0;
  for (int snap = 0; snap < f1.n_snapshots(); ++snap) {
    const double t = f1.t_snapshots[snap];
    if (t <= 0.0 || t > 500.0) continue;
    best_gap = std::max(best_gap, std::fabs(f1.at(snap, 20) - f2.at(snap, 20)));
  }
  CHECK(best_gap > 1.0);
}

TEST_CASE("step halving engages for a too-coarse dt and stays accurate") {
  const ThermalSetup s = heat::composite2_setup();
  const FieldSolution coarse = heat::solve(s, 40, 50.0, 1.0, 51);
  const FieldSolution fine = heat::solve(s, 40, 0.5, 1.0, 51);
  double max_diff = 0.0;
  for (std::size_t i = 0; i < coarse.temperatures.size(); ++i)
    max_diff = std::max(max_diff,
                        std::fabs(coarse.temperatures[i] - fine.temperatures[i]));
  CHECK(max_diff < 5.0);
}

TEST_CASE("solver fails after 20 halvings with a diagnostic") {
  const ThermalSetup s = heat::composite2_setup();
  CHECK_THROWS_AS(heat::solve(s, 40, 100.0, 1e-9, 26), SolverError);
}

TEST_CASE("solve validates its inputs") {
  const ThermalSetup s = heat::composite2_setup();
  CHECK_THROWS_AS(heat::solve(s, 1, 1.0, 1.0, 10), ConfigError);
  CHECK_THROWS_AS(heat::solve(s, 10, -1.0, 1.0, 10), ConfigError);
  CHECK_THROWS_AS(heat::solve(s, 10, 1.0, 0.0, 10), ConfigError);
  CHECK_THROWS_AS(heat::solve(s, 10, 1.0, 1.0, 1), ConfigError);
}

namespace {
FieldSolution default_field() {
  return heat::solve(heat::composite2_setup(), 40, 1.0, 1.0, 138);
}
}  // namespace

TEST_CASE("sample_labeled: determinism, prefixes, regions, errors") {
  const FieldSolution f = default_field();
  CHECK(heat::sample_labeled(f, 0, 1).points.empty());

  const auto a = heat::sample_labeled(f, 50, 99);
  const auto b = heat::sample_labeled(f, 50, 99);
  REQUIRE(a.points.size() == 50);
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    CHECK(a.points[i].x == b.points[i].x);
    CHECK(a.points[i].t == b.points[i].t);
    CHECK(a.points[i].temperature == b.points[i].temperature);
  }

  // same seed, smaller draw is a prefix of the bigger one
  const auto small = heat::sample_labeled(f, 10, 99);
  for (std::size_t i = 0; i < small.points.size(); ++i) {
    CHECK(small.points[i].x == a.points[i].x);
    CHECK(small.points[i].t == a.points[i].t);
  }

  // no duplicate lattice points
  std::set<std::pair<double, double>> seen;
  for (const auto& p : a.points) CHECK(seen.insert({p.x, p.t}).second);

  const heat::Region cooldown{2000.0, 2500.0, 0.0, 0.02};
  const auto cloud = heat::sample_labeled(f, 30, 5, cooldown);
  REQUIRE(cloud.points.size() == 30);
  for (const auto& p : cloud.points) {
    CHECK(p.t >= 2000.0);
    CHECK(p.t <= 2500.0);
  }

  CHECK_THROWS_AS(heat::sample_labeled(f, 1000000, 1), SamplingError);
  const heat::Region empty_region{9000.0, 9500.0, 0.0, 0.02};
  CHECK_THROWS_AS(heat::sample_labeled(f, 1, 1, empty_region), SamplingError);
}

TEST_CASE("test_grid is the 41 x 138 = 5658 point lattice") {
  const FieldSolution f = default_field();
  const auto grid = heat::test_grid(f);
  CHECK(grid.points.size() == 5658);

  // first row is the initial condition
  for (int i = 0; i < 41; ++i) {
    CHECK(grid.points[static_cast<std::size_t>(i)].t == 0.0);
    CHECK(grid.points[static_cast<std::size_t>(i)].temperature ==
          doctest::Approx(0.0));
  }
  std::set<double> xs, ts;
  for (const auto& p : grid.points) {
    xs.insert(p.x);
    ts.insert(p.t);
  }
  CHECK(xs.size() == 41);
  CHECK(ts.size() == 138);
  CHECK(*xs.begin() == 0.0);
  CHECK(*xs.rbegin() == doctest::Approx(0.02));

  const FieldSolution bad = heat::solve(heat::composite2_setup(), 20, 2.0, 1.0, 138);
  CHECK_THROWS_AS(heat::test_grid(bad), ConfigError);
  const FieldSolution few = heat::solve(heat::composite2_setup(), 40, 2.0, 1.0, 100);
  CHECK_THROWS_AS(heat::test_grid(few), ConfigError);
}
