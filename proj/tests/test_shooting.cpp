#include "softrod/shooting.hpp"

#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

using namespace softrod;

namespace {

StepContext static_context(const RodParams& P, const HistoryBuffer& hist, const std::vector<double>& tau,
                           SpatialIntegrator integrator = SpatialIntegrator::Rk4) {
  return {&P, BdfScheme::statics(), &hist, tau, nullptr, integrator};
}

RodParams weightless() {
  RodParams P = RodParams::defaults();
  P.include_self_weight = false;
  return P;
}

double median(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  return v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
}

}  // namespace

TEST_CASE("unloaded rod integrates to a straight line") {
  const RodParams P = weightless();
  const HistoryBuffer hist = zero_history(P.node_count());
  const std::vector<double> tau(4, 0.0);
  const RodProfile nodes = integrate_spatial({}, static_context(P, hist, tau));
  REQUIRE(nodes.size() == 11);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    CHECK((nodes[i].p - Vec3(0, 0, i * P.ds())).norm() < 1e-14);
    CHECK(nodes[i].n.isZero(0.0));
    CHECK(nodes[i].m.isZero(0.0));
    CHECK(nodes[i].q.isZero(0.0));
    CHECK(nodes[i].w.isZero(0.0));
  }
  CHECK(distal_residual({}, static_context(P, hist, tau)).isZero(0.0));
  ShootingGuess g;
  g.n0 = Vec3(0, 0, 1);
  Vec6 expected;
  expected << 0, 0, 1, 0, 0, 0;
  CHECK((distal_residual(g, static_context(P, hist, tau)) - expected).norm() < 1e-14);
}

TEST_CASE("axial statics under self weight") {
  const RodParams P = RodParams::defaults();
  const HistoryBuffer hist = zero_history(P.node_count());
  const std::vector<double> tau(4, 0.0);
  const double rhoAg = P.density * P.area * 9.81;
  ShootingGuess g;
  g.n0 = Vec3(0, 0, -rhoAg * P.length);
  for (SpatialIntegrator integ : {SpatialIntegrator::Euler, SpatialIntegrator::Rk4}) {
    const RodProfile nodes = integrate_spatial(g, static_context(P, hist, tau, integ));
    for (std::size_t i = 0; i < nodes.size(); ++i)
      CHECK(nodes[i].n.z() == doctest::Approx(-rhoAg * (P.length - i * P.ds())).epsilon(1e-6));
    CHECK(nodes.back().n.norm() < 1e-9);
  }
  ShootingGuess off = g;
  off.n0.z() *= 1.1;
  CHECK(distal_residual(off, static_context(P, hist, tau)).norm() > 1e-3);
  const StepSolution sol = solve_static(P, 0.0, SolverConfig{});
  CHECK(sol.guess.n0.z() == doctest::Approx(-rhoAg * P.length).epsilon(1e-6));
}

TEST_CASE("spatial integrators converge at their nominal orders") {
  // Horizontal gravity with a differential tension bends the rod smoothly.
  auto tip = [](int segments, SpatialIntegrator integ) {
    RodParams P = RodParams::defaults();
    P.segments = segments;
    P.gravity = Vec3(-9.81, 0, 0);
    SolverConfig cfg;
    cfg.integrator = integ;
    cfg.residual_tol = 1e-11;
    const HistoryBuffer hist = zero_history(P.node_count());
    const std::vector<double> tau{7.0, 6.0, 5.0, 6.0};
    StepContext ctx{&P, BdfScheme::statics(), &hist, tau, nullptr, integ};
    return solve_step({}, ctx, cfg).nodes.back().p;
  };
  const Vec3 ref = tip(320, SpatialIntegrator::Rk4);
  const double e_euler_10 = (tip(10, SpatialIntegrator::Euler) - ref).norm();
  const double e_euler_20 = (tip(20, SpatialIntegrator::Euler) - ref).norm();
  const double e_rk4_5 = (tip(5, SpatialIntegrator::Rk4) - ref).norm();
  const double e_rk4_10 = (tip(10, SpatialIntegrator::Rk4) - ref).norm();
  CHECK(std::log2(e_euler_10 / e_euler_20) == doctest::Approx(1.0).epsilon(0.2));
  CHECK(std::log2(e_rk4_5 / e_rk4_10) == doctest::Approx(4.0).epsilon(0.2));
}

TEST_CASE("solve_step") {
  SUBCASE("unloaded rod converges immediately") {
    const RodParams P = weightless();
    const HistoryBuffer hist = zero_history(P.node_count());
    const std::vector<double> tau(4, 0.0);
    const StepSolution sol = solve_step({}, static_context(P, hist, tau), SolverConfig{});
    CHECK(sol.iterations <= 1);
  }
  SUBCASE("residual decreases monotonically on the gravity case") {
    RodParams P = RodParams::defaults();
    P.gravity = Vec3(-9.81, 0, 0);
    const HistoryBuffer hist = zero_history(P.node_count());
    const std::vector<double> tau(4, 6.0);
    SolverConfig cfg;
    cfg.residual_tol = 1e-10;
    const StepSolution sol = solve_step({}, static_context(P, hist, tau), cfg);
    REQUIRE(sol.residual_trace.size() >= 4);
    for (std::size_t i = 1; i <= 3; ++i) CHECK(sol.residual_trace[i] < sol.residual_trace[i - 1]);
    CHECK(sol.residual_norm <= 1e-10);
  }
  SUBCASE("iteration limit reports the best residual") {
    RodParams P = RodParams::defaults();
    P.gravity = Vec3(-9.81, 0, 0);
    const HistoryBuffer hist = zero_history(P.node_count());
    const std::vector<double> tau(4, 6.0);
    SolverConfig cfg;
    cfg.max_iters = 1;
    cfg.residual_tol = 1e-14;
    try {
      solve_step({}, static_context(P, hist, tau), cfg);
      FAIL("expected NoConvergence");
    } catch (const NoConvergence& e) {
      CHECK(std::isfinite(e.best_residual));
      CHECK(e.best_residual > 0.0);
    }
  }
  SUBCASE("invalid solver settings") {
    SolverConfig cfg;
    cfg.residual_tol = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = SolverConfig{};
    cfg.max_iters = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
}

TEST_CASE("static cantilever matches small-deflection beam theory") {
  RodParams P = RodParams::defaults();
  P.youngs_modulus *= 5.0;  // keeps deflection/L near 1.3%
  P.derive();
  P.segments = 20;
  P.gravity = Vec3(-9.81, 0, 0);
  const StepSolution sol = solve_static(P, 0.0, SolverConfig{});
  const double EI = P.youngs_modulus * P.area_moment;
  const double oracle = P.density * P.area * 9.81 * std::pow(P.length, 4) / (8.0 * EI);
  const double deflection = -sol.nodes.back().p.x();
  CHECK(deflection / P.length < 0.02);
  CHECK(deflection == doctest::Approx(oracle).epsilon(0.05));
  CHECK(sol.residual_norm <= 1e-6);
}

TEST_CASE("pulling one side bends the rod toward it") {
  RodParams P = RodParams::defaults();
  const HistoryBuffer hist = zero_history(P.node_count());
  const std::vector<double> tau{7.0, 6.0, 5.0, 6.0};
  StepContext ctx{&P, BdfScheme::statics(), &hist, tau, nullptr, SpatialIntegrator::Rk4};
  const StepSolution sol = solve_step({}, ctx, SolverConfig{});
  CHECK(sol.nodes.back().p.x() > 1e-3);
  CHECK(std::abs(sol.nodes.back().p.y()) < 1e-9);
}

TEST_CASE("rollout with symmetric tensions stays upright") {
  const RodParams P = RodParams::defaults();
  const Trajectory traj = rollout(P, constant_controls(6.0, 40, P.dt, 4), 40, RolloutOptions{});
  CHECK(traj.size() == 41);
  for (const Snapshot& s : traj.snapshots) {
    const Vec3 tip = s.nodes.back().p;
    CHECK(std::hypot(tip.x(), tip.y()) <= 1e-8);
  }
}

TEST_CASE("sine rollout invariants") {
  const RodParams P = RodParams::defaults();
  const ControlSchedule c = sine_controls(6.0, 1.0, 1.5, 100, P.dt, 4);
  RolloutStats stats;
  const Trajectory traj = rollout(P, c, 100, RolloutOptions{}, &stats);
  REQUIRE(traj.size() == 101);
  REQUIRE(stats.residual_norms.size() == 100);
  for (double r : stats.residual_norms) CHECK(r <= 1e-6);
  double worst_norm = 0.0;
  for (const Snapshot& s : traj.snapshots)
    for (const SectionState& n : s.nodes) worst_norm = std::max(worst_norm, std::abs(n.h.norm() - 1.0));
  CHECK(worst_norm <= 1e-9);
  for (int k = 1; k <= 100; ++k) {
    const auto row = c.row(k - 1);
    CHECK(std::equal(row.begin(), row.end(), traj.snapshots[static_cast<std::size_t>(k)].tau.begin()));
  }

  SUBCASE("tip traces a closed loop") {
    // One period is 30 steps; compare the last period with the one before.
    const auto tips = traj.tip_positions();
    double diameter = 0.0, gap = 0.0;
    for (std::size_t i = 70; i <= 100; ++i) {
      for (std::size_t j = 70; j <= 100; ++j) diameter = std::max(diameter, (tips[i] - tips[j]).norm());
      gap = std::max(gap, (tips[i] - tips[i - 30]).norm());
    }
    CHECK(diameter > 0.01);
    CHECK(gap < 0.05 * diameter);
  }
  SUBCASE("warm start does not cost iterations") {
    RolloutOptions cold;
    cold.warm_start = false;
    RolloutStats cold_stats;
    rollout(P, c, 100, cold, &cold_stats);
    std::vector<int> warm_it(stats.iterations.begin() + 1, stats.iterations.end());
    std::vector<int> cold_it(cold_stats.iterations.begin() + 1, cold_stats.iterations.end());
    CHECK(median(warm_it) <= median(cold_it));
  }
  SUBCASE("deterministic") {
    const Trajectory again = rollout(P, c, 100, RolloutOptions{});
    for (std::size_t k = 0; k < traj.size(); ++k)
      for (std::size_t i = 0; i < traj.snapshots[k].nodes.size(); ++i) {
        CHECK(traj.snapshots[k].nodes[i].y() == again.snapshots[k].nodes[i].y());
        CHECK(traj.snapshots[k].nodes[i].z() == again.snapshots[k].nodes[i].z());
      }
  }
}

TEST_CASE("step response settles toward a new offset") {
  const RodParams P = RodParams::defaults();
  const std::array<int, 2> stepped{0, 1};
  const ControlSchedule c = step_controls(5.0, 6.5, 1.5, stepped, 100, P.dt, 4);
  const Trajectory traj = rollout(P, c, 100, RolloutOptions{});
  const auto tips = traj.tip_positions();
  CHECK(std::abs(tips[30].x()) < 1e-8);
  const double final_x = tips[100].x();
  CHECK(final_x > 1e-3);
  // The rate of change dies out: the last second moves far less than the first.
  CHECK(std::abs(tips[100].x() - tips[80].x()) < 0.05 * std::abs(tips[50].x() - tips[30].x()));
}

TEST_CASE("rollout argument checks") {
  const RodParams P = RodParams::defaults();
  CHECK_THROWS_AS(rollout(P, constant_controls(6.0, 5, P.dt, 4), 10, RolloutOptions{}), std::invalid_argument);
  CHECK_THROWS_AS(rollout(P, constant_controls(6.0, 5, P.dt, 3), 5, RolloutOptions{}), std::invalid_argument);
  const Trajectory zero = rollout(P, constant_controls(6.0, 0, P.dt, 4), 0, RolloutOptions{});
  CHECK(zero.size() == 1);
}
