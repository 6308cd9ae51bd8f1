#include "softrod/shooting.hpp"

#include "softrod/hybrid.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace softrod {

void SolverConfig::validate() const {
  if (!(residual_tol > 0.0)) throw std::invalid_argument("solver: residual_tol must be positive");
  if (max_iters < 1) throw std::invalid_argument("solver: max_iters must be at least 1");
  if (!(fd_epsilon > 0.0)) throw std::invalid_argument("solver: fd_epsilon must be positive");
  if (!(damping > 0.0 && damping < 1.0)) throw std::invalid_argument("solver: damping must be in (0, 1)");
}

Vec6 ShootingGuess::as_vector() const {
  Vec6 x;
  x << n0, m0;
  return x;
}

ShootingGuess ShootingGuess::from_vector(const Vec6& x) { return {x.head<3>(), x.tail<3>()}; }

namespace {

NodeHistory midpoint(const NodeHistory& a, const NodeHistory& b) {
  return {0.5 * (a.hv + b.hv), 0.5 * (a.hu + b.hu), 0.5 * (a.hq + b.hq), 0.5 * (a.hw + b.hw)};
}

SectionState from_y(const Vec19& y) {
  SectionState s;
  s.set_y(y);
  return s;
}

void renormalize_quaternion(Vec19& y) {
  const double norm = y.segment<4>(3).norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw DivergedIntegration("quaternion collapsed");
  y.segment<4>(3) /= norm;
}

struct Evaluated {
  RodProfile nodes;
  Vec6 residual;
  double norm;
};

Evaluated evaluate(const Vec6& x, const StepContext& ctx) {
  Evaluated e;
  e.nodes = integrate_spatial(ShootingGuess::from_vector(x), ctx);
  e.residual << e.nodes.back().n, e.nodes.back().m;
  e.norm = e.residual.norm();
  return e;
}

}  // namespace

RodProfile integrate_spatial(const ShootingGuess& guess, const StepContext& ctx) {
  const RodParams& P = *ctx.params;
  const int N = P.segments;
  const double ds = P.ds();
  const double c0 = ctx.scheme.c0;
  const auto& hist = ctx.hist->nodes;
  if (static_cast<int>(hist.size()) != N + 1)
    throw std::invalid_argument("integrate_spatial: history has wrong node count");

  auto eval = [&](const Vec19& y, const NodeHistory& h) {
    try {
      return hybrid_rhs(from_y(y), h, ctx.tau, P, c0, ctx.model);
    } catch (const std::domain_error& e) {
      throw DivergedIntegration(e.what());
    }
  };

  SectionState root;
  root.n = guess.n0;
  root.m = guess.m0;
  Vec19 y = root.y();
  if (!y.allFinite()) throw DivergedIntegration("non-finite shooting guess");

  RodProfile nodes(static_cast<std::size_t>(N + 1));
  NodeEvaluation here = eval(y, hist[0]);
  for (int k = 0; k < N; ++k) {
    SectionState& node = nodes[static_cast<std::size_t>(k)];
    node.set_y(y);
    node.set_z(here.z);

    const auto& h0 = hist[static_cast<std::size_t>(k)];
    const auto& h1 = hist[static_cast<std::size_t>(k + 1)];
    Vec19 next;
    if (ctx.integrator == SpatialIntegrator::Euler) {
      next = y + ds * here.y_s;
    } else {
      const NodeHistory mid = midpoint(h0, h1);
      const Vec19 k1 = here.y_s;
      const Vec19 k2 = eval(y + 0.5 * ds * k1, mid).y_s;
      const Vec19 k3 = eval(y + 0.5 * ds * k2, mid).y_s;
      const Vec19 k4 = eval(y + ds * k3, h1).y_s;
      next = y + (ds / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    if (!next.allFinite())
      throw DivergedIntegration("spatial integration diverged at node " + std::to_string(k + 1));
    renormalize_quaternion(next);
    y = next;
    here = eval(y, h1);
    if (!here.y_s.allFinite() || !here.z.allFinite())
      throw DivergedIntegration("non-finite derivative at node " + std::to_string(k + 1));
  }
  nodes.back().set_y(y);
  nodes.back().set_z(here.z);
  return nodes;
}

Vec6 distal_residual(const ShootingGuess& guess, const StepContext& ctx) {
  const RodProfile nodes = integrate_spatial(guess, ctx);
  Vec6 r;
  r << nodes.back().n, nodes.back().m;
  return r;
}

StepSolution solve_step(const ShootingGuess& start, const StepContext& ctx, const SolverConfig& cfg) {
  cfg.validate();
  Vec6 x = start.as_vector();
  Evaluated current = evaluate(x, ctx);

  StepSolution sol;
  sol.residual_trace.push_back(current.norm);
  int iter = 0;
  while (current.norm > cfg.residual_tol) {
    if (iter >= cfg.max_iters)
      throw NoConvergence("shooting did not converge in " + std::to_string(cfg.max_iters) +
                              " iterations (residual " + std::to_string(current.norm) + ")",
                          current.norm);

    Eigen::Matrix<double, 6, 6> J;
    for (int j = 0; j < 6; ++j) {
      Vec6 xp = x;
      const double h = cfg.fd_epsilon * std::max(1.0, std::abs(x[j]));
      xp[j] += h;
      J.col(j) = (evaluate(xp, ctx).residual - current.residual) / h;
    }
    const Vec6 dx = -J.colPivHouseholderQr().solve(current.residual);
    if (!dx.allFinite()) throw NoConvergence("singular shooting Jacobian", current.norm);

    double step = 1.0;
    bool accepted = false;
    for (int b = 0; b <= cfg.max_backtracks; ++b, step *= cfg.damping) {
      try {
        Evaluated trial = evaluate(x + step * dx, ctx);
        if (trial.norm < current.norm) {
          x += step * dx;
          current = std::move(trial);
          accepted = true;
          break;
        }
      } catch (const DivergedIntegration&) {
        // shrink and retry
      }
    }
    ++iter;
    if (!accepted)
      throw NoConvergence("line search failed to reduce the distal residual", current.norm);
    sol.residual_trace.push_back(current.norm);
  }
  sol.nodes = std::move(current.nodes);
  sol.guess = ShootingGuess::from_vector(x);
  sol.iterations = iter;
  sol.residual_norm = current.norm;
  return sol;
}

StepSolution solve_static(const RodParams& params, double uniform_tension, const SolverConfig& cfg,
                          const MlpModel* model) {
  const std::vector<double> tau(static_cast<std::size_t>(params.tendon_count()), uniform_tension);
  const HistoryBuffer hist = zero_history(params.node_count());
  StepContext ctx{&params, BdfScheme::statics(), &hist, tau, model, cfg.integrator};
  // Axial guess: tendon pull plus self weight.
  ShootingGuess guess;
  guess.n0.z() = uniform_tension * params.tendon_count() -
                 (params.include_self_weight ? params.density * params.area * params.length *
                                                   -params.gravity.z()
                                             : 0.0);
  return solve_step(guess, ctx, cfg);
}

Trajectory rollout(const RodParams& params, const ControlSchedule& controls, int steps,
                   const RolloutOptions& options, RolloutStats* stats) {
  StepSolution init = solve_static(params, controls.base, options.solver, options.model);
  Snapshot first;
  first.t = 0.0;
  first.nodes = std::move(init.nodes);
  first.tau.assign(static_cast<std::size_t>(params.tendon_count()), controls.base);
  return rollout_from(params, first, init.guess, controls, steps, options, stats);
}

Trajectory rollout_from(const RodParams& params, const Snapshot& initial,
                        const ShootingGuess& initial_guess, const ControlSchedule& controls,
                        int steps, const RolloutOptions& options, RolloutStats* stats) {
  if (steps < 0) throw std::invalid_argument("rollout: negative step count");
  if (controls.steps() < steps)
    throw std::invalid_argument("rollout: control schedule shorter than the horizon");
  if (controls.tendon_count != params.tendon_count())
    throw std::invalid_argument("rollout: control schedule has wrong tendon count");

  Trajectory traj;
  traj.dt = params.dt;
  traj.snapshots.reserve(static_cast<std::size_t>(steps + 1));
  traj.snapshots.push_back(initial);

  HistoryTracker tracker(params.dt, options.bdf_order);
  tracker.push(initial.nodes);
  ShootingGuess guess = initial_guess;
  for (int k = 1; k <= steps; ++k) {
    const std::span<const double> tau = controls.row(k - 1);
    const HistoryBuffer hist = tracker.next_history();
    StepContext ctx{&params, tracker.next_scheme(), &hist, tau, options.model,
                    options.solver.integrator};
    StepSolution sol;
    try {
      sol = solve_step(options.warm_start ? guess : ShootingGuess{}, ctx, options.solver);
    } catch (const NoConvergence& e) {
      throw NoConvergence(std::string(e.what()) + " at step " + std::to_string(k),
                          e.best_residual, k);
    } catch (const DivergedIntegration& e) {
      throw NoConvergence(std::string(e.what()) + " at step " + std::to_string(k),
                          std::numeric_limits<double>::infinity(), k);
    }
    if (stats) {
      stats->iterations.push_back(sol.iterations);
      stats->residual_norms.push_back(sol.residual_norm);
    }
    guess = sol.guess;
    tracker.push(sol.nodes);
    Snapshot snap;
    snap.t = k * params.dt;
    snap.nodes = std::move(sol.nodes);
    snap.tau.assign(tau.begin(), tau.end());
    traj.snapshots.push_back(std::move(snap));
  }
  return traj;
}

}  // namespace softrod
