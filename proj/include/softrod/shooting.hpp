#pragma once

#include "softrod/controls.hpp"
#include "softrod/mlp.hpp"
#include "softrod/rod_model.hpp"
#include "softrod/timestepper.hpp"
#include "softrod/trajectory.hpp"

#include <span>
#include <stdexcept>
#include <vector>

namespace softrod {

enum class SpatialIntegrator { Euler, Rk4 };

struct SolverConfig {
  double residual_tol = 1e-6;  // mixed N / N*m
  int max_iters = 50;
  double fd_epsilon = 1e-6;  // relative forward-difference step
  SpatialIntegrator integrator = SpatialIntegrator::Rk4;
  double damping = 0.5;  // backtracking factor
  int max_backtracks = 30;

  void validate() const;
};

/// Unknown internal force and moment at the clamped base.
struct ShootingGuess {
  Vec3 n0 = Vec3::Zero();
  Vec3 m0 = Vec3::Zero();

  Vec6 as_vector() const;
  static ShootingGuess from_vector(const Vec6& x);
};

/// Everything one spatial solve needs besides the root guess.
struct StepContext {
  const RodParams* params = nullptr;
  BdfScheme scheme;
  const HistoryBuffer* hist = nullptr;
  std::span<const double> tau;
  const MlpModel* model = nullptr;  // optional residual network
  SpatialIntegrator integrator = SpatialIntegrator::Rk4;
};

class DivergedIntegration : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NoConvergence : public std::runtime_error {
 public:
  NoConvergence(const std::string& what, double best_residual, int step_index = -1)
      : std::runtime_error(what), best_residual(best_residual), step_index(step_index) {}
  double best_residual;
  int step_index;
};

/// Fixed-step integration from the clamped base to the tip. Throws
/// DivergedIntegration on non-finite states.
RodProfile integrate_spatial(const ShootingGuess& guess, const StepContext& ctx);

/// [n(L); m(L)] for a free tip.
Vec6 distal_residual(const ShootingGuess& guess, const StepContext& ctx);

struct StepSolution {
  RodProfile nodes;
  ShootingGuess guess;
  int iterations = 0;
  double residual_norm = 0.0;
  std::vector<double> residual_trace;  // norm before each Newton update, then final
};

/// Damped Newton on the distal residual with a forward-difference Jacobian.
StepSolution solve_step(const ShootingGuess& start, const StepContext& ctx, const SolverConfig& cfg);

/// Static equilibrium under a uniform tension on every tendon.
StepSolution solve_static(const RodParams& params, double uniform_tension, const SolverConfig& cfg,
                          const MlpModel* model = nullptr);

struct RolloutStats {
  std::vector<int> iterations;  // per dynamic step
  std::vector<double> residual_norms;
};

struct RolloutOptions {
  SolverConfig solver;
  const MlpModel* model = nullptr;
  bool warm_start = true;
  int bdf_order = 2;
};

/// Implicit-shooting simulation: static upright start under the schedule's
/// base tension, then one BDF step per control row (row k-1 drives snapshot k).
Trajectory rollout(const RodParams& params, const ControlSchedule& controls, int steps,
                   const RolloutOptions& options, RolloutStats* stats = nullptr);

/// Same as rollout but starting from a given solved state.
Trajectory rollout_from(const RodParams& params, const Snapshot& initial,
                        const ShootingGuess& initial_guess, const ControlSchedule& controls,
                        int steps, const RolloutOptions& options, RolloutStats* stats = nullptr);

}  // namespace softrod
