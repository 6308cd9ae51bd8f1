#pragma once

#include "softrod/rod_model.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace softrod {

enum class ControlKind { Sine, Step, Random, Constant };

/// Tendon tensions, one row per time step (row i is issued at t = i*dt).
/// `base` is the uniform tension used for the stationary initial state.
struct ControlSchedule {
  ControlKind kind = ControlKind::Constant;
  double dt = 0.05;
  double base = 0.0;
  int tendon_count = 4;
  std::vector<double> tensions;  // row-major, steps x tendon_count

  int steps() const { return tendon_count > 0 ? static_cast<int>(tensions.size()) / tendon_count : 0; }
  std::span<const double> row(int step) const;
};

ControlSchedule constant_controls(double value, int steps, double dt, int tendon_count);

/// tau_i(t) = base + amplitude*sin(2 pi t / period + 2 pi i / tendon_count).
ControlSchedule sine_controls(double base, double amplitude, double period, int steps,
                              double dt, int tendon_count);

/// Tendons in `stepped_tendons` jump from base to `stepped` at the first
/// index with t >= t_step.
ControlSchedule step_controls(double base, double stepped, double t_step,
                              std::span<const int> stepped_tendons, int steps, double dt,
                              int tendon_count);

/// I.i.d. uniform tensions in [lo, hi], reproducible from `seed`.
ControlSchedule random_controls(double lo, double hi, std::uint64_t seed, int steps, double dt,
                                int tendon_count);

enum class Imperfection { None, NoSelfWeight, ShortLength, Stiff, StiffAndShort };

Imperfection parse_imperfection(const std::string& name);
std::string to_string(Imperfection variant);
std::string to_string(ControlKind kind);

inline constexpr double kShortLength = 0.4;
inline constexpr double kStiffModulus = 10e9;

/// Knowledge-model parameters for a given imperfection of the true robot.
RodParams make_imperfect(const RodParams& truth, Imperfection variant);

}  // namespace softrod
