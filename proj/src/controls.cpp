#include "softrod/controls.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace softrod {

std::span<const double> ControlSchedule::row(int step) const {
  if (step < 0 || step >= steps()) throw std::out_of_range("control schedule: step out of range");
  return std::span<const double>(tensions).subspan(
      static_cast<std::size_t>(step) * static_cast<std::size_t>(tendon_count),
      static_cast<std::size_t>(tendon_count));
}

namespace {

ControlSchedule blank(ControlKind kind, double base, int steps, double dt, int tendon_count) {
  if (steps < 0) throw std::invalid_argument("control schedule: negative step count");
  if (tendon_count < 1) throw std::invalid_argument("control schedule: need at least one tendon");
  if (!(dt > 0.0)) throw std::invalid_argument("control schedule: dt must be positive");
  ControlSchedule c;
  c.kind = kind;
  c.dt = dt;
  c.base = base;
  c.tendon_count = tendon_count;
  c.tensions.assign(static_cast<std::size_t>(steps) * static_cast<std::size_t>(tendon_count), base);
  return c;
}

}  // namespace

ControlSchedule constant_controls(double value, int steps, double dt, int tendon_count) {
  if (value < 0.0) throw std::invalid_argument("constant controls: negative tension");
  return blank(ControlKind::Constant, value, steps, dt, tendon_count);
}

ControlSchedule sine_controls(double base, double amplitude, double period, int steps, double dt,
                              int tendon_count) {
  if (amplitude < 0.0 || base < amplitude)
    throw std::invalid_argument("sine controls: need base >= amplitude >= 0");
  if (!(period > 0.0)) throw std::invalid_argument("sine controls: period must be positive");
  ControlSchedule c = blank(ControlKind::Sine, base, steps, dt, tendon_count);
  const double two_pi = 2.0 * std::numbers::pi;
  for (int k = 0; k < steps; ++k) {
    const double t = k * dt;
    for (int i = 0; i < tendon_count; ++i) {
      const double phase = two_pi * t / period + two_pi * i / tendon_count;
      c.tensions[static_cast<std::size_t>(k * tendon_count + i)] = base + amplitude * std::sin(phase);
    }
  }
  return c;
}

ControlSchedule step_controls(double base, double stepped, double t_step,
                              std::span<const int> stepped_tendons, int steps, double dt,
                              int tendon_count) {
  if (base < 0.0 || stepped < 0.0) throw std::invalid_argument("step controls: negative tension");
  if (t_step < 0.0 || t_step > steps * dt)
    throw std::invalid_argument("step controls: step time outside the horizon");
  for (int idx : stepped_tendons)
    if (idx < 0 || idx >= tendon_count)
      throw std::invalid_argument("step controls: invalid tendon index " + std::to_string(idx));
  ControlSchedule c = blank(ControlKind::Step, base, steps, dt, tendon_count);
  // Small slack so that t_step = 30*dt lands on index 30 despite rounding.
  const int first = static_cast<int>(std::ceil(t_step / dt - 1e-9));
  for (int k = first; k < steps; ++k)
    for (int idx : stepped_tendons) c.tensions[static_cast<std::size_t>(k * tendon_count + idx)] = stepped;
  return c;
}

ControlSchedule random_controls(double lo, double hi, std::uint64_t seed, int steps, double dt,
                                int tendon_count) {
  if (lo > hi || lo < 0.0) throw std::invalid_argument("random controls: need 0 <= lo <= hi");
  ControlSchedule c = blank(ControlKind::Random, 0.5 * (lo + hi), steps, dt, tendon_count);
  if (lo == hi) return c;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& tau : c.tensions) tau = dist(rng);
  return c;
}

Imperfection parse_imperfection(const std::string& name) {
  if (name == "none") return Imperfection::None;
  if (name == "no_self_weight") return Imperfection::NoSelfWeight;
  if (name == "short_length") return Imperfection::ShortLength;
  if (name == "stiff") return Imperfection::Stiff;
  if (name == "stiff_and_short") return Imperfection::StiffAndShort;
  throw std::invalid_argument("unknown imperfection: " + name);
}

std::string to_string(Imperfection variant) {
  switch (variant) {
    case Imperfection::None: return "none";
    case Imperfection::NoSelfWeight: return "no_self_weight";
    case Imperfection::ShortLength: return "short_length";
    case Imperfection::Stiff: return "stiff";
    case Imperfection::StiffAndShort: return "stiff_and_short";
  }
  return "unknown";
}

std::string to_string(ControlKind kind) {
  switch (kind) {
    case ControlKind::Sine: return "sine";
    case ControlKind::Step: return "step";
    case ControlKind::Random: return "random";
    case ControlKind::Constant: return "constant";
  }
  return "unknown";
}

RodParams make_imperfect(const RodParams& truth, Imperfection variant) {
  RodParams out = truth;
  switch (variant) {
    case Imperfection::None: break;
    case Imperfection::NoSelfWeight: out.include_self_weight = false; break;
    case Imperfection::ShortLength: out.length = kShortLength; break;
    case Imperfection::Stiff: out.youngs_modulus = kStiffModulus; break;
    case Imperfection::StiffAndShort:
      out.length = kShortLength;
      out.youngs_modulus = kStiffModulus;
      break;
  }
  if (variant == Imperfection::Stiff || variant == Imperfection::StiffAndShort) out.derive();
  return out;
}

}  // namespace softrod
