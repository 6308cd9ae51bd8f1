#pragma once

#include "softrod/controls.hpp"
#include "softrod/experiment.hpp"
#include "softrod/rod_model.hpp"
#include "softrod/shooting.hpp"
#include "softrod/training.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace softrod {

struct ControlSpec {
  ControlKind kind = ControlKind::Sine;
  int steps = 100;
  double base = 6.0;
  double amplitude = 1.0;
  double period = 1.5;
  double stepped = 6.5;
  double t_step = 1.5;
  std::vector<int> stepped_tendons{0, 1};
  double lo = 4.9;
  double hi = 11.8;

  ControlSchedule build(double dt, int tendon_count, std::uint64_t seed) const;
};

/// Sections [rod], [controls], [solver], [training], [experiment]. Every key
/// is optional; defaults are the reference robot and training setup.
struct AppConfig {
  RodParams rod = RodParams::defaults();
  ControlSpec controls;
  SolverConfig solver;
  int bdf_order = 2;
  TrainConfig training;
  int hidden = kHiddenDim;
  double output_init_scale = 0.01;
  Imperfection variant = Imperfection::NoSelfWeight;
  std::vector<std::uint64_t> seeds{0};
  int eval_steps = 100;

  RolloutOptions rollout_options() const;
  ExperimentConfig experiment() const;

  /// Euler spatial integration, 1500 epochs and weight decay 1e-4.
  static AppConfig for_experiments();
};

/// Keys absent from the file keep their value from `defaults`. Throws
/// std::invalid_argument naming the offending key.
AppConfig parse_config(std::istream& in, const AppConfig& defaults = {});
AppConfig load_config(const std::string& path, const AppConfig& defaults = {});

}  // namespace softrod
