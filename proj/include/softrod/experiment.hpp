#pragma once

#include "softrod/controls.hpp"
#include "softrod/metrics.hpp"
#include "softrod/mlp.hpp"
#include "softrod/shooting.hpp"
#include "softrod/training.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace softrod {

struct NamedControls {
  std::string name;
  ControlSchedule controls;
};

struct ExperimentConfig {
  RodParams truth = RodParams::defaults();
  Imperfection variant = Imperfection::NoSelfWeight;
  std::vector<ControlSchedule> train_controls;  // one trajectory each
  int train_steps = 30;
  std::vector<NamedControls> eval_controls;
  int eval_steps = 100;
  SolverConfig solver;
  TrainConfig training;
  int hidden = kHiddenDim;
  double output_init_scale = 0.01;
};

/// Two sines (periods 0.5 s and 1 s, base 6 N, amplitude 1 N), 30 steps each.
std::vector<ControlSchedule> default_training_controls(double dt, int tendon_count);
/// 1.5 s sine (6 N +- 1 N) and the 5 N -> 6.5 N step on tendons 0 and 1 at 1.5 s.
std::vector<NamedControls> default_eval_controls(double dt, int tendon_count, int steps = 100);

/// Euler spatial integration, 1500 epochs, weight decay 1e-4.
ExperimentConfig default_experiment(Imperfection variant);

struct TrainedKnode {
  RodParams knowledge;
  TrainResult result;
};

/// Simulates the training sines on the true rod and fits the residual network.
TrainedKnode train_knode(const ExperimentConfig& cfg, std::uint64_t seed);

struct ExperimentRow {
  std::string variant;
  std::string control;
  std::uint64_t seed = 0;
  MetricReport baseline;
  MetricReport knode;

  double dtw_change_percent() const;
  double mse_change_percent() const;
};

/// Truth, knowledge-only and hybrid rollouts from the upright stationary
/// state for every evaluation schedule.
std::vector<ExperimentRow> evaluate_knode(const ExperimentConfig& cfg, const TrainedKnode& trained,
                                          std::uint64_t seed);

/// Trains once per seed and evaluates on every schedule. Failures are
/// rethrown with a variant/control/seed prefix; solver and training
/// failures keep their exception type.
std::vector<ExperimentRow> run_experiment(const ExperimentConfig& cfg,
                                          const std::vector<std::uint64_t>& seeds);

/// Columns: variant, control, seed, baseline_dtw, knode_dtw, baseline_mse,
/// knode_mse, percent_change (DTW), mse_percent_change.
void write_report_csv(const std::vector<ExperimentRow>& rows, std::ostream& out);

}  // namespace softrod
