#pragma once

#include "softrod/hybrid.hpp"
#include "softrod/mlp.hpp"
#include "softrod/rod_model.hpp"
#include "softrod/timestepper.hpp"
#include "softrod/trajectory.hpp"

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace softrod {

struct TrainConfig {
  double lr0 = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
  int plateau_patience = 80;
  double plateau_factor = 0.5;
  double plateau_threshold = 1e-4;  // relative improvement that resets patience
  int epochs = 500;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  std::vector<int> spatial_subset;  // empty: nodes 1..N
  InputMode input_mode = InputMode::Simulation;
  bool convexity_clamp = true;
  // Optimize in standardized input coordinates; folded back into W1, b1 on exit.
  bool standardize_inputs = true;
  // Return the parameters of the lowest-loss epoch instead of the last one.
  bool keep_best = true;

  void validate() const;
};

/// One observed snapshot (t != t0) with the BDF data that produced it.
struct TrainingSample {
  RodProfile observed;
  HistoryBuffer hist;
  double c0 = 0.0;
  std::vector<double> tau;
};

struct Dataset {
  std::vector<TrainingSample> samples;
  int node_count() const;
};

/// Rebuilds the per-snapshot BDF scheme and history terms from the
/// trajectory itself (BDF1 on the first step, BDF2 afterwards).
Dataset make_dataset(std::span<const Trajectory> trajectories, int bdf_order = 2);

struct OneStepPrediction {
  std::vector<Vec19> y;  // index n = node n; entry 0 unused
  std::vector<Vec6> z;
};

/// y~(s_n) = y(s_{n-1}) + ds * y~_s evaluated at the observed node n-1
/// (quaternion renormalized); z~(s_n) from the knowledge constitutive law at
/// the observed node n plus the network's strain channels.
OneStepPrediction one_step_predict(const TrainingSample& sample, const MlpModel* model,
                                   const RodParams& knowledge);

struct LossGrad {
  double loss = 0.0;
  Eigen::VectorXd grad;  // MlpModel::flatten() order
};

double loss(const MlpModel& model, const Dataset& data, const RodParams& knowledge,
            const TrainConfig& cfg);

/// Batched per-snapshot kernel, parallel over snapshots with a fixed-order
/// reduction (result independent of thread count).
LossGrad loss_and_grad(const MlpModel& model, const Dataset& data, const RodParams& knowledge,
                       const TrainConfig& cfg);

/// Node-by-node reference implementation of the same quantity.
LossGrad loss_and_grad_serial(const MlpModel& model, const Dataset& data,
                              const RodParams& knowledge, const TrainConfig& cfg);

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, int epoch) : std::runtime_error(what), epoch(epoch) {}
  int epoch;
};

struct TrainResult {
  MlpModel model;
  std::vector<double> loss_history;
  std::vector<double> lr_history;
  int best_epoch = 0;  // epoch whose parameters were returned
};

/// Adam with per-epoch weight clamping and a reduce-on-plateau schedule.
TrainResult train(MlpModel model, const Dataset& data, const RodParams& knowledge,
                  const TrainConfig& cfg);

/// Adds N(0, sigma^2) to every observed state channel (quaternion renormalized).
Dataset with_stabilization_noise(const Dataset& data, double sigma, std::uint64_t seed);

}  // namespace softrod
