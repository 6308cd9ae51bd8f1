#include "softrod/training.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace softrod {

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw std::invalid_argument("train: lr0 must be positive");
  if (!(plateau_factor >= 0.0 && plateau_factor < 1.0))
    throw std::invalid_argument("train: plateau_factor must be in [0, 1)");
  if (epochs < 0) throw std::invalid_argument("train: negative epoch count");
  if (weight_decay < 0.0 || noise_sigma < 0.0)
    throw std::invalid_argument("train: weight_decay and noise_sigma must be non-negative");
}

int Dataset::node_count() const {
  return samples.empty() ? 0 : static_cast<int>(samples.front().observed.size());
}

Dataset make_dataset(std::span<const Trajectory> trajectories, int bdf_order) {
  Dataset data;
  for (const Trajectory& traj : trajectories) {
    if (traj.snapshots.empty()) continue;
    HistoryTracker tracker(traj.dt, bdf_order);
    tracker.push(traj.snapshots.front().nodes);
    for (std::size_t k = 1; k < traj.snapshots.size(); ++k) {
      const Snapshot& snap = traj.snapshots[k];
      TrainingSample sample;
      sample.observed = snap.nodes;
      sample.hist = tracker.next_history();
      sample.c0 = tracker.next_scheme().c0;
      sample.tau = snap.tau;
      data.samples.push_back(std::move(sample));
      tracker.push(snap.nodes);
    }
  }
  return data;
}

namespace {

std::vector<int> resolve_subset(const TrainConfig& cfg, int node_count) {
  std::vector<int> subset = cfg.spatial_subset;
  if (subset.empty())
    for (int n = 1; n < node_count; ++n) subset.push_back(n);
  for (int n : subset)
    if (n < 1 || n >= node_count)
      throw std::invalid_argument("spatial subset entry " + std::to_string(n) +
                                  " outside 1.." + std::to_string(node_count - 1));
  return subset;
}

void check_dataset(const Dataset& data, const RodParams& knowledge) {
  if (data.samples.empty()) throw std::invalid_argument("training dataset is empty");
  for (const TrainingSample& s : data.samples) {
    if (static_cast<int>(s.observed.size()) != knowledge.node_count() ||
        s.hist.nodes.size() != s.observed.size())
      throw std::invalid_argument("training sample node count does not match the knowledge model");
    if (static_cast<int>(s.tau.size()) != knowledge.tendon_count())
      throw std::invalid_argument("training sample tendon count does not match the knowledge model");
  }
}

/// Knowledge strains at an observed node (y taken from the observation).
SectionState with_knowledge_strains(const SectionState& obs, const NodeHistory& hist,
                                    const RodParams& kn, double c0) {
  SectionState s = obs;
  const Strains z = constitutive_vu(s.h, s.n, s.m, hist.hv, hist.hu, kn, c0);
  s.v = z.v;
  s.u = z.u;
  return s;
}

/// Residuals of one node prediction and d(sq. error)/d(network output) at the
/// predecessor (y part) and at the node itself (z part).
struct NodeTerms {
  double sq_error = 0.0;
  Eigen::Matrix<double, kResidualDim, 1> grad_prev;
  Vec6 grad_self_z;
};

NodeTerms node_terms(const SectionState& prev_kn, const NodeHistory& prev_hist,
                     const Eigen::Ref<const Eigen::VectorXd>& f_prev, const SectionState& self_kn,
                     const Eigen::Ref<const Eigen::VectorXd>& f_self, const SectionState& self_obs,
                     std::span<const double> tau, const RodParams& kn, double c0) {
  const double ds = kn.ds();
  SectionState corrected = prev_kn;
  corrected.v += f_prev.segment<3>(19);
  corrected.u += f_prev.segment<3>(22);
  const Vec19 y_s = cosserat_rhs(corrected, prev_hist, tau, kn, c0) + f_prev.head<19>();
  Vec19 pred = prev_kn.y() + ds * y_s;
  const Vec4 h_raw = pred.segment<4>(3);
  const double h_norm = h_raw.norm();
  const Vec4 h_unit = h_raw / h_norm;
  pred.segment<4>(3) = h_unit;

  const Vec19 ry = pred - self_obs.y();
  const Vec6 rz = self_kn.z() + f_self.tail<6>() - self_obs.z();

  NodeTerms t;
  t.sq_error = ry.squaredNorm() + rz.squaredNorm();
  Vec19 gy = 2.0 * ry;
  const Vec4 gh = gy.segment<4>(3);
  gy.segment<4>(3) = (gh - h_unit * h_unit.dot(gh)) / h_norm;
  t.grad_prev.head<19>() = ds * gy;
  t.grad_prev.tail<6>() = ds * cosserat_rhs_z_jacobian(prev_kn, kn, c0).transpose() * gy;
  t.grad_self_z = 2.0 * rz;
  return t;
}

/// Per-feature affine map applied to network inputs while optimizing.
struct FeatureScaling {
  Eigen::VectorXd mean;
  Eigen::VectorXd inv_std;
};

/// Batched evaluation of one snapshot: accumulates its squared error and the
/// (unscaled) gradient into `grad` (flatten order).
double snapshot_kernel(const MlpModel& model, const TrainingSample& sample, const RodParams& kn,
                       const std::vector<int>& subset, InputMode mode, Eigen::VectorXd* grad,
                       const FeatureScaling* scaling = nullptr) {
  const int nodes = static_cast<int>(sample.observed.size());
  std::vector<SectionState> states(static_cast<std::size_t>(nodes));
  Eigen::MatrixXd X(model.input_dim(), nodes);
  for (int k = 0; k < nodes; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    states[uk] = with_knowledge_strains(sample.observed[uk], sample.hist.nodes[uk], kn, sample.c0);
    X.col(k) = make_features(states[uk], sample.hist.nodes[uk], sample.tau, mode);
  }
  if (scaling)
    X = (X.colwise() - scaling->mean).array().colwise() * scaling->inv_std.array();
  const Eigen::MatrixXd H = (model.W1 * X).colwise() + model.b1;
  const Eigen::MatrixXd A = H.unaryExpr([](double x) { return elu(x); });
  const Eigen::MatrixXd F = (model.W2 * A).colwise() + model.b2;

  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(model.output_dim(), nodes);
  double sq = 0.0;
  for (int n : subset) {
    const auto un = static_cast<std::size_t>(n);
    const NodeTerms t = node_terms(states[un - 1], sample.hist.nodes[un - 1], F.col(n - 1),
                                   states[un], F.col(n), sample.observed[un], sample.tau, kn,
                                   sample.c0);
    sq += t.sq_error;
    if (grad) {
      G.col(n - 1) += t.grad_prev;
      G.col(n).tail<6>() += t.grad_self_z;
    }
  }
  if (!grad) return sq;

  const Eigen::MatrixXd dW2 = G * A.transpose();
  const Eigen::VectorXd db2 = G.rowwise().sum();
  const Eigen::MatrixXd GH =
      (model.W2.transpose() * G).cwiseProduct(H.unaryExpr([](double x) { return elu_grad(x); }));
  const Eigen::MatrixXd dW1 = GH * X.transpose();
  const Eigen::VectorXd db1 = GH.rowwise().sum();

  Eigen::VectorXd& g = *grad;
  Eigen::Index k = 0;
  for (const Eigen::MatrixXd* W : {&dW1, &dW2})
    for (Eigen::Index i = 0; i < W->rows(); ++i)
      for (Eigen::Index j = 0; j < W->cols(); ++j) g[k++] += (*W)(i, j);
  g.segment(k, db1.size()) += db1;
  k += db1.size();
  g.segment(k, db2.size()) += db2;
  return sq;
}

void add_regularizer(const MlpModel& model, double weight_decay, LossGrad& out) {
  if (weight_decay == 0.0) return;
  out.loss += weight_decay * (model.W1.squaredNorm() + model.W2.squaredNorm());
  const Eigen::VectorXd theta = model.flatten();
  const Eigen::VectorXd mask = model.weight_mask();
  out.grad += 2.0 * weight_decay * theta.cwiseProduct(mask);
}

}  // namespace

OneStepPrediction one_step_predict(const TrainingSample& sample, const MlpModel* model,
                                   const RodParams& kn) {
  const int nodes = static_cast<int>(sample.observed.size());
  const InputMode mode = model ? input_mode_for(*model, kn.tendon_count()) : InputMode::Simulation;
  OneStepPrediction out;
  out.y.assign(static_cast<std::size_t>(nodes), Vec19::Zero());
  out.z.assign(static_cast<std::size_t>(nodes), Vec6::Zero());

  std::vector<SectionState> states(static_cast<std::size_t>(nodes));
  std::vector<Eigen::VectorXd> f(static_cast<std::size_t>(nodes),
                                 Eigen::VectorXd::Zero(kResidualDim));
  for (int k = 0; k < nodes; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    states[uk] = with_knowledge_strains(sample.observed[uk], sample.hist.nodes[uk], kn, sample.c0);
    if (model)
      f[uk] = mlp_forward(make_features(states[uk], sample.hist.nodes[uk], sample.tau, mode), *model);
  }
  for (int n = 1; n < nodes; ++n) {
    const auto un = static_cast<std::size_t>(n);
    SectionState corrected = states[un - 1];
    corrected.v += f[un - 1].segment<3>(19);
    corrected.u += f[un - 1].segment<3>(22);
    const Vec19 y_s =
        cosserat_rhs(corrected, sample.hist.nodes[un - 1], sample.tau, kn, sample.c0) +
        f[un - 1].head<19>();
    Vec19 pred = states[un - 1].y() + kn.ds() * y_s;
    pred.segment<4>(3).normalize();
    out.y[un] = pred;
    out.z[un] = states[un].z() + f[un].tail<6>();
  }
  return out;
}

double loss(const MlpModel& model, const Dataset& data, const RodParams& kn, const TrainConfig& cfg) {
  check_dataset(data, kn);
  const std::vector<int> subset = resolve_subset(cfg, data.node_count());
  const InputMode mode = input_mode_for(model, kn.tendon_count());
  double sq = 0.0;
  for (const TrainingSample& s : data.samples) sq += snapshot_kernel(model, s, kn, subset, mode, nullptr);
  double value = sq / static_cast<double>(subset.size() * data.samples.size());
  value += cfg.weight_decay * (model.W1.squaredNorm() + model.W2.squaredNorm());
  return value;
}

namespace {

LossGrad batched_loss_and_grad(const MlpModel& model, const Dataset& data, const RodParams& kn,
                               const TrainConfig& cfg, const FeatureScaling* scaling) {
  check_dataset(data, kn);
  const std::vector<int> subset = resolve_subset(cfg, data.node_count());
  const InputMode mode = input_mode_for(model, kn.tendon_count());
  const auto P = static_cast<Eigen::Index>(model.parameter_count());
  const auto S = static_cast<long>(data.samples.size());

  std::vector<double> sq(static_cast<std::size_t>(S), 0.0);
  std::vector<Eigen::VectorXd> partial(static_cast<std::size_t>(S));
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < S; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    partial[ui] = Eigen::VectorXd::Zero(P);
    sq[ui] = snapshot_kernel(model, data.samples[ui], kn, subset, mode, &partial[ui], scaling);
  }

  LossGrad out;
  out.grad = Eigen::VectorXd::Zero(P);
  for (std::size_t i = 0; i < partial.size(); ++i) {
    out.loss += sq[i];
    out.grad += partial[i];
  }
  const double scale = 1.0 / static_cast<double>(subset.size() * data.samples.size());
  out.loss *= scale;
  out.grad *= scale;
  add_regularizer(model, cfg.weight_decay, out);
  return out;
}

FeatureScaling feature_scaling(const Dataset& data, const RodParams& kn, InputMode mode) {
  const int dim = feature_dim(mode, kn.tendon_count());
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim), sum_sq = Eigen::VectorXd::Zero(dim);
  double count = 0.0;
  for (const TrainingSample& s : data.samples)
    for (std::size_t k = 0; k < s.observed.size(); ++k) {
      const SectionState st = with_knowledge_strains(s.observed[k], s.hist.nodes[k], kn, s.c0);
      const Eigen::VectorXd x = make_features(st, s.hist.nodes[k], s.tau, mode);
      sum += x;
      sum_sq += x.cwiseAbs2();
      count += 1.0;
    }
  FeatureScaling sc;
  sc.mean = sum / count;
  sc.inv_std.resize(dim);
  for (int i = 0; i < dim; ++i) {
    const double var = std::max(0.0, sum_sq[i] / count - sc.mean[i] * sc.mean[i]);
    const double sd = std::sqrt(var);
    sc.inv_std[i] = sd > 1e-9 * std::max(1.0, std::abs(sc.mean[i])) ? 1.0 / sd : 1.0;
  }
  return sc;
}

// x' = (x - mean) * inv_std, so W1' = W1 / inv_std and b1' = b1 + W1 * mean.
MlpModel to_scaled(const MlpModel& raw, const FeatureScaling& sc) {
  MlpModel m = raw;
  m.W1 = raw.W1 * sc.inv_std.cwiseInverse().asDiagonal();
  m.b1 = raw.b1 + raw.W1 * sc.mean;
  return m;
}

MlpModel to_raw(const MlpModel& scaled, const FeatureScaling& sc) {
  MlpModel m = scaled;
  m.W1 = scaled.W1 * sc.inv_std.asDiagonal();
  m.b1 = scaled.b1 - m.W1 * sc.mean;
  return m;
}

}  // namespace

LossGrad loss_and_grad(const MlpModel& model, const Dataset& data, const RodParams& kn,
                       const TrainConfig& cfg) {
  return batched_loss_and_grad(model, data, kn, cfg, nullptr);
}

LossGrad loss_and_grad_serial(const MlpModel& model, const Dataset& data, const RodParams& kn,
                              const TrainConfig& cfg) {
  check_dataset(data, kn);
  const std::vector<int> subset = resolve_subset(cfg, data.node_count());
  const InputMode mode = input_mode_for(model, kn.tendon_count());
  const int d_hidden = model.hidden_dim();

  Eigen::MatrixXd dW1 = Eigen::MatrixXd::Zero(model.W1.rows(), model.W1.cols());
  Eigen::MatrixXd dW2 = Eigen::MatrixXd::Zero(model.W2.rows(), model.W2.cols());
  Eigen::VectorXd db1 = Eigen::VectorXd::Zero(model.b1.size());
  Eigen::VectorXd db2 = Eigen::VectorXd::Zero(model.b2.size());
  double sq = 0.0;

  // Backpropagates dL/df at one network input.
  auto backprop = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& g_out) {
    Eigen::VectorXd pre = model.W1 * x + model.b1;
    Eigen::VectorXd act(d_hidden), g_hidden(d_hidden);
    for (int j = 0; j < d_hidden; ++j) act[j] = elu(pre[j]);
    dW2 += g_out * act.transpose();
    db2 += g_out;
    const Eigen::VectorXd g_act = model.W2.transpose() * g_out;
    for (int j = 0; j < d_hidden; ++j) g_hidden[j] = g_act[j] * elu_grad(pre[j]);
    dW1 += g_hidden * x.transpose();
    db1 += g_hidden;
  };

  for (const TrainingSample& sample : data.samples) {
    for (int n : subset) {
      const auto un = static_cast<std::size_t>(n);
      const SectionState prev = with_knowledge_strains(sample.observed[un - 1],
                                                       sample.hist.nodes[un - 1], kn, sample.c0);
      const SectionState self =
          with_knowledge_strains(sample.observed[un], sample.hist.nodes[un], kn, sample.c0);
      const Eigen::VectorXd x_prev = make_features(prev, sample.hist.nodes[un - 1], sample.tau, mode);
      const Eigen::VectorXd x_self = make_features(self, sample.hist.nodes[un], sample.tau, mode);
      const Eigen::VectorXd f_prev = mlp_forward(x_prev, model);
      const Eigen::VectorXd f_self = mlp_forward(x_self, model);
      const NodeTerms t = node_terms(prev, sample.hist.nodes[un - 1], f_prev, self, f_self,
                                     sample.observed[un], sample.tau, kn, sample.c0);
      sq += t.sq_error;
      backprop(x_prev, t.grad_prev);
      Eigen::VectorXd g_self = Eigen::VectorXd::Zero(kResidualDim);
      g_self.tail<6>() = t.grad_self_z;
      backprop(x_self, g_self);
    }
  }

  MlpModel shaped = model;
  shaped.W1 = dW1;
  shaped.W2 = dW2;
  shaped.b1 = db1;
  shaped.b2 = db2;
  const double scale = 1.0 / static_cast<double>(subset.size() * data.samples.size());
  LossGrad out{sq * scale, shaped.flatten() * scale};
  add_regularizer(model, cfg.weight_decay, out);
  return out;
}

Dataset with_stabilization_noise(const Dataset& data, double sigma, std::uint64_t seed) {
  Dataset noisy = data;
  if (sigma == 0.0) return noisy;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  for (TrainingSample& s : noisy.samples) {
    for (SectionState& node : s.observed) {
      Vec19 y = node.y();
      Vec6 z = node.z();
      for (int i = 0; i < 19; ++i) y[i] += normal(rng);
      for (int i = 0; i < 6; ++i) z[i] += normal(rng);
      y.segment<4>(3).normalize();
      node.set_y(y);
      node.set_z(z);
    }
  }
  return noisy;
}

TrainResult train(MlpModel model, const Dataset& data, const RodParams& kn, const TrainConfig& cfg) {
  cfg.validate();
  check_dataset(data, kn);
  if (cfg.convexity_clamp) model.clamp_weights();
  model.convexity_clamp = cfg.convexity_clamp;
  const InputMode mode = input_mode_for(model, kn.tendon_count());
  FeatureScaling scaling;
  const FeatureScaling* sc = nullptr;
  if (cfg.standardize_inputs) {
    scaling = feature_scaling(data, kn, mode);
    sc = &scaling;
    model = to_scaled(model, scaling);
  }

  const auto P = static_cast<Eigen::Index>(model.parameter_count());
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(P);
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(P);
  double lr = cfg.lr0;
  double best = std::numeric_limits<double>::infinity();
  int bad_epochs = 0;
  MlpModel best_model = model;
  double best_seen = std::numeric_limits<double>::infinity();

  TrainResult result;
  result.loss_history.reserve(static_cast<std::size_t>(cfg.epochs));
  std::mt19937_64 noise_seeds(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const LossGrad lg =
        cfg.noise_sigma > 0.0
            ? batched_loss_and_grad(
                  model, with_stabilization_noise(data, cfg.noise_sigma, noise_seeds()), kn, cfg, sc)
            : batched_loss_and_grad(model, data, kn, cfg, sc);
    if (!std::isfinite(lg.loss) || !lg.grad.allFinite())
      throw TrainingDiverged("non-finite training loss at epoch " + std::to_string(epoch), epoch);
    result.loss_history.push_back(lg.loss);
    result.lr_history.push_back(lr);
    if (cfg.keep_best && lg.loss < best_seen) {
      best_seen = lg.loss;
      best_model = model;
      result.best_epoch = epoch;
    }

    const int step = epoch + 1;
    m1 = cfg.adam_beta1 * m1 + (1.0 - cfg.adam_beta1) * lg.grad;
    m2 = cfg.adam_beta2 * m2 + (1.0 - cfg.adam_beta2) * lg.grad.cwiseAbs2();
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, step);
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, step);
    Eigen::VectorXd theta = model.flatten();
    theta.array() -= lr * (m1.array() / bc1) / ((m2.array() / bc2).sqrt() + cfg.adam_eps);
    model.unflatten(theta);
    if (cfg.convexity_clamp) model.clamp_weights();

    if (lg.loss < best * (1.0 - cfg.plateau_threshold)) {
      best = lg.loss;
      bad_epochs = 0;
    } else if (++bad_epochs > cfg.plateau_patience) {
      lr *= cfg.plateau_factor;
      bad_epochs = 0;
    }
  }
  if (!cfg.keep_best) {
    best_model = std::move(model);
    result.best_epoch = cfg.epochs - 1;
  }
  result.model = sc ? to_raw(best_model, scaling) : std::move(best_model);
  if (cfg.convexity_clamp) result.model.clamp_weights();
  return result;
}

}  // namespace softrod
