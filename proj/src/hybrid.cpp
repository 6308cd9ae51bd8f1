#include "softrod/hybrid.hpp"

#include <stdexcept>

namespace softrod {

int feature_dim(InputMode mode, int tendon_count) {
  return 19 + 6 + tendon_count + (mode == InputMode::Full ? 12 : 0);
}

InputMode input_mode_for(const MlpModel& model, int tendon_count) {
  if (model.input_dim() == feature_dim(InputMode::Simulation, tendon_count))
    return InputMode::Simulation;
  if (model.input_dim() == feature_dim(InputMode::Full, tendon_count)) return InputMode::Full;
  throw std::invalid_argument("model input width " + std::to_string(model.input_dim()) +
                              " does not match " + std::to_string(tendon_count) + " tendons");
}

Eigen::VectorXd make_features(const SectionState& state, const NodeHistory& hist,
                              std::span<const double> tau, InputMode mode) {
  const int k = static_cast<int>(tau.size());
  Eigen::VectorXd x(feature_dim(mode, k));
  x.head<19>() = state.y();
  x.segment<6>(19) = state.z();
  for (int i = 0; i < k; ++i) x[25 + i] = tau[static_cast<std::size_t>(i)];
  if (mode == InputMode::Full) x.tail<12>() << hist.hv, hist.hu, hist.hq, hist.hw;
  return x;
}

NodeEvaluation hybrid_rhs(const SectionState& state, const NodeHistory& hist,
                          std::span<const double> tau, const RodParams& params, double c0,
                          const MlpModel* model) {
  SectionState s = state;
  const Strains kn = constitutive_vu(s.h, s.n, s.m, hist.hv, hist.hu, params, c0);
  s.v = kn.v;
  s.u = kn.u;

  if (model == nullptr) return {cosserat_rhs(s, hist, tau, params, c0), s.z()};

  const InputMode mode = input_mode_for(*model, params.tendon_count());
  const Eigen::VectorXd f = mlp_forward(make_features(s, hist, tau, mode), *model);
  if (f.size() != kResidualDim)
    throw std::invalid_argument("hybrid_rhs: residual model must have 25 outputs");
  s.v += f.segment<3>(19);
  s.u += f.segment<3>(22);
  NodeEvaluation out{cosserat_rhs(s, hist, tau, params, c0), s.z()};
  out.y_s += f.head<19>();
  return out;
}

}  // namespace softrod
