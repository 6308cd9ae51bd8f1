#pragma once

#include "softrod/mlp.hpp"
#include "softrod/rod_model.hpp"

#include <span>

namespace softrod {

/// Simulation mode feeds [y, z, tau]; full mode appends [hv, hu, hq, hw].
enum class InputMode { Simulation, Full };

int feature_dim(InputMode mode, int tendon_count);
/// Infers the input mode from the model's input width; throws if neither fits.
InputMode input_mode_for(const MlpModel& model, int tendon_count);

/// Network input for one node. `state` carries the knowledge-model strains.
Eigen::VectorXd make_features(const SectionState& state, const NodeHistory& hist,
                              std::span<const double> tau, InputMode mode);

struct NodeEvaluation {
  Vec19 y_s;
  Vec6 z;
};

/// Knowledge model (constitutive_vu + cosserat_rhs) plus the optional network
/// residual. Only the y part of `state` is read. The network sees the
/// knowledge strains; its v/u channels correct z before y_s is formed.
NodeEvaluation hybrid_rhs(const SectionState& state, const NodeHistory& hist,
                          std::span<const double> tau, const RodParams& params, double c0,
                          const MlpModel* model);

}  // namespace softrod
