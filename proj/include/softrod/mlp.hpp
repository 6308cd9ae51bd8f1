#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>

namespace softrod {

/// Residual channels: p_s 3, h_s 4, n_s 3, m_s 3, q_s 3, w_s 3, v 3, u 3.
inline constexpr int kResidualDim = 25;
inline constexpr int kHiddenDim = 512;

inline double elu(double x) { return x >= 0.0 ? x : std::expm1(x); }
inline double elu_grad(double x) { return x >= 0.0 ? 1.0 : std::exp(x); }

/// One-hidden-layer perceptron, ELU hidden activation, linear output.
struct MlpModel {
  Eigen::MatrixXd W1;  // hidden x input
  Eigen::VectorXd b1;
  Eigen::MatrixXd W2;  // output x hidden
  Eigen::VectorXd b2;
  bool convexity_clamp = true;

  int input_dim() const { return static_cast<int>(W1.cols()); }
  int hidden_dim() const { return static_cast<int>(W1.rows()); }
  int output_dim() const { return static_cast<int>(W2.rows()); }

  static MlpModel zeros(int d_in, int d_hidden, int d_out, bool clamp);
  /// Biases zero. Clamped: W1 ~ U[0, 1/sqrt(d_in)], W2 ~ U[0, output_scale/sqrt(d_hidden)].
  /// Unclamped: symmetric versions of the same ranges. The small output scale
  /// starts the hybrid close to the knowledge model.
  static MlpModel initialized(int d_in, int d_hidden, int d_out, bool clamp, std::uint64_t seed,
                              double output_scale = 0.01);

  /// Projects every weight entry onto [0, inf). Biases are left alone.
  void clamp_weights();
  double min_weight() const;

  std::size_t parameter_count() const;
  Eigen::VectorXd flatten() const;  // W1, W2 row-major, then b1, b2
  void unflatten(const Eigen::VectorXd& theta);
  /// Mask over flatten() order: true where the entry is a weight (not a bias).
  Eigen::VectorXd weight_mask() const;
};

/// W2 * elu(W1 x + b1) + b2. Throws std::invalid_argument on size mismatch.
Eigen::VectorXd mlp_forward(const Eigen::VectorXd& x, const MlpModel& model);

/// Header `KNODE-MLP v1 d_in d_hidden d_out clamp_flag`, newline, then the
/// weights (W1, W2) and biases (b1, b2) as little-endian float64, row-major.
void save_checkpoint(const MlpModel& model, const std::string& path);
MlpModel load_checkpoint(const std::string& path);

}  // namespace softrod
