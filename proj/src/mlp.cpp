#include "softrod/mlp.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace softrod {

MlpModel MlpModel::zeros(int d_in, int d_hidden, int d_out, bool clamp) {
  if (d_in <= 0 || d_hidden <= 0 || d_out <= 0)
    throw std::invalid_argument("MlpModel: layer sizes must be positive");
  MlpModel m;
  m.W1 = Eigen::MatrixXd::Zero(d_hidden, d_in);
  m.b1 = Eigen::VectorXd::Zero(d_hidden);
  m.W2 = Eigen::MatrixXd::Zero(d_out, d_hidden);
  m.b2 = Eigen::VectorXd::Zero(d_out);
  m.convexity_clamp = clamp;
  return m;
}

MlpModel MlpModel::initialized(int d_in, int d_hidden, int d_out, bool clamp, std::uint64_t seed,
                               double output_scale) {
  MlpModel m = zeros(d_in, d_hidden, d_out, clamp);
  std::mt19937_64 rng(seed);
  const double a1 = 1.0 / std::sqrt(static_cast<double>(d_in));
  const double a2 = output_scale / std::sqrt(static_cast<double>(d_hidden));
  std::uniform_real_distribution<double> u1(clamp ? 0.0 : -a1, a1);
  std::uniform_real_distribution<double> u2(clamp ? 0.0 : -a2, a2);
  for (Eigen::Index i = 0; i < m.W1.rows(); ++i)
    for (Eigen::Index j = 0; j < m.W1.cols(); ++j) m.W1(i, j) = u1(rng);
  for (Eigen::Index i = 0; i < m.W2.rows(); ++i)
    for (Eigen::Index j = 0; j < m.W2.cols(); ++j) m.W2(i, j) = u2(rng);
  return m;
}

void MlpModel::clamp_weights() {
  W1 = W1.cwiseMax(0.0);
  W2 = W2.cwiseMax(0.0);
}

double MlpModel::min_weight() const { return std::min(W1.minCoeff(), W2.minCoeff()); }

std::size_t MlpModel::parameter_count() const {
  return static_cast<std::size_t>(W1.size() + W2.size() + b1.size() + b2.size());
}

Eigen::VectorXd MlpModel::flatten() const {
  Eigen::VectorXd theta(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index k = 0;
  for (const Eigen::MatrixXd* W : {&W1, &W2})
    for (Eigen::Index i = 0; i < W->rows(); ++i)
      for (Eigen::Index j = 0; j < W->cols(); ++j) theta[k++] = (*W)(i, j);
  theta.segment(k, b1.size()) = b1;
  k += b1.size();
  theta.segment(k, b2.size()) = b2;
  return theta;
}

void MlpModel::unflatten(const Eigen::VectorXd& theta) {
  if (theta.size() != static_cast<Eigen::Index>(parameter_count()))
    throw std::invalid_argument("MlpModel::unflatten: wrong parameter count");
  Eigen::Index k = 0;
  for (Eigen::MatrixXd* W : {&W1, &W2})
    for (Eigen::Index i = 0; i < W->rows(); ++i)
      for (Eigen::Index j = 0; j < W->cols(); ++j) (*W)(i, j) = theta[k++];
  b1 = theta.segment(k, b1.size());
  k += b1.size();
  b2 = theta.segment(k, b2.size());
}

Eigen::VectorXd MlpModel::weight_mask() const {
  Eigen::VectorXd mask = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(parameter_count()));
  mask.head(W1.size() + W2.size()).setOnes();
  return mask;
}

Eigen::VectorXd mlp_forward(const Eigen::VectorXd& x, const MlpModel& model) {
  if (x.size() != model.input_dim())
    throw std::invalid_argument("mlp_forward: input has " + std::to_string(x.size()) +
                                " entries, model expects " + std::to_string(model.input_dim()));
  Eigen::VectorXd hidden = model.W1 * x + model.b1;
  for (Eigen::Index i = 0; i < hidden.size(); ++i) hidden[i] = elu(hidden[i]);
  return model.W2 * hidden + model.b2;
}

namespace {

void write_le(std::ostream& out, double value) {
  auto bits = std::bit_cast<std::uint64_t>(value);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
  out.write(bytes, 8);
}

double read_le(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8))
    throw std::runtime_error("checkpoint truncated");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const MlpModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  out << "KNODE-MLP v1 " << model.input_dim() << ' ' << model.hidden_dim() << ' '
      << model.output_dim() << ' ' << (model.convexity_clamp ? 1 : 0) << '\n';
  const Eigen::VectorXd theta = model.flatten();
  for (Eigen::Index i = 0; i < theta.size(); ++i) write_le(out, theta[i]);
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

MlpModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string magic, version;
  int d_in = 0, d_hidden = 0, d_out = 0, clamp = 0;
  hs >> magic >> version >> d_in >> d_hidden >> d_out >> clamp;
  if (!hs || magic != "KNODE-MLP" || version != "v1")
    throw std::runtime_error("not a KNODE-MLP v1 checkpoint: " + path);
  MlpModel model = MlpModel::zeros(d_in, d_hidden, d_out, clamp != 0);
  Eigen::VectorXd theta(static_cast<Eigen::Index>(model.parameter_count()));
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = read_le(in);
  model.unflatten(theta);
  return model;
}

}  // namespace softrod
