#include "softrod/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace softrod {

double dtw_tip(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("dtw_tip: empty sequence");
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(m + 1, inf);
  std::vector<double> cur(m + 1, inf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = inf;
    for (std::size_t j = 1; j <= m; ++j) {
      const double cost = (a[i - 1] - b[j - 1]).norm();
      cur[j] = cost + std::min({prev[j - 1], prev[j], cur[j - 1]});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

Vec3 rot_to_euler(const Mat3& R) {
  if (!R.allFinite() || (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6 ||
      std::abs(R.determinant() - 1.0) > 1e-6)
    throw std::invalid_argument("rot_to_euler: matrix is not a rotation");
  const double s = std::clamp(-R(2, 0), -1.0, 1.0);
  const double pitch = std::asin(s);
  if (std::abs(s) > 1.0 - 1e-12) {
    // Gimbal lock: only yaw -/+ roll is observable; put it all in yaw.
    const double yaw = std::atan2(-R(0, 1), R(1, 1));
    return {0.0, std::copysign(std::numbers::pi / 2.0, s), yaw};
  }
  const double roll = std::atan2(R(2, 1), R(2, 2));
  const double yaw = std::atan2(R(1, 0), R(0, 0));
  return {roll, pitch, yaw};
}

Mat3 euler_to_rot(const Vec3& rpy) {
  return (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
      .toRotationMatrix();
}

double pose_mse(const Trajectory& a, const Trajectory& b) {
  if (a.size() != b.size() || a.size() == 0)
    throw std::invalid_argument("pose_mse: trajectories differ in length or are empty");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const RodProfile& na = a.snapshots[k].nodes;
    const RodProfile& nb = b.snapshots[k].nodes;
    if (na.size() != nb.size()) throw std::invalid_argument("pose_mse: node counts differ");
    for (std::size_t i = 0; i < na.size(); ++i) {
      const Vec3 dp = na[i].p - nb[i].p;
      const Vec3 de = rot_to_euler(quat_to_rot_normalized(na[i].h)) -
                      rot_to_euler(quat_to_rot_normalized(nb[i].h));
      sum += dp.squaredNorm() + de.squaredNorm();
      count += 6;
    }
  }
  return sum / static_cast<double>(count);
}

MetricReport compare(const Trajectory& truth, const Trajectory& candidate) {
  MetricReport r;
  const auto ta = truth.tip_positions();
  const auto tb = candidate.tip_positions();
  r.tip_dtw = dtw_tip(ta, tb);
  r.pose_mse = pose_mse(truth, candidate);
  const std::size_t n = std::min(ta.size(), tb.size());
  r.per_step_tip_error.reserve(n);
  for (std::size_t k = 0; k < n; ++k) r.per_step_tip_error.push_back((ta[k] - tb[k]).norm());
  return r;
}

}  // namespace softrod
