#pragma once

#include "softrod/rod_model.hpp"
#include "softrod/trajectory.hpp"

#include <span>
#include <vector>

namespace softrod {

/// Cumulative Euclidean cost of the optimal monotone warp path
/// (steps match/insert/delete, no length normalization).
double dtw_tip(std::span<const Vec3> a, std::span<const Vec3> b);

/// ZYX intrinsic angles (roll, pitch, yaw). At |pitch| = pi/2 roll is set to
/// zero. Throws std::invalid_argument if R is not orthonormal within 1e-6.
Vec3 rot_to_euler(const Mat3& R);
Mat3 euler_to_rot(const Vec3& rpy);

/// Mean over snapshots, nodes and the six channels (position, Euler angles)
/// of the squared difference.
double pose_mse(const Trajectory& a, const Trajectory& b);

struct MetricReport {
  double tip_dtw = 0.0;
  double pose_mse = 0.0;
  std::vector<double> per_step_tip_error;
};

MetricReport compare(const Trajectory& truth, const Trajectory& candidate);

}  // namespace softrod
