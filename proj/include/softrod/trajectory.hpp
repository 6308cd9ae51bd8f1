#pragma once

#include "softrod/rod_model.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace softrod {

struct Snapshot {
  double t = 0.0;
  RodProfile nodes;
  std::vector<double> tau;  // tensions the snapshot was solved with
};

struct Trajectory {
  double dt = 0.05;
  std::vector<Snapshot> snapshots;

  std::size_t size() const { return snapshots.size(); }
  int node_count() const;
  int tendon_count() const;
  std::vector<Vec3> tip_positions() const;
};

/// Rows `t, node, px..pz, hw..hz, nx..nz, mx..mz, qx..qz, wx..wz, vx..vz,
/// ux..uz, tau_0..tau_{k-1}` with a header row. Values use round-trip precision.
void write_trajectory_csv(const Trajectory& traj, std::ostream& out);
void write_trajectory_csv(const Trajectory& traj, const std::string& path);
Trajectory read_trajectory_csv(std::istream& in);
Trajectory read_trajectory_csv(const std::string& path);

/// Comma-separated numbers; throws std::runtime_error naming `line_no`.
std::vector<double> parse_csv_numbers(const std::string& line, std::size_t line_no);

}  // namespace softrod
