#pragma once

#include "softrod/rod_model.hpp"
#include "softrod/timestepper.hpp"
#include "softrod/trajectory.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace softrod {

/// Tracked poses at a few arclengths, sampled over time.
struct MarkerSeries {
  std::vector<double> times;       // strictly increasing
  std::vector<double> arclengths;  // sorted, in [0, L]
  std::vector<std::vector<Vec3>> positions;     // [time][marker]
  std::vector<std::vector<Vec4>> orientations;  // [time][marker], [w, x, y, z]

  std::size_t time_count() const { return times.size(); }
  std::size_t marker_count() const { return arclengths.size(); }
  void validate() const;
};

/// Samples the given node indices of a simulated trajectory as markers.
MarkerSeries sample_markers(const Trajectory& traj, std::span<const int> nodes, double ds);

/// Natural cubic splines in s (per time sample), then in t (per node).
/// Quaternions are interpolated componentwise with sign continuity and
/// renormalized. Returns snapshots carrying p and h only.
Trajectory interpolate_poses(const MarkerSeries& series, std::span<const double> query_s,
                             std::span<const double> query_t);

/// Fills q = R^T p_t and w = vee(R^T R_t) by central differences in time
/// (three-point one-sided stencils at the ends). With `stationary_start` the
/// first snapshot is the rest state the motion starts from: its rates are
/// zero and the stencils of later samples still use its pose.
void estimate_velocities(Trajectory& traj, bool stationary_start = false);

/// Integrates n and m from the free tip (n = m = 0) toward the base using
/// the inverse of an explicit Euler step of the rod equations. v and u are
/// recovered node by node along the way, since m_s needs the local stretch.
void backward_force_integration(RodProfile& nodes, const HistoryBuffer& hist,
                                std::span<const double> tau, const RodParams& params, double c0);

/// v and u from the constitutive law at every node.
void estimate_strains(RodProfile& nodes, const HistoryBuffer& hist, const RodParams& params,
                      double c0);

/// Full reconstruction of n, m, v, u for a trajectory with p, h, q, w filled.
/// Snapshot 0 is treated as static; later snapshots use the same BDF startup
/// rule as the simulator, with histories built from the estimates themselves.
void estimate_internal_state(Trajectory& traj, const RodParams& params, int bdf_order = 2);

/// Markers to full state at the rod's node arclengths and the marker times,
/// starting from rest. `tau[k]` holds the tensions for snapshot k.
Trajectory estimate_state(const MarkerSeries& series, const RodParams& params,
                          const std::vector<std::vector<double>>& tau, int bdf_order = 2);

/// Rows `time, marker_index, arclength, px, py, pz, hw, hx, hy, hz`, header row.
MarkerSeries read_markers_csv(std::istream& in);
MarkerSeries read_markers_csv(const std::string& path);
void write_markers_csv(const MarkerSeries& series, std::ostream& out);
void write_markers_csv(const MarkerSeries& series, const std::string& path);

}  // namespace softrod
