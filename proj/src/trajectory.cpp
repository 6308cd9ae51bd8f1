#include "softrod/trajectory.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace softrod {

int Trajectory::node_count() const {
  return snapshots.empty() ? 0 : static_cast<int>(snapshots.front().nodes.size());
}

int Trajectory::tendon_count() const {
  return snapshots.empty() ? 0 : static_cast<int>(snapshots.front().tau.size());
}

std::vector<Vec3> Trajectory::tip_positions() const {
  std::vector<Vec3> tips;
  tips.reserve(snapshots.size());
  for (const Snapshot& snap : snapshots) tips.push_back(snap.nodes.back().p);
  return tips;
}

namespace {

constexpr int kStateColumns = 25;  // p3 h4 n3 m3 q3 w3 v3 u3

}  // namespace

std::vector<double> parse_csv_numbers(const std::string& line, std::size_t line_no) {
  std::vector<double> values;
  const char* begin = line.data();
  const char* end = begin + line.size();
  while (begin < end) {
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    const char* comma = std::find(begin, end, ',');
    const char* stop = comma;
    while (stop > begin && (stop[-1] == ' ' || stop[-1] == '\t' || stop[-1] == '\r')) --stop;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(begin, stop, value);
    if (ec != std::errc() || ptr != stop)
      throw std::runtime_error("CSV line " + std::to_string(line_no) + ": cannot parse number");
    values.push_back(value);
    begin = comma == end ? end : comma + 1;
  }
  return values;
}

void write_trajectory_csv(const Trajectory& traj, std::ostream& out) {
  const int k = traj.tendon_count();
  out << "t,node,px,py,pz,hw,hx,hy,hz,nx,ny,nz,mx,my,mz,qx,qy,qz,wx,wy,wz,vx,vy,vz,ux,uy,uz";
  for (int i = 0; i < k; ++i) out << ",tau_" << i;
  out << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const Snapshot& snap : traj.snapshots) {
    for (std::size_t node = 0; node < snap.nodes.size(); ++node) {
      const SectionState& s = snap.nodes[node];
      out << snap.t << ',' << node;
      const Vec19 y = s.y();
      const Vec6 z = s.z();
      for (int i = 0; i < 19; ++i) out << ',' << y[i];
      for (int i = 0; i < 6; ++i) out << ',' << z[i];
      for (double tau : snap.tau) out << ',' << tau;
      out << '\n';
    }
  }
}

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  write_trajectory_csv(traj, out);
  if (!out) throw std::runtime_error("failed writing trajectory: " + path);
}

Trajectory read_trajectory_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("trajectory CSV is empty");
  if (line.rfind("t,node,", 0) != 0) throw std::runtime_error("trajectory CSV: missing header row");
  const auto header_cols = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',') + 1);
  if (header_cols < 2 + kStateColumns) throw std::runtime_error("trajectory CSV: too few columns");
  const std::size_t tendons = header_cols - 2 - kStateColumns;

  Trajectory traj;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<double> row = parse_csv_numbers(line, line_no);
    if (row.size() != header_cols)
      throw std::runtime_error("trajectory CSV line " + std::to_string(line_no) +
                               ": expected " + std::to_string(header_cols) + " columns");
    const double t = row[0];
    const auto node = static_cast<long>(row[1]);
    if (node == 0) {
      Snapshot snap;
      snap.t = t;
      snap.tau.assign(row.end() - static_cast<long>(tendons), row.end());
      traj.snapshots.push_back(std::move(snap));
    }
    if (traj.snapshots.empty() || node != static_cast<long>(traj.snapshots.back().nodes.size()) ||
        traj.snapshots.back().t != t)
      throw std::runtime_error("trajectory CSV line " + std::to_string(line_no) +
                               ": rows must be ordered by time then node");
    SectionState s;
    Vec19 y;
    Vec6 z;
    for (int i = 0; i < 19; ++i) y[i] = row[2 + static_cast<std::size_t>(i)];
    for (int i = 0; i < 6; ++i) z[i] = row[21 + static_cast<std::size_t>(i)];
    s.set_y(y);
    s.set_z(z);
    traj.snapshots.back().nodes.push_back(s);
  }
  if (traj.snapshots.empty()) throw std::runtime_error("trajectory CSV has no rows");
  const std::size_t nodes = traj.snapshots.front().nodes.size();
  for (const Snapshot& snap : traj.snapshots)
    if (snap.nodes.size() != nodes)
      throw std::runtime_error("trajectory CSV: snapshots have different node counts");
  if (traj.snapshots.size() >= 2) traj.dt = traj.snapshots[1].t - traj.snapshots[0].t;
  return traj;
}

Trajectory read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trajectory file: " + path);
  return read_trajectory_csv(in);
}

}  // namespace softrod
