#include "softrod/state_estimation.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_interp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <stdexcept>

namespace softrod {

void MarkerSeries::validate() const {
  if (times.size() < 4) throw std::invalid_argument("markers: need at least 4 time samples");
  if (arclengths.size() < 4) throw std::invalid_argument("markers: need at least 4 markers");
  for (std::size_t k = 1; k < times.size(); ++k)
    if (!(times[k] > times[k - 1])) throw std::invalid_argument("markers: times must increase");
  for (std::size_t j = 1; j < arclengths.size(); ++j)
    if (!(arclengths[j] > arclengths[j - 1]))
      throw std::invalid_argument("markers: arclengths must be strictly sorted");
  if (arclengths.front() < 0.0) throw std::invalid_argument("markers: negative arclength");
  if (positions.size() != times.size() || orientations.size() != times.size())
    throw std::invalid_argument("markers: pose arrays do not match the time count");
  for (std::size_t k = 0; k < times.size(); ++k)
    if (positions[k].size() != arclengths.size() || orientations[k].size() != arclengths.size())
      throw std::invalid_argument("markers: missing marker at a time sample");
}

MarkerSeries sample_markers(const Trajectory& traj, std::span<const int> nodes, double ds) {
  MarkerSeries m;
  for (int node : nodes) {
    if (node < 0 || node >= traj.node_count())
      throw std::invalid_argument("sample_markers: node index out of range");
    m.arclengths.push_back(node * ds);
  }
  for (const Snapshot& snap : traj.snapshots) {
    m.times.push_back(snap.t);
    std::vector<Vec3> p;
    std::vector<Vec4> h;
    for (int node : nodes) {
      p.push_back(snap.nodes[static_cast<std::size_t>(node)].p);
      h.push_back(snap.nodes[static_cast<std::size_t>(node)].h);
    }
    m.positions.push_back(std::move(p));
    m.orientations.push_back(std::move(h));
  }
  return m;
}

namespace {

class NaturalSpline {
 public:
  NaturalSpline(std::span<const double> x, std::span<const double> y)
      : x_(x.begin(), x.end()), y_(y.begin(), y.end()),
        interp_(gsl_interp_alloc(gsl_interp_cspline, x.size()), gsl_interp_free) {
    if (!interp_) throw std::runtime_error("spline: allocation failed");
    if (gsl_interp_init(interp_.get(), x_.data(), y_.data(), x_.size()) != GSL_SUCCESS)
      throw std::invalid_argument("spline: invalid knots");
  }

  double operator()(double x) const {
    // Round-off at the end knots is not extrapolation.
    const double span = x_.back() - x_.front();
    if (x < x_.front() && x > x_.front() - 1e-12 * span) x = x_.front();
    if (x > x_.back() && x < x_.back() + 1e-12 * span) x = x_.back();
    double y = 0.0;
    if (gsl_interp_eval_e(interp_.get(), x_.data(), y_.data(), x, nullptr, &y) != GSL_SUCCESS)
      throw std::invalid_argument("spline: query outside the sampled range");
    return y;
  }

 private:
  std::vector<double> x_;
  std::vector<double> y_;
  std::unique_ptr<gsl_interp, decltype(&gsl_interp_free)> interp_;
};

struct GslQuiet {
  GslQuiet() : previous(gsl_set_error_handler_off()) {}
  ~GslQuiet() { gsl_set_error_handler(previous); }
  gsl_error_handler_t* previous;
};

using Channels = Eigen::Matrix<double, 7, 1>;  // p, h

Channels pack(const Vec3& p, const Vec4& h) {
  Channels c;
  c << p, h;
  return c;
}

// Interpolates each channel of `samples` (one per knot) at the query points.
std::vector<Channels> interpolate_channels(std::span<const double> knots,
                                           const std::vector<Channels>& samples,
                                           std::span<const double> query) {
  std::vector<Channels> out(query.size());
  std::vector<double> ys(knots.size());
  for (int c = 0; c < 7; ++c) {
    for (std::size_t j = 0; j < knots.size(); ++j) ys[j] = samples[j][c];
    const NaturalSpline spline(knots, ys);
    for (std::size_t i = 0; i < query.size(); ++i) out[i][c] = spline(query[i]);
  }
  return out;
}

void align_signs(std::vector<Channels>& seq) {
  for (std::size_t j = 1; j < seq.size(); ++j)
    if (seq[j].tail<4>().dot(seq[j - 1].tail<4>()) < 0.0) seq[j].tail<4>() *= -1.0;
}

// Derivative at x[i] of the quadratic through (x[a], x[a+1], x[a+2]).
template <class T>
T three_point_derivative(const std::vector<double>& x, const std::vector<T>& f, std::size_t a,
                         std::size_t i) {
  const double x0 = x[a], x1 = x[a + 1], x2 = x[a + 2], xi = x[i];
  const double l0 = ((xi - x1) + (xi - x2)) / ((x0 - x1) * (x0 - x2));
  const double l1 = ((xi - x0) + (xi - x2)) / ((x1 - x0) * (x1 - x2));
  const double l2 = ((xi - x0) + (xi - x1)) / ((x2 - x0) * (x2 - x1));
  return T(l0 * f[a] + l1 * f[a + 1] + l2 * f[a + 2]);
}

Vec3 vee(const Mat3& S) { return Vec3(S(2, 1), S(0, 2), S(1, 0)); }

}  // namespace

Trajectory interpolate_poses(const MarkerSeries& series, std::span<const double> query_s,
                             std::span<const double> query_t) {
  series.validate();
  const GslQuiet quiet;
  const std::size_t T = series.time_count();

  // In s at every sample time.
  std::vector<std::vector<Channels>> along(T);  // [time][query node]
  for (std::size_t k = 0; k < T; ++k) {
    std::vector<Channels> markers;
    for (std::size_t j = 0; j < series.marker_count(); ++j)
      markers.push_back(pack(series.positions[k][j], series.orientations[k][j]));
    align_signs(markers);
    along[k] = interpolate_channels(series.arclengths, markers, query_s);
  }

  // In t at every query node.
  Trajectory out;
  out.snapshots.resize(query_t.size());
  for (std::size_t i = 0; i < query_t.size(); ++i) {
    out.snapshots[i].t = query_t[i];
    out.snapshots[i].nodes.resize(query_s.size());
  }
  for (std::size_t n = 0; n < query_s.size(); ++n) {
    std::vector<Channels> history(T);
    for (std::size_t k = 0; k < T; ++k) history[k] = along[k][n];
    align_signs(history);
    const std::vector<Channels> dense = interpolate_channels(series.times, history, query_t);
    for (std::size_t i = 0; i < query_t.size(); ++i) {
      SectionState& s = out.snapshots[i].nodes[n];
      s.p = dense[i].head<3>();
      s.h = quat_normalized(dense[i].tail<4>());
    }
  }
  if (query_t.size() >= 2) out.dt = query_t[1] - query_t[0];
  return out;
}

void estimate_velocities(Trajectory& traj, bool stationary_start) {
  const std::size_t T = traj.size();
  if (T < 3) throw std::invalid_argument("estimate_velocities: need at least 3 time samples");
  std::vector<double> t(T);
  for (std::size_t k = 0; k < T; ++k) t[k] = traj.snapshots[k].t;
  const auto nodes = static_cast<std::size_t>(traj.node_count());
  for (std::size_t n = 0; n < nodes; ++n) {
    std::vector<Vec3> p(T);
    std::vector<Mat3> R(T);
    for (std::size_t k = 0; k < T; ++k) {
      p[k] = traj.snapshots[k].nodes[n].p;
      R[k] = quat_to_rot_normalized(traj.snapshots[k].nodes[n].h);
    }
    for (std::size_t k = 0; k < T; ++k) {
      const std::size_t a = k == 0 ? 0 : (k == T - 1 ? T - 3 : k - 1);
      const Vec3 p_t = three_point_derivative(t, p, a, k);
      const Mat3 R_t = three_point_derivative(t, R, a, k);
      const Mat3 W = R[k].transpose() * R_t;
      SectionState& s = traj.snapshots[k].nodes[n];
      s.q = R[k].transpose() * p_t;
      s.w = vee(0.5 * (W - W.transpose()));
    }
  }
  if (stationary_start)
    for (SectionState& s : traj.snapshots.front().nodes) {
      s.q.setZero();
      s.w.setZero();
    }
}

void backward_force_integration(RodProfile& nodes, const HistoryBuffer& hist,
                                std::span<const double> tau, const RodParams& params, double c0) {
  const auto N = static_cast<int>(nodes.size()) - 1;
  if (N < 1 || hist.nodes.size() != nodes.size())
    throw std::invalid_argument("backward_force_integration: node/history count mismatch");
  const double ds = params.length / N;
  auto strains = [&](SectionState& s, const NodeHistory& h) {
    const Strains z = constitutive_vu(s.h, s.n, s.m, h.hv, h.hu, params, c0);
    s.v = z.v;
    s.u = z.u;
  };

  SectionState& tip = nodes.back();
  tip.n.setZero();
  tip.m.setZero();
  strains(tip, hist.nodes.back());
  for (int k = N - 1; k >= 0; --k) {
    SectionState& s = nodes[static_cast<std::size_t>(k)];
    const SectionState& next = nodes[static_cast<std::size_t>(k + 1)];
    const NodeHistory& h = hist.nodes[static_cast<std::size_t>(k)];
    // n_s depends only on the kinematic channels; m_s also needs n and v.
    s.n.setZero();
    s.m.setZero();
    s.n = next.n - ds * cosserat_rhs(s, h, tau, params, c0).segment<3>(7);
    strains(s, h);
    s.m = next.m - ds * cosserat_rhs(s, h, tau, params, c0).segment<3>(10);
    strains(s, h);
  }
}

void estimate_strains(RodProfile& nodes, const HistoryBuffer& hist, const RodParams& params,
                      double c0) {
  if (hist.nodes.size() != nodes.size())
    throw std::invalid_argument("estimate_strains: node/history count mismatch");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Strains z =
        constitutive_vu(nodes[i].h, nodes[i].n, nodes[i].m, hist.nodes[i].hv, hist.nodes[i].hu,
                        params, c0);
    nodes[i].v = z.v;
    nodes[i].u = z.u;
  }
}

void estimate_internal_state(Trajectory& traj, const RodParams& params, int bdf_order) {
  if (traj.size() == 0) return;
  const double dt = traj.size() >= 2 ? traj.snapshots[1].t - traj.snapshots[0].t : params.dt;
  for (std::size_t k = 1; k < traj.size(); ++k) {
    const double step = traj.snapshots[k].t - traj.snapshots[k - 1].t;
    if (std::abs(step - dt) > 1e-9 * std::max(1.0, dt))
      throw std::invalid_argument("estimate_internal_state: time samples must be uniform");
  }
  traj.dt = dt;
  const int nodes = traj.node_count();

  Snapshot& first = traj.snapshots.front();
  backward_force_integration(first.nodes, zero_history(nodes), first.tau, params, 0.0);
  estimate_strains(first.nodes, zero_history(nodes), params, 0.0);
  HistoryTracker tracker(dt, bdf_order);
  tracker.push(first.nodes);
  for (std::size_t k = 1; k < traj.size(); ++k) {
    Snapshot& snap = traj.snapshots[k];
    const HistoryBuffer hist = tracker.next_history();
    const double c0 = tracker.next_scheme().c0;
    backward_force_integration(snap.nodes, hist, snap.tau, params, c0);
    estimate_strains(snap.nodes, hist, params, c0);
    tracker.push(snap.nodes);
  }
}

Trajectory estimate_state(const MarkerSeries& series, const RodParams& params,
                          const std::vector<std::vector<double>>& tau, int bdf_order) {
  if (tau.size() != series.time_count())
    throw std::invalid_argument("estimate_state: need one tension row per time sample");
  std::vector<double> s(static_cast<std::size_t>(params.node_count()));
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<double>(i) * params.ds();
  Trajectory traj = interpolate_poses(series, s, series.times);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    if (static_cast<int>(tau[k].size()) != params.tendon_count())
      throw std::invalid_argument("estimate_state: tension row has wrong tendon count");
    traj.snapshots[k].tau = tau[k];
  }
  estimate_velocities(traj, true);
  estimate_internal_state(traj, params, bdf_order);
  return traj;
}

MarkerSeries read_markers_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("marker CSV is empty");
  if (line.rfind("time,", 0) != 0) throw std::runtime_error("marker CSV: missing header row");

  MarkerSeries m;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<double> row = parse_csv_numbers(line, line_no);
    if (row.size() != 10)
      throw std::runtime_error("marker CSV line " + std::to_string(line_no) +
                               ": expected 10 columns");
    const auto marker = static_cast<long>(row[1]);
    if (marker == 0) {
      m.times.push_back(row[0]);
      m.positions.emplace_back();
      m.orientations.emplace_back();
    }
    if (m.times.empty() || m.times.back() != row[0] ||
        marker != static_cast<long>(m.positions.back().size()))
      throw std::runtime_error("marker CSV line " + std::to_string(line_no) +
                               ": rows must be ordered by time then marker");
    if (m.times.size() == 1) {
      m.arclengths.push_back(row[2]);
    } else if (static_cast<std::size_t>(marker) >= m.arclengths.size() ||
               m.arclengths[static_cast<std::size_t>(marker)] != row[2]) {
      throw std::runtime_error("marker CSV line " + std::to_string(line_no) +
                               ": marker set changes over time");
    }
    m.positions.back().emplace_back(row[3], row[4], row[5]);
    m.orientations.back().emplace_back(row[6], row[7], row[8], row[9]);
  }
  if (m.times.empty()) throw std::runtime_error("marker CSV has no rows");
  m.validate();
  return m;
}

MarkerSeries read_markers_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open marker file: " + path);
  return read_markers_csv(in);
}

void write_markers_csv(const MarkerSeries& series, std::ostream& out) {
  out << "time,marker_index,arclength,px,py,pz,hw,hx,hy,hz\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t k = 0; k < series.time_count(); ++k)
    for (std::size_t j = 0; j < series.marker_count(); ++j) {
      const Vec3& p = series.positions[k][j];
      const Vec4& h = series.orientations[k][j];
      out << series.times[k] << ',' << j << ',' << series.arclengths[j] << ',' << p.x() << ','
          << p.y() << ',' << p.z() << ',' << h[0] << ',' << h[1] << ',' << h[2] << ',' << h[3]
          << '\n';
    }
}

void write_markers_csv(const MarkerSeries& series, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  write_markers_csv(series, out);
  if (!out) throw std::runtime_error("failed writing markers: " + path);
}

}  // namespace softrod
