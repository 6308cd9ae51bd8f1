#include "softrod/timestepper.hpp"

#include <stdexcept>

namespace softrod {

BdfScheme BdfScheme::bdf1(double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("BDF time step must be positive");
  return {1, dt, 1.0 / dt, -1.0 / dt, 0.0};
}

BdfScheme BdfScheme::bdf2(double dt) {
  const auto [c0, c1, c2] = bdf2_coeffs(dt);
  return {2, dt, c0, c1, c2};
}

BdfScheme BdfScheme::statics() { return {0, 0.0, 0.0, 0.0, 0.0}; }

std::tuple<double, double, double> bdf2_coeffs(double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("BDF time step must be positive");
  return {1.5 / dt, -2.0 / dt, 0.5 / dt};
}

HistoryBuffer zero_history(int node_count) {
  return HistoryBuffer{std::vector<NodeHistory>(static_cast<std::size_t>(node_count))};
}

HistoryBuffer update_history(const RodProfile& lag1, const RodProfile& lag2,
                             const BdfScheme& scheme) {
  if (scheme.order == 0) return zero_history(static_cast<int>(lag1.size()));
  if (lag1.empty()) throw std::invalid_argument("update_history: lag1 is empty");
  if (scheme.order >= 2 && lag2.size() != lag1.size())
    throw std::invalid_argument("update_history: order-2 scheme needs a populated lag2");

  HistoryBuffer out;
  out.nodes.resize(lag1.size());
  for (std::size_t i = 0; i < lag1.size(); ++i) {
    NodeHistory& h = out.nodes[i];
    const SectionState& a = lag1[i];
    h.hv = scheme.c1 * a.v;
    h.hu = scheme.c1 * a.u;
    h.hq = scheme.c1 * a.q;
    h.hw = scheme.c1 * a.w;
    if (scheme.order >= 2) {
      const SectionState& b = lag2[i];
      h.hv += scheme.c2 * b.v;
      h.hu += scheme.c2 * b.u;
      h.hq += scheme.c2 * b.q;
      h.hw += scheme.c2 * b.w;
    }
  }
  return out;
}

HistoryTracker::HistoryTracker(double dt, int max_order) : dt_(dt), max_order_(max_order) {
  if (!(dt > 0.0)) throw std::invalid_argument("HistoryTracker: dt must be positive");
  if (max_order < 1 || max_order > 2)
    throw std::invalid_argument("HistoryTracker: order must be 1 or 2");
}

void HistoryTracker::push(const RodProfile& solved) {
  lag2_ = std::move(lag1_);
  lag1_ = solved;
  ++steps_;
}

BdfScheme HistoryTracker::next_scheme() const {
  if (steps_ < 0) throw std::logic_error("HistoryTracker: no initial state pushed");
  if (steps_ == 0 || max_order_ == 1) return BdfScheme::bdf1(dt_);
  return BdfScheme::bdf2(dt_);
}

HistoryBuffer HistoryTracker::next_history() const {
  return update_history(lag1_, lag2_, next_scheme());
}

}  // namespace softrod
