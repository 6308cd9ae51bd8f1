#pragma once

#include "softrod/rod_model.hpp"

#include <optional>
#include <tuple>
#include <vector>

namespace softrod {

/// Backward differentiation in time: x_t ~= c0*x(t) + c1*x(t-1) + c2*x(t-2).
/// Order 0 is the static scheme (all coefficients zero).
struct BdfScheme {
  int order = 2;
  double dt = 0.05;
  double c0 = 30.0;
  double c1 = -40.0;
  double c2 = 10.0;

  static BdfScheme bdf1(double dt);
  static BdfScheme bdf2(double dt);
  static BdfScheme statics();
};

std::tuple<double, double, double> bdf2_coeffs(double dt);

struct HistoryBuffer {
  std::vector<NodeHistory> nodes;
};

HistoryBuffer zero_history(int node_count);

/// hx = c1*x(t-1) + c2*x(t-2) for x in {v, u, q, w}. `lag2` may be empty
/// only for order <= 1.
HistoryBuffer update_history(const RodProfile& lag1, const RodProfile& lag2,
                             const BdfScheme& scheme);

/// Keeps the two most recent solved profiles and hands out the scheme and
/// history for the next step: BDF1 on the first step, BDF2 afterwards.
class HistoryTracker {
 public:
  HistoryTracker(double dt, int max_order = 2);

  void push(const RodProfile& solved);
  int completed_steps() const { return steps_; }

  BdfScheme next_scheme() const;
  HistoryBuffer next_history() const;

  const RodProfile& lag1() const { return lag1_; }
  const RodProfile& lag2() const { return lag2_; }

 private:
  double dt_;
  int max_order_;
  int steps_ = -1;  // -1: nothing pushed; 0: initial state only
  RodProfile lag1_;
  RodProfile lag2_;
};

}  // namespace softrod
