#pragma once

#include "softrod/rod_model.hpp"

#include <random>

namespace softrod::test {

inline Vec4 random_unit_quaternion(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec4 h(n(rng), n(rng), n(rng), n(rng));
  return h.normalized();
}

inline Vec3 random_vec(std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return Vec3(u(rng), u(rng), u(rng));
}

inline SectionState random_state(std::mt19937_64& rng) {
  SectionState s;
  s.p = random_vec(rng, 0.5);
  s.h = random_unit_quaternion(rng);
  s.n = random_vec(rng, 2.0);
  s.m = random_vec(rng, 0.2);
  s.q = random_vec(rng, 0.3);
  s.w = random_vec(rng, 1.0);
  s.v = Vec3(0.0, 0.0, 1.0) + random_vec(rng, 1e-3);
  s.u = random_vec(rng, 2.0);
  return s;
}

inline NodeHistory random_history(std::mt19937_64& rng) {
  return {random_vec(rng, 5.0), random_vec(rng, 5.0), random_vec(rng, 5.0), random_vec(rng, 5.0)};
}

}  // namespace softrod::test
