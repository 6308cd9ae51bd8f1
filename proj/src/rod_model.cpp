#include "softrod/rod_model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace softrod {

void RodParams::derive() {
  const double pi = std::numbers::pi;
  area = pi * radius * radius;
  area_moment = pi * std::pow(radius, 4) / 4.0;
  inertia = Vec3(area_moment, area_moment, 2.0 * area_moment).asDiagonal();
  const double G = shear_modulus();
  const double E = youngs_modulus;
  Kse = Vec3(G * area, G * area, E * area).asDiagonal();
  Kbt = Vec3(E * area_moment, E * area_moment, G * 2.0 * area_moment).asDiagonal();
}

void RodParams::validate() const {
  if (!(length > 0.0) || !(radius > 0.0) || !(density > 0.0) || !(youngs_modulus > 0.0))
    throw std::invalid_argument("rod params: L, r, rho and E must be positive");
  if (segments < 2) throw std::invalid_argument("rod params: need at least 2 segments");
  if (!(dt > 0.0)) throw std::invalid_argument("rod params: dt must be positive");
  if (tendon_angles.empty()) throw std::invalid_argument("rod params: no tendons");
  if (!vstar.allFinite() || !ustar.allFinite() || !gravity.allFinite())
    throw std::invalid_argument("rod params: non-finite reference strain or gravity");
  Eigen::SelfAdjointEigenSolver<Mat3> kse(Kse), kbt(Kbt);
  if (kse.eigenvalues().minCoeff() <= 0.0 || kbt.eigenvalues().minCoeff() <= 0.0)
    throw std::invalid_argument("rod params: Kse and Kbt must be positive definite");
  for (const Mat3* B : {&Bse, &Bbt, &drag}) {
    Eigen::SelfAdjointEigenSolver<Mat3> es(*B);
    if (es.eigenvalues().minCoeff() < -1e-12)
      throw std::invalid_argument("rod params: damping and drag must be positive semi-definite");
  }
}

RodParams RodParams::defaults() {
  RodParams p;
  p.derive();
  return p;
}

Vec19 SectionState::y() const {
  Vec19 out;
  out << p, h, n, m, q, w;
  return out;
}

Vec6 SectionState::z() const {
  Vec6 out;
  out << v, u;
  return out;
}

void SectionState::set_y(const Vec19& y) {
  p = y.segment<3>(0);
  h = y.segment<4>(3);
  n = y.segment<3>(7);
  m = y.segment<3>(10);
  q = y.segment<3>(13);
  w = y.segment<3>(16);
}

void SectionState::set_z(const Vec6& z) {
  v = z.head<3>();
  u = z.tail<3>();
}

Mat3 hat(const Vec3& vec) {
  Mat3 out;
  out << 0.0, -vec.z(), vec.y(),
         vec.z(), 0.0, -vec.x(),
         -vec.y(), vec.x(), 0.0;
  return out;
}

Vec4 quat_multiply(const Vec4& a, const Vec4& b) {
  return {a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
          a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
          a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
          a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]};
}

Vec4 quat_conjugate(const Vec4& h) { return {h[0], -h[1], -h[2], -h[3]}; }

Vec4 quat_normalized(const Vec4& h) {
  const double norm = h.norm();
  if (!(norm > 0.0) || !std::isfinite(norm))
    throw std::domain_error("quaternion has zero or non-finite norm");
  return h / norm;
}

Vec4 quat_from_axis_angle(const Vec3& axis, double angle) {
  const Vec3 a = axis.normalized();
  const double s = std::sin(0.5 * angle);
  return {std::cos(0.5 * angle), s * a.x(), s * a.y(), s * a.z()};
}

Mat3 quat_to_rot(const Vec4& h) {
  if (std::abs(h.norm() - 1.0) > 1e-6)
    throw std::invalid_argument("quat_to_rot: quaternion is not unit length");
  const double w = h[0], x = h[1], y = h[2], z = h[3];
  Mat3 R;
  R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return R;
}

Mat3 quat_to_rot_normalized(const Vec4& h) { return quat_to_rot(quat_normalized(h)); }

Vec4 rot_to_quat(const Mat3& R) {
  const double tr = R.trace();
  Vec4 h;
  if (tr > 0.0) {
    const double s = 2.0 * std::sqrt(tr + 1.0);
    h << 0.25 * s, (R(2, 1) - R(1, 2)) / s, (R(0, 2) - R(2, 0)) / s, (R(1, 0) - R(0, 1)) / s;
  } else if (R(0, 0) > R(1, 1) && R(0, 0) > R(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + R(0, 0) - R(1, 1) - R(2, 2));
    h << (R(2, 1) - R(1, 2)) / s, 0.25 * s, (R(0, 1) + R(1, 0)) / s, (R(0, 2) + R(2, 0)) / s;
  } else if (R(1, 1) > R(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + R(1, 1) - R(0, 0) - R(2, 2));
    h << (R(0, 2) - R(2, 0)) / s, (R(0, 1) + R(1, 0)) / s, 0.25 * s, (R(1, 2) + R(2, 1)) / s;
  } else {
    const double s = 2.0 * std::sqrt(1.0 + R(2, 2) - R(0, 0) - R(1, 1));
    h << (R(1, 0) - R(0, 1)) / s, (R(0, 2) + R(2, 0)) / s, (R(1, 2) + R(2, 1)) / s, 0.25 * s;
  }
  if (h[0] < 0.0) h = -h;
  return h.normalized();
}

namespace {

Vec3 solve_checked(const Mat3& M, const Vec3& rhs) {
  Mat3 inv;
  bool invertible = false;
  double det = 0.0;
  M.computeInverseAndDetWithCheck(inv, det, invertible, 1e-300);
  if (!invertible || !std::isfinite(det))
    throw std::domain_error("constitutive matrix K + c0*B is singular");
  return inv * rhs;
}

}  // namespace

Strains constitutive_vu(const Vec4& h, const Vec3& n, const Vec3& m, const Vec3& hv,
                        const Vec3& hu, const RodParams& params, double c0) {
  const Mat3 R = quat_to_rot_normalized(h);
  Strains out;
  out.v = solve_checked(params.Kse + c0 * params.Bse,
                        R.transpose() * n + params.Kse * params.vstar - params.Bse * hv);
  out.u = solve_checked(params.Kbt + c0 * params.Bbt,
                        R.transpose() * m + params.Kbt * params.ustar - params.Bbt * hu);
  return out;
}

TendonLoad tendon_load(std::span<const double> tau, const RodParams& params, const Mat3& R) {
  if (static_cast<int>(tau.size()) != params.tendon_count())
    throw std::invalid_argument("tendon_load: tension count does not match tendon count");
  TendonLoad load;
  Vec3 local_force = Vec3::Zero();
  Vec3 local_moment = Vec3::Zero();
  for (std::size_t i = 0; i < tau.size(); ++i) {
    const double phi = params.tendon_angles[i];
    const Vec3 radial(std::cos(phi), std::sin(phi), 0.0);
    const Vec3 dir = (Vec3(0.0, 0.0, -1.0) - params.routing_slope * radial).normalized();
    const Vec3 r = params.tendon_offset * radial;
    // The axial pull of a tendon is reacted inside the robot; only the
    // cross-sectional part loads the backbone.
    local_force += tau[i] * Vec3(dir.x(), dir.y(), 0.0);
    local_moment += r.cross(tau[i] * dir);
  }
  load.force = -(R * local_force) / params.length;
  load.moment = (R * local_moment) / params.length;
  return load;
}

Vec19 cosserat_rhs(const SectionState& s, const NodeHistory& hist, std::span<const double> tau,
                   const RodParams& params, double c0) {
  const Mat3 R = quat_to_rot_normalized(s.h);
  const double rhoA = params.density * params.area;
  const Mat3& J = params.inertia;

  const Vec3 v_t = c0 * s.v + hist.hv;
  const Vec3 u_t = c0 * s.u + hist.hu;
  const Vec3 q_t = c0 * s.q + hist.hq;
  const Vec3 w_t = c0 * s.w + hist.hw;

  const TendonLoad load = tendon_load(tau, params, R);

  const Vec3 p_s = R * s.v;
  const Vec4 h_s = 0.5 * quat_multiply(s.h, Vec4(0.0, s.u.x(), s.u.y(), s.u.z()));
  Vec3 n_s = R * (rhoA * (s.w.cross(s.q) + q_t) + params.drag * s.q.cwiseProduct(s.q.cwiseAbs()));
  if (params.include_self_weight) n_s -= rhoA * params.gravity;
  n_s -= load.force;
  const Vec3 m_s = params.density * R * (s.w.cross(J * s.w) + J * w_t) - p_s.cross(s.n) - load.moment;
  const Vec3 q_s = v_t - s.u.cross(s.q) + s.w.cross(s.v);
  const Vec3 w_s = u_t - s.u.cross(s.w);

  Vec19 out;
  out << p_s, h_s, n_s, m_s, q_s, w_s;
  return out;
}

Eigen::Matrix<double, 19, 6> cosserat_rhs_z_jacobian(const SectionState& s, const RodParams&,
                                                     double c0) {
  const Mat3 R = quat_to_rot_normalized(s.h);
  const double w = s.h[0], x = s.h[1], y = s.h[2], z = s.h[3];
  Eigen::Matrix<double, 4, 3> dh_du;
  dh_du << -x, -y, -z,
            w, -z,  y,
            z,  w, -x,
           -y,  x,  w;

  Eigen::Matrix<double, 19, 6> J = Eigen::Matrix<double, 19, 6>::Zero();
  J.block<3, 3>(0, 0) = R;
  J.block<4, 3>(3, 3) = 0.5 * dh_du;
  // m_s = ... - (R v) x n  =>  d/dv = hat(n) R
  J.block<3, 3>(10, 0) = hat(s.n) * R;
  J.block<3, 3>(13, 0) = c0 * Mat3::Identity() + hat(s.w);
  J.block<3, 3>(13, 3) = hat(s.q);
  J.block<3, 3>(16, 3) = c0 * Mat3::Identity() + hat(s.w);
  return J;
}

}  // namespace softrod
