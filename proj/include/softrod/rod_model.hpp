#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace softrod {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Vec19 = Eigen::Matrix<double, 19, 1>;
using Vec6 = Eigen::Matrix<double, 6, 1>;

/// Geometric, material and tendon parameters of a tendon-driven rod.
///
/// Stiffness and inertia matrices are derived from the scalar fields by
/// `derive()`; call it again after editing E, r, nu or rho.
struct RodParams {
  double length = 0.635;
  double radius = 0.003175;
  double density = 1411.6751;
  double youngs_modulus = 2.757903e9;
  double poisson_ratio = 0.30;

  // Derived by derive().
  double area = 0.0;
  double area_moment = 0.0;
  Mat3 inertia = Mat3::Zero();  // J
  Mat3 Kse = Mat3::Zero();
  Mat3 Kbt = Mat3::Zero();

  Mat3 Bse = Mat3::Zero();
  Mat3 Bbt = 0.03 * Mat3::Identity();
  Mat3 drag = 1e-4 * Mat3::Identity();
  Vec3 gravity{0.0, 0.0, -9.81};
  Vec3 vstar{0.0, 0.0, 1.0};
  Vec3 ustar = Vec3::Zero();

  std::vector<double> tendon_angles{0.0, 1.5707963267948966, 3.141592653589793,
                                    4.71238898038469};
  double tendon_offset = 0.05;
  double routing_slope = 0.0;
  bool include_self_weight = true;

  int segments = 10;
  double dt = 0.05;

  int tendon_count() const { return static_cast<int>(tendon_angles.size()); }
  int node_count() const { return segments + 1; }
  double ds() const { return length / segments; }
  double shear_modulus() const { return youngs_modulus / (2.0 * (1.0 + poisson_ratio)); }

  void derive();
  void validate() const;

  static RodParams defaults();
};

/// Full state of one spatial node. y = [p, h, n, m, q, w], z = [v, u].
struct SectionState {
  Vec3 p = Vec3::Zero();
  Vec4 h{1.0, 0.0, 0.0, 0.0};  // [w, x, y, z]
  Vec3 n = Vec3::Zero();
  Vec3 m = Vec3::Zero();
  Vec3 q = Vec3::Zero();
  Vec3 w = Vec3::Zero();
  Vec3 v{0.0, 0.0, 1.0};
  Vec3 u = Vec3::Zero();

  Vec19 y() const;
  Vec6 z() const;
  void set_y(const Vec19& y);
  void set_z(const Vec6& z);
};

using RodProfile = std::vector<SectionState>;

/// Per-node BDF history terms for v_t, u_t, q_t and w_t.
struct NodeHistory {
  Vec3 hv = Vec3::Zero();
  Vec3 hu = Vec3::Zero();
  Vec3 hq = Vec3::Zero();
  Vec3 hw = Vec3::Zero();
};

Mat3 hat(const Vec3& vec);

Vec4 quat_multiply(const Vec4& a, const Vec4& b);
Vec4 quat_conjugate(const Vec4& h);
Vec4 quat_normalized(const Vec4& h);
Vec4 quat_from_axis_angle(const Vec3& axis, double angle);

/// Throws std::invalid_argument if |h| is not 1 within 1e-6.
Mat3 quat_to_rot(const Vec4& h);
/// No norm check; normalizes first. For intermediate integrator stages.
Mat3 quat_to_rot_normalized(const Vec4& h);
Vec4 rot_to_quat(const Mat3& R);

struct Strains {
  Vec3 v;
  Vec3 u;
};

/// Constitutive law with BDF damping. Throws std::domain_error when
/// K + c0 B is singular.
Strains constitutive_vu(const Vec4& h, const Vec3& n, const Vec3& m, const Vec3& hv,
                        const Vec3& hu, const RodParams& params, double c0);

/// Distributed tendon force and moment, both in the global frame.
struct TendonLoad {
  Vec3 force = Vec3::Zero();
  Vec3 moment = Vec3::Zero();
};

TendonLoad tendon_load(std::span<const double> tau, const RodParams& params, const Mat3& R);

/// Spatial derivative y_s of the semi-discretized rod. `state` must carry
/// v and u already (from constitutive_vu or a corrected estimate).
Vec19 cosserat_rhs(const SectionState& state, const NodeHistory& hist,
                   std::span<const double> tau, const RodParams& params, double c0);

/// d(cosserat_rhs)/d[v; u] at fixed y. cosserat_rhs is affine in z.
Eigen::Matrix<double, 19, 6> cosserat_rhs_z_jacobian(const SectionState& state,
                                                     const RodParams& params, double c0);

}  // namespace softrod
