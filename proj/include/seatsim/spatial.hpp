// Spatial vector algebra for rigid body dynamics.
//
// Conventions used throughout:
//   - A twist (spatial velocity) is a 6-vector [angular; linear], measured at
//     the origin of the frame it is expressed in.
//   - A wrench (spatial force) is a 6-vector [torque; force] about the origin
//     of the frame it is expressed in.
//   - Pose{R, p} is the pose of frame B in frame A: x_A = R * x_B + p.
//   - Rotation triples are intrinsic x-y-z Cardan angles unless stated
//     otherwise: R = Rx(a) * Ry(b) * Rz(c).

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace seatsim {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Eigen::VectorXd;
using Eigen::MatrixXd;

// Motion subspace of a joint: up to 6 columns, stack-allocated.
using JointSubspace = Eigen::Matrix<double, 6, Eigen::Dynamic, Eigen::ColMajor, 6, 6>;

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

inline Mat3 rot_x(double a) { return Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix(); }
inline Mat3 rot_y(double a) { return Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix(); }
inline Mat3 rot_z(double a) { return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix(); }

/// R = Rx(c[0]) * Ry(c[1]) * Rz(c[2]).
inline Mat3 cardan_to_matrix(const Vec3& c) {
  return rot_x(c.x()) * rot_y(c.y()) * rot_z(c.z());
}

/// Inverse of cardan_to_matrix. Middle angle returned in [-pi/2, pi/2].
inline Vec3 matrix_to_cardan(const Mat3& R) {
  const double b = std::asin(std::clamp(R(0, 2), -1.0, 1.0));
  const double a = std::atan2(-R(1, 2), R(2, 2));
  const double c = std::atan2(-R(0, 1), R(0, 0));
  return {a, b, c};
}

struct Pose {
  Mat3 R = Mat3::Identity();
  Vec3 p = Vec3::Zero();

  static Pose identity() { return {}; }

  Pose operator*(const Pose& other) const { return {R * other.R, R * other.p + p}; }
  Vec3 operator*(const Vec3& x) const { return R * x + p; }

  Pose inverse() const { return {R.transpose(), -(R.transpose() * p)}; }
};

/// Twist expressed in B -> same twist expressed in A, given X_AB.
inline Vec6 transform_motion(const Pose& X_AB, const Vec6& m) {
  Vec6 out;
  const Vec3 w = X_AB.R * m.head<3>();
  out.head<3>() = w;
  out.tail<3>() = X_AB.R * m.tail<3>() + X_AB.p.cross(w);
  return out;
}

/// Twist expressed in A -> expressed in B, given X_AB.
inline Vec6 inv_transform_motion(const Pose& X_AB, const Vec6& m) {
  Vec6 out;
  out.head<3>() = X_AB.R.transpose() * m.head<3>();
  out.tail<3>() = X_AB.R.transpose() * (m.tail<3>() - X_AB.p.cross(m.head<3>()));
  return out;
}

/// Wrench expressed in B -> expressed in A, given X_AB.
inline Vec6 transform_force(const Pose& X_AB, const Vec6& f) {
  Vec6 out;
  const Vec3 lin = X_AB.R * f.tail<3>();
  out.tail<3>() = lin;
  out.head<3>() = X_AB.R * f.head<3>() + X_AB.p.cross(lin);
  return out;
}

/// Wrench expressed in A -> expressed in B, given X_AB.
inline Vec6 inv_transform_force(const Pose& X_AB, const Vec6& f) {
  Vec6 out;
  out.tail<3>() = X_AB.R.transpose() * f.tail<3>();
  out.head<3>() = X_AB.R.transpose() * (f.head<3>() - X_AB.p.cross(f.tail<3>()));
  return out;
}

/// Motion cross product: v x m.
inline Vec6 cross_motion(const Vec6& v, const Vec6& m) {
  Vec6 out;
  out.head<3>() = v.head<3>().cross(m.head<3>());
  out.tail<3>() = v.head<3>().cross(m.tail<3>()) + v.tail<3>().cross(m.head<3>());
  return out;
}

/// Dual (force) cross product: v x* f.
inline Vec6 cross_force(const Vec6& v, const Vec6& f) {
  Vec6 out;
  out.head<3>() = v.head<3>().cross(f.head<3>()) + v.tail<3>().cross(f.tail<3>());
  out.tail<3>() = v.head<3>().cross(f.tail<3>());
  return out;
}

/// 6x6 adjoint mapping twists expressed in B to twists expressed in A.
inline Mat6 motion_adjoint(const Pose& X_AB) {
  Mat6 m = Mat6::Zero();
  m.topLeftCorner<3, 3>() = X_AB.R;
  m.bottomRightCorner<3, 3>() = X_AB.R;
  m.bottomLeftCorner<3, 3>() = skew(X_AB.p) * X_AB.R;
  return m;
}

/// Rigid body spatial inertia about the body frame origin.
struct SpatialInertia {
  double mass = 0.0;
  Vec3 h = Vec3::Zero();          // first mass moment, mass * com
  Mat3 inertia = Mat3::Zero();    // rotational inertia about the frame origin

  static SpatialInertia from_com(double mass, const Vec3& com, const Mat3& inertia_com) {
    SpatialInertia si;
    si.mass = mass;
    si.h = mass * com;
    si.inertia = inertia_com - mass * skew(com) * skew(com);
    return si;
  }

  Vec3 com() const { return mass > 0.0 ? Vec3(h / mass) : Vec3::Zero(); }

  /// f = I * v.
  Vec6 apply(const Vec6& v) const {
    Vec6 f;
    f.head<3>() = inertia * v.head<3>() + h.cross(v.tail<3>());
    f.tail<3>() = mass * v.tail<3>() - h.cross(v.head<3>());
    return f;
  }

  Mat6 to_matrix() const {
    Mat6 m;
    m.topLeftCorner<3, 3>() = inertia;
    m.topRightCorner<3, 3>() = skew(h);
    m.bottomLeftCorner<3, 3>() = -skew(h);
    m.bottomRightCorner<3, 3>() = mass * Mat3::Identity();
    return m;
  }

  /// Re-express from frame B coordinates to frame A, given X_AB.
  SpatialInertia transform(const Pose& X_AB) const {
    SpatialInertia out;
    out.mass = mass;
    const Vec3 c_b = com();
    const Vec3 c_a = X_AB * c_b;
    out.h = mass * c_a;
    const Mat3 inertia_com = inertia + mass * skew(c_b) * skew(c_b);
    out.inertia = X_AB.R * inertia_com * X_AB.R.transpose() - mass * skew(c_a) * skew(c_a);
    return out;
  }
};

}  // namespace seatsim
