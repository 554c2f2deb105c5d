#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "warptrack/errors.hpp"

namespace warptrack {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Vec8 = Eigen::Matrix<double, 8, 1>;
using Mat38 = Eigen::Matrix<double, 3, 8>;

/// Quaternion stored w-first. No unit constraint by itself; unit norm is
/// asserted by the operations that require it.
struct Quat {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  Quat() = default;
  Quat(double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {}

  Quat operator+(const Quat& o) const { return {w + o.w, x + o.x, y + o.y, z + o.z}; }
  Quat operator-(const Quat& o) const { return {w - o.w, x - o.x, y - o.y, z - o.z}; }
  Quat operator*(double s) const { return {w * s, x * s, y * s, z * s}; }

  /// Hamilton product.
  Quat operator*(const Quat& q) const {
    return {w * q.w - x * q.x - y * q.y - z * q.z,
            w * q.x + x * q.w + y * q.z - z * q.y,
            w * q.y - x * q.z + y * q.w + z * q.x,
            w * q.z + x * q.y - y * q.x + z * q.w};
  }

  Quat conjugate() const { return {w, -x, -y, -z}; }
  double dot(const Quat& o) const { return w * o.w + x * o.x + y * o.y + z * o.z; }
  double squaredNorm() const { return dot(*this); }
  double norm() const;
  Vec3 vec() const { return {x, y, z}; }
};

/// Unit axis; construction validates the norm to 1e-9.
struct Axis {
  double x = 0.0, y = 0.0, z = 1.0;

  Axis() = default;
  Axis(double x_, double y_, double z_);
  explicit Axis(const Vec3& v) : Axis(v.x(), v.y(), v.z()) {}

  /// Builds a unit axis from an arbitrary nonzero direction.
  static Axis normalized(const Vec3& v);

  Vec3 vec() const { return {x, y, z}; }
};

/// Dual quaternion H = real + dual * eps. Unit means |real| = 1 and
/// <real, dual> = 0; every transform stored in a skeleton is unit, while
/// blends and derivatives are general elements of the algebra.
struct DualQuat {
  Quat real{1, 0, 0, 0};
  Quat dual{0, 0, 0, 0};

  static DualQuat identity() { return {}; }

  DualQuat operator+(const DualQuat& o) const { return {real + o.real, dual + o.dual}; }
  DualQuat operator-(const DualQuat& o) const { return {real - o.real, dual - o.dual}; }
  DualQuat operator*(double s) const { return {real * s, dual * s}; }

  bool is_unit(double tol = 1e-9) const;
};

/// Rotation by theta (radians) about a fixed unit axis.
DualQuat hinge(double theta, const Axis& axis);

/// Translation by theta (meters) along a fixed unit axis.
DualQuat prismatic(double theta, const Axis& axis);

/// Transform composition: apply b, then a. Bilinear, so it is also valid on
/// non-unit elements (derivative chains rely on this).
DualQuat compose(const DualQuat& a, const DualQuat& b);

/// Rigid action of a unit dual quaternion on a point.
Vec3 transform_point(const DualQuat& h, const Vec3& p);

/// Projects onto the unit dual quaternions. Throws DegenerateBlend when the
/// real part has collapsed (|real| <= 1e-12).
DualQuat normalize(const DualQuat& h);

/// Inverse of a unit dual quaternion.
DualQuat inverse(const DualQuat& h);

/// Homogeneous 4x4 of a unit dual quaternion.
Mat4 to_matrix(const DualQuat& h);

/// Unit dual quaternion of a rigid 4x4; the representative with real.w >= 0
/// is returned. Throws NonRigidMatrix when the rotation block deviates from
/// orthonormal by more than 1e-6.
DualQuat from_matrix(const Mat4& m);

/// Rotation block of the normalized input.
Mat3 rotation_matrix(const DualQuat& h);

/// Canonical 8-vector layout: (real.w, real.x, real.y, real.z,
/// dual.w, dual.x, dual.y, dual.z). All Jacobian code depends on this order.
Vec8 to_vec8(const DualQuat& h);
DualQuat from_vec8(const Vec8& v);

/// d(hinge(theta, axis))/d(theta) in the canonical 8-vector layout.
Vec8 d_hinge(double theta, const Axis& axis);

/// d(prismatic(theta, axis))/d(theta); independent of theta.
Vec8 d_prismatic(double theta, const Axis& axis);

/// Derivative of p(h) = transform_point(normalize(h), u) with respect to the
/// eight components of h, evaluated at a general (typically blended,
/// unnormalized) h. 3x8 in the canonical layout.
Mat38 d_normalized_transform(const DualQuat& h, const Vec3& u);

}  // namespace warptrack
