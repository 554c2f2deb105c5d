#include "warptrack/dualquat.hpp"

#include <cmath>

namespace warptrack {

namespace {

// Left multiplication matrix: L(p) * vec(q) = vec(p * q), w-first layout.
Mat4 left_mul(const Quat& p) {
  Mat4 m;
  m << p.w, -p.x, -p.y, -p.z,
       p.x,  p.w, -p.z,  p.y,
       p.y,  p.z,  p.w, -p.x,
       p.z, -p.y,  p.x,  p.w;
  return m;
}

// Right multiplication matrix: R(q) * vec(p) = vec(p * q).
Mat4 right_mul(const Quat& q) {
  Mat4 m;
  m << q.w, -q.x, -q.y, -q.z,
       q.x,  q.w,  q.z, -q.y,
       q.y, -q.z,  q.w,  q.x,
       q.z,  q.y, -q.x,  q.w;
  return m;
}

Eigen::Vector4d to_vec4(const Quat& q) { return {q.w, q.x, q.y, q.z}; }

Mat4 conj_sign() {
  Mat4 c = Mat4::Zero();
  c(0, 0) = 1.0;
  c(1, 1) = -1.0;
  c(2, 2) = -1.0;
  c(3, 3) = -1.0;
  return c;
}

}  // namespace

double Quat::norm() const { return std::sqrt(squaredNorm()); }

Axis::Axis(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {
  const double n = std::sqrt(x * x + y * y + z * z);
  if (std::abs(n - 1.0) > 1e-9)
    throw ValidationError("axis (" + std::to_string(x_) + ", " + std::to_string(y_) + ", " +
                          std::to_string(z_) + ") is not unit length");
}

Axis Axis::normalized(const Vec3& v) {
  const double n = v.norm();
  if (n <= 1e-12) throw ValidationError("cannot normalize a zero axis");
  Axis a;
  a.x = v.x() / n;
  a.y = v.y() / n;
  a.z = v.z() / n;
  return a;
}

bool DualQuat::is_unit(double tol) const {
  return std::abs(real.norm() - 1.0) <= tol && std::abs(real.dot(dual)) <= tol;
}

DualQuat hinge(double theta, const Axis& axis) {
  const double c = std::cos(theta * 0.5);
  const double s = std::sin(theta * 0.5);
  DualQuat h;
  h.real = {c, axis.x * s, axis.y * s, axis.z * s};
  h.dual = {0, 0, 0, 0};
  return h;
}

DualQuat prismatic(double theta, const Axis& axis) {
  DualQuat h;
  h.real = {1, 0, 0, 0};
  h.dual = {0, axis.x * theta * 0.5, axis.y * theta * 0.5, axis.z * theta * 0.5};
  return h;
}

DualQuat compose(const DualQuat& a, const DualQuat& b) {
  DualQuat r;
  r.real = a.real * b.real;
  r.dual = a.real * b.dual + a.dual * b.real;
  return r;
}

Vec3 transform_point(const DualQuat& h, const Vec3& p) {
  // v' = v + 2 w (u x v) + 2 u x (u x v) for the unit real part, plus the
  // translation 2 vec(dual * conj(real)).
  const Vec3 u = h.real.vec();
  const Vec3 uxp = u.cross(p);
  const Vec3 rotated = p + 2.0 * (h.real.w * uxp + u.cross(uxp));
  const Quat t = h.dual * h.real.conjugate();
  return rotated + 2.0 * t.vec();
}

DualQuat normalize(const DualQuat& h) {
  const double n = h.real.norm();
  if (n <= 1e-12) throw DegenerateBlend("dual quaternion real part has zero norm");
  const double inv = 1.0 / n;
  const double s = h.real.dot(h.dual);
  DualQuat r;
  r.real = h.real * inv;
  // Removes the component of dual along real so <real, dual> = 0 afterwards.
  r.dual = h.dual * inv - h.real * (s * inv * inv * inv);
  return r;
}

DualQuat inverse(const DualQuat& h) {
  return {h.real.conjugate(), h.dual.conjugate()};
}

Mat4 to_matrix(const DualQuat& h) {
  const Quat& q = h.real;
  Mat4 m = Mat4::Identity();
  m(0, 0) = 1 - 2 * (q.y * q.y + q.z * q.z);
  m(0, 1) = 2 * (q.x * q.y - q.w * q.z);
  m(0, 2) = 2 * (q.x * q.z + q.w * q.y);
  m(1, 0) = 2 * (q.x * q.y + q.w * q.z);
  m(1, 1) = 1 - 2 * (q.x * q.x + q.z * q.z);
  m(1, 2) = 2 * (q.y * q.z - q.w * q.x);
  m(2, 0) = 2 * (q.x * q.z - q.w * q.y);
  m(2, 1) = 2 * (q.y * q.z + q.w * q.x);
  m(2, 2) = 1 - 2 * (q.x * q.x + q.y * q.y);
  const Quat t = h.dual * h.real.conjugate();
  m(0, 3) = 2 * t.x;
  m(1, 3) = 2 * t.y;
  m(2, 3) = 2 * t.z;
  return m;
}

DualQuat from_matrix(const Mat4& m) {
  const Mat3 r = m.topLeftCorner<3, 3>();
  if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6 ||
      r.determinant() < 0.0)
    throw NonRigidMatrix("matrix rotation block is not orthonormal");

  // Shepperd's method: pick the largest diagonal combination for stability.
  Quat q;
  const double tr = r.trace();
  if (tr > 0.0) {
    double s = std::sqrt(tr + 1.0) * 2.0;
    q = {0.25 * s, (r(2, 1) - r(1, 2)) / s, (r(0, 2) - r(2, 0)) / s, (r(1, 0) - r(0, 1)) / s};
  } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2)) * 2.0;
    q = {(r(2, 1) - r(1, 2)) / s, 0.25 * s, (r(0, 1) + r(1, 0)) / s, (r(0, 2) + r(2, 0)) / s};
  } else if (r(1, 1) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2)) * 2.0;
    q = {(r(0, 2) - r(2, 0)) / s, (r(0, 1) + r(1, 0)) / s, 0.25 * s, (r(1, 2) + r(2, 1)) / s};
  } else {
    double s = std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1)) * 2.0;
    q = {(r(1, 0) - r(0, 1)) / s, (r(0, 2) + r(2, 0)) / s, (r(1, 2) + r(2, 1)) / s, 0.25 * s};
  }
  const double qn = q.norm();
  q = q * (1.0 / qn);
  if (q.w < 0.0) q = q * -1.0;  // deterministic double-cover representative

  const Quat t{0.0, m(0, 3), m(1, 3), m(2, 3)};
  DualQuat h;
  h.real = q;
  h.dual = (t * q) * 0.5;
  return h;
}

Mat3 rotation_matrix(const DualQuat& h) {
  return to_matrix(normalize(h)).topLeftCorner<3, 3>();
}

Vec8 to_vec8(const DualQuat& h) {
  Vec8 v;
  v << h.real.w, h.real.x, h.real.y, h.real.z, h.dual.w, h.dual.x, h.dual.y, h.dual.z;
  return v;
}

DualQuat from_vec8(const Vec8& v) {
  DualQuat h;
  h.real = {v[0], v[1], v[2], v[3]};
  h.dual = {v[4], v[5], v[6], v[7]};
  return h;
}

Vec8 d_hinge(double theta, const Axis& axis) {
  const double c = 0.5 * std::cos(theta * 0.5);
  const double s = -0.5 * std::sin(theta * 0.5);
  Vec8 d;
  d << s, axis.x * c, axis.y * c, axis.z * c, 0, 0, 0, 0;
  return d;
}

Vec8 d_prismatic(double /*theta*/, const Axis& axis) {
  Vec8 d;
  d << 0, 0, 0, 0, 0, axis.x * 0.5, axis.y * 0.5, axis.z * 0.5;
  return d;
}

Mat38 d_normalized_transform(const DualQuat& h, const Vec3& u) {
  // p(h) = vec(real * u4 * conj(real) + 2 dual * conj(real)) / |real|^2,
  // which equals the rigid action of normalize(h) on u. Differentiate the
  // numerator with quaternion product matrices and the denominator with the
  // quotient rule.
  const double n2 = h.real.squaredNorm();
  if (n2 <= 1e-24) throw DegenerateBlend("cannot differentiate a degenerate blend");
  const double inv_n2 = 1.0 / n2;

  const Quat u4{0.0, u.x(), u.y(), u.z()};
  const Mat4 conj = conj_sign();

  const Quat a = u4 * h.real.conjugate();                 // u4 * conj(real)
  const Quat g = h.real * a + (h.dual * h.real.conjugate()) * 2.0;
  const Vec3 f = g.vec() * inv_n2;                        // = transform_point(normalize(h), u)

  // d(real * u4 * conj(real))/d(real) + d(2 dual * conj(real))/d(real)
  const Mat4 dg_dreal =
      right_mul(a) + left_mul(h.real) * left_mul(u4) * conj + 2.0 * left_mul(h.dual) * conj;
  const Mat4 dg_ddual = 2.0 * right_mul(h.real.conjugate());

  Mat38 d;
  d.block<3, 4>(0, 0) = dg_dreal.bottomRows<3>() * inv_n2 -
                        f * (2.0 * inv_n2) * to_vec4(h.real).transpose();
  d.block<3, 4>(0, 4) = dg_ddual.bottomRows<3>() * inv_n2;
  return d;
}

}  // namespace warptrack
