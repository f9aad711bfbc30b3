#pragma once

#include <array>

#include "cotraj/expr.hpp"

// Minimal spatial (6D) algebra over expression scalars, body coordinates.
// Conventions follow the usual [angular; linear] stacking.

namespace cotraj {

struct Vec3 {
  Expr x, y, z;
  Vec3() = default;
  Vec3(Expr x_, Expr y_, Expr z_) : x(std::move(x_)), y(std::move(y_)), z(std::move(z_)) {}
  static Vec3 zero() { return {Expr(0.0), Expr(0.0), Expr(0.0)}; }
  static Vec3 of(double a, double b, double c) { return {Expr(a), Expr(b), Expr(c)}; }
  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  Vec3 operator*(const Expr& s) const { return {x * s, y * s, z * s}; }
};

inline Expr dot(const Vec3& a, const Vec3& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

struct Mat3 {
  // Row-major.
  std::array<std::array<Expr, 3>, 3> m;
  static Mat3 zero() {
    Mat3 r;
    for (auto& row : r.m)
      for (auto& e : row) e = Expr(0.0);
    return r;
  }
  static Mat3 identity() {
    Mat3 r = zero();
    r.m[0][0] = r.m[1][1] = r.m[2][2] = Expr(1.0);
    return r;
  }
  static Mat3 diag(Expr a, Expr b, Expr c) {
    Mat3 r = zero();
    r.m[0][0] = std::move(a);
    r.m[1][1] = std::move(b);
    r.m[2][2] = std::move(c);
    return r;
  }
  Mat3 transpose() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.m[i][j] = m[j][i];
    return r;
  }
  Mat3 operator+(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.m[i][j] = m[i][j] + o.m[i][j];
    return r;
  }
  Mat3 operator-(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.m[i][j] = m[i][j] - o.m[i][j];
    return r;
  }
  Mat3 operator*(const Mat3& o) const {
    Mat3 r = zero();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) r.m[i][j] += m[i][k] * o.m[k][j];
    return r;
  }
  Vec3 operator*(const Vec3& v) const {
    return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
  }
};

/// Skew-symmetric cross-product matrix a\times.
inline Mat3 skew(const Vec3& a) {
  Mat3 r = Mat3::zero();
  r.m[0][1] = -a.z;
  r.m[0][2] = a.y;
  r.m[1][0] = a.z;
  r.m[1][2] = -a.x;
  r.m[2][0] = -a.y;
  r.m[2][1] = a.x;
  return r;
}

/// Rodrigues rotation about a unit axis; constant-axis zeros fold away.
inline Mat3 axis_rotation(const Vec3& axis, const Expr& angle) {
  Expr c = cos(angle), s = sin(angle);
  Mat3 K = skew(axis);
  Mat3 R = Mat3::identity();
  Expr one_minus_c = Expr(1.0) - c;
  Mat3 KK = K * K;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      R.m[i][j] = R.m[i][j] + K.m[i][j] * s + KK.m[i][j] * one_minus_c;
  return R;
}

/// Motion or force 6-vector.
struct SpatialVec {
  Vec3 ang, lin;
  static SpatialVec zero() { return {Vec3::zero(), Vec3::zero()}; }
  SpatialVec operator+(const SpatialVec& o) const { return {ang + o.ang, lin + o.lin}; }
  SpatialVec operator-(const SpatialVec& o) const { return {ang - o.ang, lin - o.lin}; }
  SpatialVec operator*(const Expr& s) const { return {ang * s, lin * s}; }
};

inline Expr dot(const SpatialVec& a, const SpatialVec& b) {
  return dot(a.ang, b.ang) + dot(a.lin, b.lin);
}

/// Motion cross product: crm(v) m.
inline SpatialVec cross_motion(const SpatialVec& v, const SpatialVec& m) {
  return {cross(v.ang, m.ang), cross(v.ang, m.lin) + cross(v.lin, m.ang)};
}

/// Force cross product: crf(v) f.
inline SpatialVec cross_force(const SpatialVec& v, const SpatialVec& f) {
  return {cross(v.ang, f.ang) + cross(v.lin, f.lin), cross(v.ang, f.lin)};
}

/// Child frame pose expressed in the parent frame: x_parent = R x_child + p.
struct Pose {
  Mat3 R;
  Vec3 p;
  static Pose identity() { return {Mat3::identity(), Vec3::zero()}; }
  Pose operator*(const Pose& o) const {  // compose: this, then o in this frame
    return {R * o.R, p + R * o.p};
  }
  Vec3 apply(const Vec3& v) const { return p + R * v; }
};

/// Motion vector expressed in parent coordinates -> child coordinates.
inline SpatialVec motion_to_child(const Pose& X, const SpatialVec& v) {
  Mat3 Rt = X.R.transpose();
  return {Rt * v.ang, Rt * (v.lin - cross(X.p, v.ang))};
}

/// Force vector expressed in child coordinates -> parent coordinates.
inline SpatialVec force_to_parent(const Pose& X, const SpatialVec& f) {
  Vec3 fp = X.R * f.lin;
  return {X.R * f.ang + cross(X.p, fp), fp};
}

/// Spatial rigid-body inertia about the frame origin:
/// force = [I3 w + h x v; m v - h x w], with h = m * com.
struct SpatialInertia {
  Expr mass;
  Vec3 h;
  Mat3 I;  // rotational inertia about the frame origin
  static SpatialInertia zero() { return {Expr(0.0), Vec3::zero(), Mat3::zero()}; }

  SpatialVec apply(const SpatialVec& v) const {
    return {I * v.ang + cross(h, v.lin), v.lin * mass - cross(h, v.ang)};
  }
  SpatialInertia operator+(const SpatialInertia& o) const {
    return {mass + o.mass, h + o.h, I + o.I};
  }
};

/// From COM-centered quantities: mass, com offset c, inertia about the COM.
inline SpatialInertia inertia_from_com(const Expr& m, const Vec3& c,
                                       const Mat3& I_com) {
  Vec3 h = c * m;
  // Parallel-axis shift to the frame origin: I = I_com - c x h x.
  Mat3 I = I_com - skew(c) * skew(h);
  return {m, h, I};
}

/// Re-express an inertia given in child coordinates in parent coordinates,
/// where the child pose in the parent is X.
inline SpatialInertia inertia_to_parent(const Pose& X, const SpatialInertia& Ic) {
  Vec3 hr = X.R * Ic.h;
  Vec3 hp = hr + X.p * Ic.mass;
  Mat3 Ir = X.R * Ic.I * X.R.transpose();
  Mat3 Ip = Ir - skew(X.p) * skew(hr) - skew(hp) * skew(X.p);
  return {Ic.mass, hp, Ip};
}

}  // namespace cotraj
