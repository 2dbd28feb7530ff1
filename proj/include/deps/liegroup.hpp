// Exact kinematics on SO(3), SO(n) and SE(2): skew/vee maps, Euler-Rodrigues
// rotations, the admissible-rotation varieties used by the nonholonomic
// integrators, planar pose composition and (co)adjoint actions.
#pragma once

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>

namespace deps {

inline constexpr double kPi = 3.14159265358979323846264338327950288;

/// Wrap an angle to the half-open interval (-pi, pi].
inline double wrap_angle(double theta) {
  double r = std::remainder(theta, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

// =====================
// so(3) <-> R^3
// =====================

/// Skew matrix of v, so that hat3(v) * u = v x u.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> hat3(const Eigen::Matrix<Scalar, 3, 1>& v) {
  Eigen::Matrix<Scalar, 3, 3> m;
  m << Scalar(0), -v.z(), v.y(),
       v.z(), Scalar(0), -v.x(),
       -v.y(), v.x(), Scalar(0);
  return m;
}

/// Inverse of hat3. The input must be skew-symmetric within skew_tol
/// (relative to its magnitude), otherwise throws std::domain_error.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> vee3(const Eigen::Matrix<Scalar, 3, 3>& m,
                                 Scalar skew_tol = Scalar(1e-10)) {
  using std::abs;
  const Scalar scale = Scalar(1) + m.template lpNorm<Eigen::Infinity>();
  const Scalar defect = (m + m.transpose()).template lpNorm<Eigen::Infinity>();
  if (!(defect <= skew_tol * scale)) {
    throw std::domain_error("vee3: matrix is not skew-symmetric");
  }
  return Eigen::Matrix<Scalar, 3, 1>(m(2, 1), m(0, 2), m(1, 0));
}

// =====================
// Rotations
// =====================

/// Unit quaternion in Euler-Rodrigues components (q0 scalar part).
struct EulerRodrigues {
  double q0, q1, q2, q3;

  EulerRodrigues(double w, double x, double y, double z) : q0(w), q1(x), q2(y), q3(z) {
    const double n = std::sqrt(q0 * q0 + q1 * q1 + q2 * q2 + q3 * q3);
    if (std::abs(n - 1.0) > 1e-12) {
      throw std::invalid_argument("EulerRodrigues: components are not unit-norm");
    }
  }

  static EulerRodrigues normalized(double w, double x, double y, double z) {
    const double n = std::sqrt(w * w + x * x + y * y + z * z);
    if (n == 0.0) throw std::invalid_argument("EulerRodrigues: zero norm");
    return EulerRodrigues(w / n, x / n, y / n, z / n);
  }
};

/// Rotation matrix of a unit quaternion. Convention fixed by the identity
/// rotation_from_euler_rodrigues({cos a/2, sin a/2, 0, 0}) = diag-rotation
/// about e1 with R(2,1) = sin a.
inline Eigen::Matrix3d rotation_from_euler_rodrigues(const EulerRodrigues& q) {
  const double q0 = q.q0, q1 = q.q1, q2 = q.q2, q3 = q.q3;
  Eigen::Matrix3d r;
  r << q0 * q0 + q1 * q1 - q2 * q2 - q3 * q3, 2 * (q1 * q2 + q3 * q0), -2 * (q1 * q3 - q2 * q0),
       2 * (q1 * q2 - q3 * q0), q0 * q0 + q2 * q2 - q1 * q1 - q3 * q3, -2 * (q2 * q3 + q0 * q1),
       -2 * (q1 * q3 + q2 * q0), -2 * (q2 * q3 - q0 * q1), q0 * q0 + q3 * q3 - q1 * q1 - q2 * q2;
  return r;
}

/// Point of RP^2 parameterizing rotations about an axis in the (e1, e2)
/// plane (q3 = 0 quaternions). Stored as the canonical representative with
/// q0 >= 0; if q0 == 0 the first nonzero of (q1, q2) is >= 0.
struct AdmissibleRotation {
  double q0, q1, q2;

  AdmissibleRotation(double w, double x, double y) : q0(w), q1(x), q2(y) {
    const double n = std::sqrt(q0 * q0 + q1 * q1 + q2 * q2);
    if (std::abs(n - 1.0) > 1e-12) {
      throw std::invalid_argument("AdmissibleRotation: components are not unit-norm");
    }
    canonicalize();
  }

  /// Normalizes an arbitrary nonzero triple onto the unit sphere.
  static AdmissibleRotation from_unnormalized(double w, double x, double y) {
    const double n = std::sqrt(w * w + x * x + y * y);
    if (n == 0.0) throw std::invalid_argument("AdmissibleRotation: zero norm");
    return AdmissibleRotation(w / n, x / n, y / n);
  }

  /// Completes (q1, q2) inside the unit disk with q0 = sqrt(1 - q1^2 - q2^2).
  static AdmissibleRotation from_disk(double x, double y) {
    const double r2 = x * x + y * y;
    if (r2 > 1.0 + 1e-12) {
      throw std::invalid_argument("AdmissibleRotation: (q1, q2) outside the unit disk");
    }
    return AdmissibleRotation(std::sqrt(std::max(0.0, 1.0 - r2)), x, y);
  }

  /// Chordal distance between projective points, min(|p - q|, |p + q|).
  double distance(const AdmissibleRotation& o) const {
    const Eigen::Vector3d a(q0, q1, q2), b(o.q0, o.q1, o.q2);
    return std::min((a - b).norm(), (a + b).norm());
  }

 private:
  void canonicalize() {
    bool flip = false;
    if (q0 < 0.0) {
      flip = true;
    } else if (q0 == 0.0) {
      if (q1 < 0.0) flip = true;
      else if (q1 == 0.0 && q2 < 0.0) flip = true;
    }
    if (flip) { q0 = -q0; q1 = -q1; q2 = -q2; }
  }
};

/// Rotation matrix of an admissible parameter. Symmetric in its upper-left
/// 2x2 block and antisymmetric in the last row/column.
inline Eigen::Matrix3d admissible_rotation_so3(const AdmissibleRotation& p) {
  const double q0 = p.q0, q1 = p.q1, q2 = p.q2;
  Eigen::Matrix3d r;
  r << 2 * (q0 * q0 + q1 * q1) - 1, 2 * q1 * q2, 2 * q0 * q2,
       2 * q1 * q2, 2 * (q0 * q0 + q2 * q2) - 1, -2 * q0 * q1,
       -2 * q0 * q2, 2 * q0 * q1, 2 * q0 * q0 - 1;
  return r;
}

/// SO(n) analog: rotation in the plane spanned by (u, e_n) parameterized by
/// a unit vector z = (z0, z1, ..., z_{n-1}); n >= 2.
inline Eigen::MatrixXd admissible_rotation_son(const Eigen::VectorXd& z) {
  const Eigen::Index n = z.size();
  if (n < 2) throw std::invalid_argument("admissible_rotation_son: need n >= 2");
  if (std::abs(z.norm() - 1.0) > 1e-12) {
    throw std::invalid_argument("admissible_rotation_son: z is not unit-norm");
  }
  Eigen::MatrixXd r(n, n);
  const double z0 = z(0);
  for (Eigen::Index i = 1; i < n; ++i) {
    for (Eigen::Index j = 1; j < n; ++j) {
      r(i - 1, j - 1) = (i == j ? 1.0 : 0.0) - 2.0 * z(i) * z(j);
    }
    r(i - 1, n - 1) = 2.0 * z0 * z(i);
    r(n - 1, i - 1) = -2.0 * z0 * z(i);
  }
  r(n - 1, n - 1) = 2.0 * z0 * z0 - 1.0;
  return r;
}

/// Inverse of admissible_rotation_so3 on its image; returns the canonical
/// representative. Throws std::domain_error if R is farther than tol from
/// the admissible variety.
inline AdmissibleRotation log_admissible_so3(const Eigen::Matrix3d& r, double tol = 1e-8) {
  const double sym12 = r(0, 1) - r(1, 0);
  const double asym13 = r(0, 2) + r(2, 0);
  const double asym23 = r(1, 2) + r(2, 1);
  if (std::abs(sym12) > tol || std::abs(asym13) > tol || std::abs(asym23) > tol) {
    throw std::domain_error("log_admissible_so3: matrix violates the variety structure");
  }
  const double q0 = std::sqrt(std::max(0.0, (r(2, 2) + 1.0) / 2.0));
  double q1, q2;
  if (q0 > 0.25) {
    q1 = r(2, 1) / (2.0 * q0);
    q2 = r(0, 2) / (2.0 * q0);
  } else {
    // Near a half-turn: recover magnitudes from the diagonal, relative
    // sign from R(0,1) = 2 q1 q2, then re-sign against R(2,1), R(0,2).
    q1 = std::sqrt(std::max(0.0, (r(0, 0) + 1.0) / 2.0 - q0 * q0));
    q2 = std::sqrt(std::max(0.0, (r(1, 1) + 1.0) / 2.0 - q0 * q0));
    if (r(0, 1) < 0.0) q2 = -q2;
    if (q0 > 1e-12) {
      const double ref = (std::abs(q1) > std::abs(q2)) ? r(2, 1) * q1 : r(0, 2) * q2;
      if (ref < 0.0) { q1 = -q1; q2 = -q2; }
    }
  }
  const AdmissibleRotation p = AdmissibleRotation::from_unnormalized(q0, q1, q2);
  const double defect = (admissible_rotation_so3(p) - r).lpNorm<Eigen::Infinity>();
  if (defect > 10.0 * tol) {
    throw std::domain_error("log_admissible_so3: matrix is off the admissible variety");
  }
  return p;
}

// =====================
// SE(2)
// =====================

/// Planar pose; theta is stored wrapped to (-pi, pi].
struct PoseSE2 {
  double theta = 0.0, x = 0.0, y = 0.0;
  PoseSE2() = default;
  PoseSE2(double th, double px, double py) : theta(wrap_angle(th)), x(px), y(py) {}
};

inline Eigen::Matrix3d se2_matrix(const PoseSE2& g) {
  Eigen::Matrix3d m;
  m << std::cos(g.theta), -std::sin(g.theta), g.x,
       std::sin(g.theta), std::cos(g.theta), g.y,
       0, 0, 1;
  return m;
}

inline PoseSE2 se2_compose(const PoseSE2& a, const PoseSE2& b) {
  const double c = std::cos(a.theta), s = std::sin(a.theta);
  return PoseSE2(a.theta + b.theta, a.x + c * b.x - s * b.y, a.y + s * b.x + c * b.y);
}

inline PoseSE2 se2_inverse(const PoseSE2& a) {
  const double c = std::cos(a.theta), s = std::sin(a.theta);
  return PoseSE2(-a.theta, -(c * a.x + s * a.y), -(-s * a.x + c * a.y));
}

/// One-step displacement in the body frame, Omega = A^{-1} B.
/// t1, t2 are the translation entries of Omega.
struct HelicalDisplacement {
  double dtheta = 0.0, t1 = 0.0, t2 = 0.0;
};

inline HelicalDisplacement helical_displacement(const PoseSE2& a, const PoseSE2& b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double c = std::cos(a.theta), s = std::sin(a.theta);
  return HelicalDisplacement{wrap_angle(b.theta - a.theta), c * dx + s * dy, -s * dx + c * dy};
}

/// Exponential of t * (omega, v, 0) in se(2); the screw motion of a point
/// advancing at speed v while turning at rate omega. Continuous at omega = 0.
inline PoseSE2 exp_d_se2(double omega, double v, double t) {
  const double u = omega * t;
  double s1, s2;  // sin(u)/u and (1 - cos(u))/u
  if (std::abs(u) < 1e-8) {
    s1 = 1.0 - u * u / 6.0;
    s2 = 0.5 * u * (1.0 - u * u / 12.0);
  } else {
    s1 = std::sin(u) / u;
    s2 = (1.0 - std::cos(u)) / u;
  }
  return PoseSE2(u, v * t * s1, v * t * s2);
}

// =====================
// Coadjoint actions
// =====================

/// Coadjoint transport of a body momentum vector by an admissible rotation:
/// returns Omega^T * M.
inline Eigen::Vector3d coad_so3(const AdmissibleRotation& p, const Eigen::Vector3d& m) {
  return admissible_rotation_so3(p).transpose() * m;
}

/// Coadjoint action of the displacement (dtheta, v1, v2) on a covector
/// P = (p_theta, p1, p2) of se*(2).
inline Eigen::Vector3d coad_se2(double dtheta, double v1, double v2, const Eigen::Vector3d& p) {
  const double c = std::cos(dtheta), s = std::sin(dtheta);
  return Eigen::Vector3d(p(0) - p(2) * v1 + p(1) * v2,
                         c * p(1) + s * p(2),
                         -s * p(1) + c * p(2));
}

}  // namespace deps
