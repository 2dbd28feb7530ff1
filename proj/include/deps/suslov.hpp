// Suslov rigid body: continuous momentum dynamics on so*(3) under the
// body-frame constraint (omega, gamma) = 0, and the discrete map on the
// admissible-rotation variety RP^2 with its conserved quadratic/quartic
// integrals, stationary line, and monotone coordinates.
#pragma once

#include <Eigen/Core>
#include <Eigen/Cholesky>
#include <Eigen/Geometry>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "deps/liegroup.hpp"
#include "deps/rootfind.hpp"

namespace deps {

// =====================
// Parameters
// =====================

/// Symmetric mass tensor J of the body. The 2x2 form
/// [[J22+J33, -J12], [-J12, J11+J33]] must be positive definite; this is
/// what bounds the discrete map to at most two real branches.
class MassTensor {
 public:
  explicit MassTensor(const Eigen::Matrix3d& j) : j_(0.5 * (j + j.transpose())) {
    const double a = j_(1, 1) + j_(2, 2);
    const double b = j_(0, 0) + j_(2, 2);
    const double c = -j_(0, 1);
    if (!(a > 0.0 && a * b - c * c > 0.0)) {
      throw std::invalid_argument("MassTensor: constrained 2x2 form is not positive definite");
    }
  }

  MassTensor(double j11, double j22, double j33, double j12, double j13, double j23)
      : MassTensor((Eigen::Matrix3d() << j11, j12, j13, j12, j22, j23, j13, j23, j33).finished()) {}

  static MassTensor diagonal(double j1, double j2, double j3) {
    return MassTensor(j1, j2, j3, 0.0, 0.0, 0.0);
  }

  const Eigen::Matrix3d& matrix() const { return j_; }
  double j11() const { return j_(0, 0); }
  double j22() const { return j_(1, 1); }
  double j33() const { return j_(2, 2); }
  double j12() const { return j_(0, 1); }
  double j13() const { return j_(0, 2); }
  double j23() const { return j_(1, 2); }
  bool is_diagonal(double tol = 1e-14) const {
    return std::abs(j12()) <= tol && std::abs(j13()) <= tol && std::abs(j23()) <= tol;
  }

 private:
  Eigen::Matrix3d j_;
};

/// Positive-definite inertia operator of the continuous body, acting on
/// angular-velocity vectors.
class InertiaOperator {
 public:
  explicit InertiaOperator(const Eigen::Matrix3d& i) : i_(0.5 * (i + i.transpose())) {
    Eigen::LLT<Eigen::Matrix3d> llt(i_);
    if (llt.info() != Eigen::Success) {
      throw std::invalid_argument("InertiaOperator: matrix is not positive definite");
    }
    inv_ = llt.solve(Eigen::Matrix3d::Identity());
  }

  static InertiaOperator diagonal(double i1, double i2, double i3) {
    return InertiaOperator(Eigen::Vector3d(i1, i2, i3).asDiagonal().toDenseMatrix());
  }

  /// Vector-form inertia of a body with mass tensor J: tr(J) I - J. For a
  /// diagonal J this is diag(J2+J3, J1+J3, J1+J2).
  static InertiaOperator from_mass_tensor(const MassTensor& j) {
    return InertiaOperator(j.matrix().trace() * Eigen::Matrix3d::Identity() - j.matrix());
  }

  const Eigen::Matrix3d& matrix() const { return i_; }
  const Eigen::Matrix3d& inverse() const { return inv_; }
  Eigen::Vector3d apply(const Eigen::Vector3d& w) const { return i_ * w; }
  Eigen::Vector3d solve(const Eigen::Vector3d& m) const { return inv_ * m; }
  bool is_diagonal(double tol = 1e-14) const {
    return std::abs(i_(0, 1)) <= tol && std::abs(i_(0, 2)) <= tol && std::abs(i_(1, 2)) <= tol;
  }

 private:
  Eigen::Matrix3d i_;
  Eigen::Matrix3d inv_;
};

// =====================
// Continuous dynamics
// =====================

/// Momentum and constraint covector of the continuous body. gamma is the
/// unit vector, fixed in the body frame, that the angular velocity must
/// stay orthogonal to.
struct SuslovContinuousState {
  Eigen::Vector3d m = Eigen::Vector3d::Zero();
  Eigen::Vector3d gamma{0.0, 0.0, 1.0};

  /// Constraint defect (omega, gamma); zero on admissible states.
  double constraint_defect(const InertiaOperator& in) const { return in.solve(m).dot(gamma); }
};

/// Momentum equation of the constrained body, multiplier form:
/// dM/dt = M x omega + lambda gamma with lambda chosen so that
/// (omega, gamma) stays zero. Throws on a zero gamma.
inline Eigen::Vector3d suslov_rhs_multiplier(const Eigen::Vector3d& m, const InertiaOperator& in,
                                             const Eigen::Vector3d& gamma) {
  if (gamma.norm() == 0.0) throw std::invalid_argument("suslov_rhs: gamma must be nonzero");
  const Eigen::Vector3d omega = in.solve(m);
  const Eigen::Vector3d igamma = in.solve(gamma);
  const Eigen::Vector3d torque = m.cross(omega);
  const double lambda = -torque.dot(igamma) / gamma.dot(igamma);
  return torque + lambda * gamma;
}

/// Equivalent closed form (M, gamma) (I^{-1} gamma x omega) / (gamma, I^{-1} gamma).
/// The derivative is orthogonal to I^{-1} gamma, so (omega, gamma) is
/// preserved exactly.
inline Eigen::Vector3d suslov_rhs(const Eigen::Vector3d& m, const InertiaOperator& in,
                                  const Eigen::Vector3d& gamma) {
  if (gamma.norm() == 0.0) throw std::invalid_argument("suslov_rhs: gamma must be nonzero");
  const Eigen::Vector3d omega = in.solve(m);
  const Eigen::Vector3d igamma = in.solve(gamma);
  return m.dot(gamma) / gamma.dot(igamma) * igamma.cross(omega);
}

/// Classical fourth-order Runge-Kutta step for the momentum equation.
inline Eigen::Vector3d suslov_rk4_step(const Eigen::Vector3d& m, const InertiaOperator& in,
                                       const Eigen::Vector3d& gamma, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("suslov_rk4_step: dt must be positive");
  const Eigen::Vector3d k1 = suslov_rhs(m, in, gamma);
  const Eigen::Vector3d k2 = suslov_rhs(m + 0.5 * dt * k1, in, gamma);
  const Eigen::Vector3d k3 = suslov_rhs(m + 0.5 * dt * k2, in, gamma);
  const Eigen::Vector3d k4 = suslov_rhs(m + dt * k3, in, gamma);
  return m + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Full energy (M, I^{-1} M); conserved by the continuous flow but not by
/// the discrete map.
inline double suslov_energy(const Eigen::Vector3d& m, const InertiaOperator& in) {
  return m.dot(in.solve(m));
}

/// Degenerate quadratic integral of the continuous flow for a diagonal
/// inertia operator; equals the restriction of the full energy to the
/// constraint plane up to the factor det(I) (gamma, I^{-1} gamma).
inline double suslov_degenerate_integral(const Eigen::Vector3d& m, const InertiaOperator& in,
                                         const Eigen::Vector3d& gamma) {
  if (!in.is_diagonal(1e-12)) {
    throw std::invalid_argument("suslov_degenerate_integral: inertia operator must be diagonal");
  }
  const double i1 = in.matrix()(0, 0), i2 = in.matrix()(1, 1), i3 = in.matrix()(2, 2);
  const double g1 = gamma(0), g2 = gamma(1), g3 = gamma(2);
  Eigen::Matrix3d q;
  q << i2 * g3 * g3 + i3 * g2 * g2, -i3 * g1 * g2, -i2 * g1 * g3,
       -i3 * g1 * g2, i1 * g3 * g3 + i3 * g1 * g1, -i1 * g2 * g3,
       -i2 * g1 * g3, -i1 * g2 * g3, i1 * g2 * g2 + i2 * g1 * g1;
  return m.dot(q * m);
}

/// Reduced constrained energy for gamma = e3, in inertia-operator entries:
/// I22 M1^2 - 2 I12 M1 M2 + I11 M2^2.
inline double suslov_reduced_energy(const Eigen::Vector3d& m, const InertiaOperator& in) {
  const Eigen::Matrix3d& i = in.matrix();
  return i(1, 1) * m(0) * m(0) - 2.0 * i(0, 1) * m(0) * m(1) + i(0, 0) * m(1) * m(1);
}

// =====================
// Discrete Lagrangians
// =====================

/// Reduced discrete Lagrangian of a one-step rotation, l_d = 1/2 tr(Omega J).
inline double discrete_lagrangian_trace(const Eigen::Matrix3d& omega, const MassTensor& j) {
  return 0.5 * (omega * j.matrix()).trace();
}

inline double discrete_lagrangian_so3(const AdmissibleRotation& p, const MassTensor& j) {
  return discrete_lagrangian_trace(admissible_rotation_so3(p), j);
}

/// Unreduced form on a pair of attitudes, 1/2 tr(R_k J R_{k+1}^T).
inline double discrete_lagrangian_pair(const Eigen::Matrix3d& rk, const Eigen::Matrix3d& rk1,
                                       const MassTensor& j) {
  return 0.5 * (rk * j.matrix() * rk1.transpose()).trace();
}

/// Euler angles (theta, phi, psi) of an attitude matrix.
struct EulerAngles {
  double theta, phi, psi;
};

/// Attitude matrix of Euler angles, 3-1-3 convention with R(2,2) = cos(theta).
inline Eigen::Matrix3d rotation_from_euler_angles(const EulerAngles& a) {
  const double ct = std::cos(a.theta), st = std::sin(a.theta);
  const double cf = std::cos(a.phi), sf = std::sin(a.phi);
  const double cp = std::cos(a.psi), sp = std::sin(a.psi);
  Eigen::Matrix3d r;
  r << cf * cp - ct * sf * sp, -cf * sp - ct * sf * cp, st * sf,
       sf * cp + ct * cf * sp, -sf * sp + ct * cf * cp, -st * cf,
       st * sp, st * cp, ct;
  return r;
}

/// Closed-form discrete Lagrangian of a principal-axis body in Euler angles,
/// with A1 = J2+J3, A2 = J1+J3, A3 = J1+J2. Agrees with the trace form
/// evaluated on the corresponding attitude pair.
inline double discrete_lagrangian_euler_angles(const EulerAngles& xk, const EulerAngles& xk1,
                                               double a1, double a2, double a3) {
  const double ck = std::cos(xk.theta), sk = std::sin(xk.theta);
  const double c1 = std::cos(xk1.theta), s1 = std::sin(xk1.theta);
  const double cdf = std::cos(xk1.phi - xk.phi), sdf = std::sin(xk1.phi - xk.phi);
  const double cdp = std::cos(xk1.psi - xk.psi), sdp = std::sin(xk1.psi - xk.psi);
  const double csp = std::cos(xk.psi + xk1.psi), ssp = std::sin(xk.psi + xk1.psi);
  const double b1 = ck * c1 * (1.0 + cdf * csp) + sk * s1 * (cdf + csp) - cdf * csp +
                    (c1 - ck) * sdf * ssp;
  const double b2 = ck * c1 * (1.0 - cdf * csp) + cdf * csp + sk * s1 * (cdf - csp) -
                    (c1 - ck) * sdf * ssp;
  const double b3 = ck * c1 * (cdf * cdp - 1.0) + cdf * cdp + sk * s1 * (cdp - cdf) -
                    (c1 + ck) * sdf * sdp;
  return 0.25 * (a1 * b1 + a2 * b2 + a3 * b3);
}

// =====================
// Discrete momentum parameterization
// =====================

/// Body angular momentum of a one-step displacement; the vector form of
/// Omega J - J Omega^T under the correspondence M = (-M23, M13, -M12).
inline Eigen::Vector3d momentum_from_q(const AdmissibleRotation& p, const MassTensor& j) {
  const double q0 = p.q0, q1 = p.q1, q2 = p.q2;
  const double u = j.j13() * q1 + j.j23() * q2;
  return 2.0 * Eigen::Vector3d(
      (j.j22() + j.j33()) * q0 * q1 - j.j12() * q0 * q2 - u * q2,
      (j.j11() + j.j33()) * q0 * q2 - j.j12() * q0 * q1 + u * q1,
      (j.j11() - j.j22()) * q1 * q2 - j.j12() * (q1 * q1 - q2 * q2) - u * q0);
}

/// Coadjoint-transported momentum Omega^T M, in closed form. Differs from
/// momentum_from_q by the sign of the u-coupled terms.
inline Eigen::Vector3d coadjoint_momentum_from_q(const AdmissibleRotation& p, const MassTensor& j) {
  const double q0 = p.q0, q1 = p.q1, q2 = p.q2;
  const double u = j.j13() * q1 + j.j23() * q2;
  return 2.0 * Eigen::Vector3d(
      (j.j22() + j.j33()) * q0 * q1 - j.j12() * q0 * q2 + u * q2,
      (j.j11() + j.j33()) * q0 * q2 - j.j12() * q0 * q1 - u * q1,
      -(j.j11() - j.j22()) * q1 * q2 + j.j12() * (q1 * q1 - q2 * q2) - u * q0);
}

/// Defect of M against the quartic momentum surface of a diagonal mass
/// tensor (a generalized Steiner Roman surface). Zero exactly on the image
/// of momentum_from_q. Requires J1 != J2 and pairwise sums nonzero.
inline double steiner_residual(const Eigen::Vector3d& m, const MassTensor& j) {
  if (!j.is_diagonal(1e-12)) {
    throw std::invalid_argument("steiner_residual: mass tensor must be diagonal");
  }
  const double j1 = j.j11(), j2 = j.j22(), j3 = j.j33();
  const double d12 = j1 - j2, s23 = j2 + j3, s13 = j1 + j3;
  if (std::abs(d12) < 1e-12 || std::abs(s23) < 1e-12 || std::abs(s13) < 1e-12) {
    throw std::domain_error("steiner_residual: degenerate coefficient denominators");
  }
  const double m1 = m(0), m2 = m(1), m3 = m(2);
  return d12 / (s23 * s13) * m1 * m1 * m2 * m2 + s13 / (s23 * d12) * m1 * m1 * m3 * m3 +
         s23 / (s13 * d12) * m2 * m2 * m3 * m3 - 2.0 * m1 * m2 * m3;
}

/// Magnitude scale of the four surface terms, for relative residual checks.
inline double steiner_residual_scale(const Eigen::Vector3d& m, const MassTensor& j) {
  const double j1 = j.j11(), j2 = j.j22(), j3 = j.j33();
  const double d12 = j1 - j2, s23 = j2 + j3, s13 = j1 + j3;
  const double m1 = m(0), m2 = m(1), m3 = m(2);
  return std::abs(d12 / (s23 * s13) * m1 * m1 * m2 * m2) +
         std::abs(s13 / (s23 * d12) * m1 * m1 * m3 * m3) +
         std::abs(s23 / (s13 * d12) * m2 * m2 * m3 * m3) + std::abs(2.0 * m1 * m2 * m3);
}

// =====================
// Integrals of the discrete map
// =====================

/// Conserved quadratic form of the discrete map:
/// (J11+J33) M1^2 + 2 J12 M1 M2 + (J22+J33) M2^2.
inline double suslov_quadratic_integral(const Eigen::Vector3d& m, const MassTensor& j) {
  return (j.j11() + j.j33()) * m(0) * m(0) + 2.0 * j.j12() * m(0) * m(1) +
         (j.j22() + j.j33()) * m(1) * m(1);
}

/// The same integral as a quartic in the rotation parameters; normalized so
/// that it equals suslov_quadratic_integral(momentum_from_q(p, j), j)
/// identically.
inline double suslov_quartic_integral(const AdmissibleRotation& p, const MassTensor& j) {
  const double q0 = p.q0, q1 = p.q1, q2 = p.q2;
  const double u = j.j13() * q1 + j.j23() * q2;
  const double f1 = (j.j22() + j.j33()) * q1 * q1 - 2.0 * j.j12() * q1 * q2 +
                    (j.j11() + j.j33()) * q2 * q2;
  const double f2 = u * u +
                    ((j.j11() + j.j33()) * (j.j22() + j.j33()) - j.j12() * j.j12()) * q0 * q0;
  return 4.0 * f1 * f2;
}

/// Coordinates adapted to the stationary line: cal_m1 vanishes exactly on
/// stationary points, cal_m2 is non-decreasing along every orbit.
struct CalCoords {
  double m1, m2;
};

inline CalCoords cal_coords(const Eigen::Vector3d& m, const MassTensor& j) {
  const double c1 = j.j13() * (j.j11() + j.j33()) + j.j12() * j.j23();
  const double c2 = j.j23() * (j.j22() + j.j33()) + j.j12() * j.j13();
  return CalCoords{c1 * m(0) + c2 * m(1), j.j23() * m(0) - j.j13() * m(1)};
}

/// Exact per-step increment of cal_m2 along the discrete map,
/// 4 (J13 q1 + J23 q2)^2 >= 0.
inline double cal_monotonicity_increment(const AdmissibleRotation& p, const MassTensor& j) {
  const double u = j.j13() * p.q1 + j.j23() * p.q2;
  return 4.0 * u * u;
}

// =====================
// Stationary-set classification
// =====================

enum class EquilibriumType { non_equilibrium, stable, unstable, marginal };

/// A point is stationary iff J13 q1 + J23 q2 = 0. Stationary points split
/// into a stable and an unstable semi-line by the sign of the form Q; the
/// junction (Q = 0, e.g. a balanced tensor) is reported as marginal.
inline EquilibriumType classify_equilibrium(const AdmissibleRotation& p, const MassTensor& j,
                                            double tol = 1e-10) {
  const double scale = 1.0 + std::abs(j.j13()) + std::abs(j.j23());
  const double u = j.j13() * p.q1 + j.j23() * p.q2;
  if (std::abs(u) > tol * scale) return EquilibriumType::non_equilibrium;
  const double q = (j.j12() * j.j13() + j.j22() * j.j23() + j.j23() * j.j33()) * p.q1 -
                   (j.j11() * j.j13() + j.j12() * j.j23() + j.j13() * j.j33()) * p.q2;
  const double qscale = 1.0 + j.matrix().cwiseAbs().maxCoeff();
  if (q > tol * qscale) return EquilibriumType::stable;
  if (q < -tol * qscale) return EquilibriumType::unstable;
  return EquilibriumType::marginal;
}

// =====================
// The discrete map
// =====================

enum class BranchPolicy { continuity, smallest_norm, largest_norm };

enum class StepStatus { ok, branch_failure, solver_failure };

struct SuslovStepReport {
  StepStatus status = StepStatus::ok;
  int root_count = 0;
  int chosen_index = -1;
  double residual = 0.0;          // solver residual at the accepted root
  double delta_m3 = 0.0;          // multiplier-equivalent change of M3
  int iterations = 0;
};

struct SuslovDiscreteState {
  AdmissibleRotation q;
  std::optional<Eigen::Matrix3d> pose;  // accumulated attitude R_k
  std::vector<int> branch_history;
};

namespace detail {

/// Residual of the momentum-matching system in (q1, q2) over the unit disk
/// for given transported targets; q0 = sqrt(1 - q1^2 - q2^2).
inline Fn2 suslov_system(const Eigen::Vector2d& target, const MassTensor& j) {
  const double a11 = j.j22() + j.j33(), a22 = j.j11() + j.j33();
  const double a12 = j.j12(), b13 = j.j13(), b23 = j.j23();
  return [=](const Eigen::Vector2d& v) {
    const double x = v(0), y = v(1);
    const double r2 = x * x + y * y;
    if (r2 > 1.0) {
      // NaN residual makes the damped iteration backtrack into the disk.
      return Eigen::Vector2d(std::numeric_limits<double>::quiet_NaN(),
                             std::numeric_limits<double>::quiet_NaN());
    }
    const double s = std::sqrt(1.0 - r2);
    const double u = b13 * x + b23 * y;
    return Eigen::Vector2d(2.0 * ((a11 * x - a12 * y) * s - u * y) - target(0),
                           2.0 * ((a22 * y - a12 * x) * s + u * x) - target(1));
  };
}

inline Jac2 suslov_system_jacobian(const MassTensor& j) {
  const double a11 = j.j22() + j.j33(), a22 = j.j11() + j.j33();
  const double a12 = j.j12(), b13 = j.j13(), b23 = j.j23();
  return [=](const Eigen::Vector2d& v) {
    const double x = v(0), y = v(1);
    const double s = std::sqrt(std::max(1e-300, 1.0 - x * x - y * y));
    const double u = b13 * x + b23 * y;
    const double alpha = a11 * x - a12 * y;
    const double beta = a22 * y - a12 * x;
    Eigen::Matrix2d m;
    m(0, 0) = 2.0 * (a11 * s - alpha * x / s - b13 * y);
    m(0, 1) = 2.0 * (-a12 * s - alpha * y / s - b23 * y - u);
    m(1, 0) = 2.0 * (-a12 * s - beta * x / s + b13 * x + u);
    m(1, 1) = 2.0 * (a22 * s - beta * y / s + b23 * x);
    return m;
  };
}

inline std::vector<Eigen::Vector2d> disk_seed_grid() {
  std::vector<Eigen::Vector2d> seeds;
  seeds.emplace_back(0.0, 0.0);
  for (double r : {0.35, 0.75}) {
    for (int k = 0; k < 8; ++k) {
      const double a = kPi * (2.0 * k + 1.0) / 8.0;
      seeds.emplace_back(r * std::cos(a), r * std::sin(a));
    }
  }
  return seeds;
}

inline int select_branch(const std::vector<Eigen::Vector2d>& roots, const AdmissibleRotation& q,
                         BranchPolicy policy) {
  int best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (int i = 0; i < static_cast<int>(roots.size()); ++i) {
    const Eigen::Vector2d& r = roots[i];
    double score = 0.0;
    switch (policy) {
      case BranchPolicy::continuity:
        score = AdmissibleRotation::from_disk(r(0), r(1)).distance(q);
        break;
      case BranchPolicy::smallest_norm:
        score = r.squaredNorm();
        break;
      case BranchPolicy::largest_norm:
        score = -r.squaredNorm();
        break;
    }
    if (score < best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

}  // namespace detail

/// All real solutions (q1, q2) of the momentum-matching system with
/// q0 >= 0, deduplicated at chordal radius cfg.dedupe_radius and ordered
/// lexicographically. An empty list is a valid outcome.
inline std::vector<Eigen::Vector2d> solve_sys(double m1_target, double m2_target,
                                              const MassTensor& j,
                                              const std::vector<Eigen::Vector2d>& extra_seeds = {},
                                              NewtonConfig cfg = {},
                                              int* total_iterations = nullptr) {
  cfg.residual_tol = std::min(cfg.residual_tol, 1e-12);
  const Fn2 f = detail::suslov_system(Eigen::Vector2d(m1_target, m2_target), j);
  const Jac2 jac = detail::suslov_system_jacobian(j);
  std::vector<Eigen::Vector2d> seeds = extra_seeds;
  for (const Eigen::Vector2d& s : detail::disk_seed_grid()) seeds.push_back(s);
  // Projective chordal metric: (q1, q2) and (-q1, -q2) coincide when q0 = 0.
  auto metric = [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    const auto lift = [](const Eigen::Vector2d& v) {
      return Eigen::Vector3d(std::sqrt(std::max(0.0, 1.0 - v.squaredNorm())), v(0), v(1));
    };
    const Eigen::Vector3d pa = lift(a), pb = lift(b);
    return std::min((pa - pb).norm(), (pa + pb).norm());
  };
  MultistartResult ms = multistart(f, jac, seeds, cfg, metric);
  if (total_iterations) *total_iterations = ms.total_iterations;
  return std::move(ms.roots);
}

/// One step of the discrete Suslov map. Transports (M1, M2) by the
/// coadjoint action, inverts the momentum parameterization for the next
/// rotation parameter, and recovers M3 from the parameterization. The
/// multiplier shows up as the residual change of M3 reported in delta_m3.
inline SuslovStepReport suslov_step(SuslovDiscreteState& state, const MassTensor& j,
                                    BranchPolicy policy = BranchPolicy::continuity,
                                    const NewtonConfig& cfg = {}) {
  SuslovStepReport report;
  const AdmissibleRotation q = state.q;
  const Eigen::Vector3d transported = coadjoint_momentum_from_q(q, j);

  const std::vector<Eigen::Vector2d> roots =
      solve_sys(transported(0), transported(1), j, {Eigen::Vector2d(q.q1, q.q2)}, cfg,
                &report.iterations);
  report.root_count = static_cast<int>(roots.size());
  if (roots.empty()) {
    report.status = StepStatus::branch_failure;
    return report;
  }

  const int best = detail::select_branch(roots, q, policy);
  report.chosen_index = best;

  const AdmissibleRotation qn = AdmissibleRotation::from_disk(roots[best](0), roots[best](1));
  const Fn2 f = detail::suslov_system(transported.head<2>(), j);
  report.residual = f(roots[best]).norm();
  report.delta_m3 = momentum_from_q(qn, j)(2) - transported(2);

  if (state.pose) state.pose = (*state.pose) * admissible_rotation_so3(q);
  state.branch_history.push_back(best);
  state.q = qn;
  return report;
}

/// One step of the inverse map: finds the rotation parameter whose forward
/// step lands on the current state. Same enumeration machinery; the
/// transported-momentum system runs with the off-axis couplings negated.
inline SuslovStepReport suslov_step_back(SuslovDiscreteState& state, const MassTensor& j,
                                         BranchPolicy policy = BranchPolicy::continuity,
                                         const NewtonConfig& cfg = {}) {
  SuslovStepReport report;
  const AdmissibleRotation q = state.q;
  const Eigen::Vector3d m = momentum_from_q(q, j);
  const MassTensor j_flip(j.j11(), j.j22(), j.j33(), j.j12(), -j.j13(), -j.j23());

  const std::vector<Eigen::Vector2d> roots =
      solve_sys(m(0), m(1), j_flip, {Eigen::Vector2d(q.q1, q.q2)}, cfg, &report.iterations);
  report.root_count = static_cast<int>(roots.size());
  if (roots.empty()) {
    report.status = StepStatus::branch_failure;
    return report;
  }

  const int best = detail::select_branch(roots, q, policy);
  report.chosen_index = best;

  const AdmissibleRotation qp = AdmissibleRotation::from_disk(roots[best](0), roots[best](1));
  const Fn2 f = detail::suslov_system(m.head<2>(), j_flip);
  report.residual = f(roots[best]).norm();
  report.delta_m3 = m(2) - coadjoint_momentum_from_q(qp, j)(2);

  if (state.pose) state.pose = (*state.pose) * admissible_rotation_so3(qp).transpose();
  state.branch_history.push_back(-1 - best);
  state.q = qp;
  return report;
}

}  // namespace deps
