// Chaplygin sleigh: continuous momentum dynamics on se*(2) with pose
// reconstruction, and the discrete map on the Moebius-cylinder displacement
// variety with its conserved energy, cubic momentum locus (b = 0), branch
// selection, and bi-asymptotic behavior.
#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "deps/liegroup.hpp"
#include "deps/rootfind.hpp"
#include "deps/suslov.hpp"  // BranchPolicy, StepStatus

namespace deps {

// =====================
// Parameters and charts
// =====================

/// Mass m, moment of inertia J about the contact point, and center-of-mass
/// offsets (a, b) in the body frame. Only a affects the qualitative
/// dynamics; b shears the stationary line.
struct SleighParams {
  double m = 1.0, J = 1.5, a = 1.0, b = 0.0;
  SleighParams() = default;
  SleighParams(double mass, double inertia, double ca, double cb)
      : m(mass), J(inertia), a(ca), b(cb) {
    if (!(m > 0.0) || !(J > 0.0)) {
      throw std::invalid_argument("SleighParams: m and J must be positive");
    }
  }
};

/// Residual of the admissible-displacement constraint
/// V1 (1 - cos dtheta) - V2 sin dtheta.
inline double constraint_residual(double dtheta, double v1, double v2) {
  return v1 * (1.0 - std::cos(dtheta)) - v2 * std::sin(dtheta);
}

/// V2 determined by the constraint, V1 tan(dtheta / 2). Defined on
/// |dtheta| < pi; throws near the tangent singularity.
inline double v2_from_constraint(double dtheta, double v1) {
  if (std::abs(dtheta) >= kPi - 1e-9) {
    throw std::domain_error("v2_from_constraint: |dtheta| too close to pi");
  }
  return v1 * std::tan(0.5 * dtheta);
}

/// The rejected naive constraint (pure V2 = 0); kept for comparative runs.
/// Under it the a = 0 trajectory spirals instead of staying on a circle.
inline double naive_constraint_v2(double /*dtheta*/, double /*v1*/) { return 0.0; }

/// One-step displacement restricted to the admissible variety: stored as
/// the chart (dtheta, V1) with V2 derived, so the constraint is exact by
/// construction. |dtheta| < pi.
struct SleighDisplacement {
  double dtheta, v1, v2;

  SleighDisplacement(double dth, double velocity1, double velocity2)
      : dtheta(dth), v1(velocity1), v2(velocity2) {
    if (std::abs(dtheta) >= kPi) {
      throw std::invalid_argument("SleighDisplacement: |dtheta| must be < pi");
    }
    const double scale = 1.0 + std::abs(v1) + std::abs(v2);
    if (std::abs(constraint_residual(dtheta, v1, v2)) > 1e-10 * scale) {
      throw std::invalid_argument("SleighDisplacement: constraint residual too large");
    }
  }

  static SleighDisplacement from_chart(double dth, double velocity1) {
    const double velocity2 = v2_from_constraint(dth, velocity1);
    return SleighDisplacement(dth, velocity1, velocity2);
  }
};

// =====================
// Continuous dynamics
// =====================

/// Reduced Lagrangian of the sleigh as the quadratic form
/// 1/2 [ (J + m(a^2+b^2)) w^2 + m (v1^2 + v2^2) - 2 m b w v1 + 2 m a w v2 ].
inline double sleigh_reduced_lagrangian(double omega, double v1, double v2,
                                        const SleighParams& p) {
  return 0.5 * ((p.J + p.m * (p.a * p.a + p.b * p.b)) * omega * omega +
                p.m * (v1 * v1 + v2 * v2) - 2.0 * p.m * p.b * omega * v1 +
                2.0 * p.m * p.a * omega * v2);
}

/// Variant form with the b-coupling entering through v1 squared instead of
/// the bilinear cross term. Coincides with sleigh_reduced_lagrangian when
/// b = 0 or v1 is 0 or 1; kept only so comparison runs can quantify the
/// difference. The quadratic form is the one the dynamics uses.
inline double sleigh_reduced_lagrangian_alt(double omega, double v1, double v2,
                                            const SleighParams& p) {
  return 0.5 * ((p.J + p.m * (p.a * p.a + p.b * p.b)) * omega * omega +
                p.m * (v1 * v1 + v2 * v2) - 2.0 * p.m * p.b * omega * v1 * v1 +
                2.0 * p.m * p.a * omega * v2);
}

/// Matrix of the quadratic form on se(2) in the homogeneous representation,
/// so that the Lagrangian equals 1/2 tr(xi Jq xi^T).
inline Eigen::Matrix3d sleigh_quadratic_form_matrix(const SleighParams& p) {
  Eigen::Matrix3d jq;
  jq << 0.5 * p.J + p.m * p.a * p.a, p.m * p.a * p.b, p.m * p.a,
        p.m * p.a * p.b, 0.5 * p.J + p.m * p.b * p.b, p.m * p.b,
        p.m * p.a, p.m * p.b, p.m;
  return jq;
}

/// Momentum equation in (p_theta, p1) after eliminating the multiplier and
/// the constrained velocity.
inline Eigen::Vector2d sleigh_continuous_rhs(double p_theta, double p1, const SleighParams& p) {
  const double d = p.J + p.m * p.a * p.a;
  const double line = p_theta + p.b * p1;
  return Eigen::Vector2d(
      -p.a / (d * d) * line * (p.m * p.b * p_theta + (p.J + p.m * (p.a * p.a + p.b * p.b)) * p1),
      p.m * p.a / (d * d) * line * line);
}

/// Constrained energy m p_theta^2 + 2 b m p_theta p1 + (J + m(a^2+b^2)) p1^2;
/// conserved by both the continuous flow and the discrete map.
inline double sleigh_energy(double p_theta, double p1, const SleighParams& p) {
  return p.m * p_theta * p_theta + 2.0 * p.b * p.m * p_theta * p1 +
         (p.J + p.m * (p.a * p.a + p.b * p.b)) * p1 * p1;
}

inline Eigen::Vector2d sleigh_rk4_step(const Eigen::Vector2d& pp, const SleighParams& p,
                                       double dt) {
  const Eigen::Vector2d k1 = sleigh_continuous_rhs(pp(0), pp(1), p);
  const Eigen::Vector2d a2 = pp + 0.5 * dt * k1;
  const Eigen::Vector2d k2 = sleigh_continuous_rhs(a2(0), a2(1), p);
  const Eigen::Vector2d a3 = pp + 0.5 * dt * k2;
  const Eigen::Vector2d k3 = sleigh_continuous_rhs(a3(0), a3(1), p);
  const Eigen::Vector2d a4 = pp + dt * k3;
  const Eigen::Vector2d k4 = sleigh_continuous_rhs(a4(0), a4(1), p);
  return pp + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Closed-form pose of the a = 0 sleigh (constant omega and v1): a circle
/// for omega != 0, a straight line for omega = 0, continuous at omega = 0.
inline PoseSE2 reconstruct_continuous_a0(const PoseSE2& start, double omega, double v1,
                                         double t) {
  const double u = omega * t;
  double cs, sn;  // integrals of cos/sin of (theta0 + omega s) over [0, t], per unit t
  if (std::abs(u) < 1e-8) {
    cs = std::cos(start.theta) - 0.5 * u * std::sin(start.theta);
    sn = std::sin(start.theta) + 0.5 * u * std::cos(start.theta);
  } else {
    cs = (std::sin(start.theta + u) - std::sin(start.theta)) / u;
    sn = -(std::cos(start.theta + u) - std::cos(start.theta)) / u;
  }
  return PoseSE2(start.theta + u, start.x + v1 * t * cs, start.y + v1 * t * sn);
}

// =====================
// Discrete Lagrangian and momenta
// =====================

/// Discrete Lagrangian on a pose pair; left-invariant (it depends on the
/// pair only through the body displacement).
inline double discrete_lagrangian_se2(const PoseSE2& gk, const PoseSE2& gk1,
                                      const SleighParams& p) {
  const double dx = gk1.x - gk.x, dy = gk1.y - gk.y;
  const double dth = gk1.theta - gk.theta;
  return 0.5 * p.m * (dx * dx + dy * dy) +
         (p.J + p.m * (p.a * p.a + p.b * p.b)) * (1.0 - std::cos(dth)) +
         p.a * p.m * ((std::sin(gk1.theta) - std::sin(gk.theta)) * dy +
                      (std::cos(gk1.theta) - std::cos(gk.theta)) * dx) +
         p.b * p.m * ((std::cos(gk1.theta) - std::cos(gk.theta)) * dy -
                      (std::sin(gk1.theta) - std::sin(gk.theta)) * dx);
}

/// Discrete body momentum (p_theta, p1, p2) of a displacement triple.
inline Eigen::Vector3d discrete_momentum_se2(double dtheta, double v1, double v2,
                                             const SleighParams& p) {
  const double s = std::sin(dtheta), omc = 1.0 - std::cos(dtheta);
  return Eigen::Vector3d(
      (p.J + p.m * (p.a * p.a + p.b * p.b)) * s + p.a * p.m * v2 - p.b * p.m * v1,
      p.m * v1 - p.a * p.m * omc - p.b * p.m * s,
      p.m * v2 + p.a * p.m * s - p.b * p.m * omc);
}

inline Eigen::Vector3d discrete_momentum_se2(const SleighDisplacement& d, const SleighParams& p) {
  return discrete_momentum_se2(d.dtheta, d.v1, d.v2, p);
}

/// Free (unconstrained) update: pure coadjoint transport of the momentum.
inline Eigen::Vector3d sleigh_free_step(const SleighDisplacement& d, const Eigen::Vector3d& pk,
                                        const SleighParams& /*p*/) {
  return coad_se2(d.dtheta, d.v1, d.v2, pk);
}

/// Unconstrained displacement of a momentum triple: the Legendre relations
/// collapse to sin(dtheta) = (p_theta - a p2 + b p1) / J with (V1, V2)
/// linear in the momenta. The branch closest to hint_dtheta is returned;
/// throws when no real angle exists.
inline Eigen::Vector3d sleigh_free_legendre_inverse(const Eigen::Vector3d& pm,
                                                    const SleighParams& p,
                                                    double hint_dtheta = 0.0) {
  const double z = (pm(0) - p.a * pm(2) + p.b * pm(1)) / p.J;
  if (std::abs(z) > 1.0 + 1e-12) {
    throw std::domain_error("sleigh_free_legendre_inverse: no real displacement angle");
  }
  const double zc = std::clamp(z, -1.0, 1.0);
  const double principal = std::asin(zc);
  const double reflected = wrap_angle(kPi - principal);
  const double dtheta = std::abs(principal - hint_dtheta) <= std::abs(reflected - hint_dtheta)
                            ? principal
                            : reflected;
  const double c = std::cos(dtheta), s = std::sin(dtheta);
  const double v1 = pm(1) / p.m + p.a * (1.0 - c) + p.b * s;
  const double v2 = pm(2) / p.m - p.a * s + p.b * (1.0 - c);
  return Eigen::Vector3d(dtheta, v1, v2);
}

// =====================
// Cubic momentum locus (b = 0)
// =====================

/// Hat coordinates (p_theta, p_hat1 = a p1 + 2 m a^2, z = sin dtheta) in
/// which the momentum locus becomes a cubic surface.
struct HatCoords {
  double p_theta, p_hat1, z;
};

/// Coefficients (c3, c2, c1, c0) of the locus cubic in z = sin(dtheta):
/// J^2 z^3 - 2 J p_theta z^2 + (p_hat1^2 + 2 J p_hat1 + p_theta^2) z
/// - 2 p_theta p_hat1. Requires b = 0.
inline std::array<double, 4> cubic_coefficients(double p_theta, double p_hat1,
                                                const SleighParams& p) {
  if (p.b != 0.0) throw std::invalid_argument("cubic_coefficients: requires b = 0");
  return {p.J * p.J, -2.0 * p.J * p_theta,
          p_hat1 * p_hat1 + 2.0 * p.J * p_hat1 + p_theta * p_theta, -2.0 * p_theta * p_hat1};
}

inline double cubic_residual(const HatCoords& h, const SleighParams& p) {
  const auto c = cubic_coefficients(h.p_theta, h.p_hat1, p);
  return ((c[0] * h.z + c[1]) * h.z + c[2]) * h.z + c[3];
}

/// Region data of a point of the (p_theta, p_hat1) plane for b = 0:
/// the sign of cos(dtheta) over it, whether the locus projection is
/// three-to-one there, the printed discriminant-curve residual, and on
/// which side of the V1 = 0 ellipse it lies.
struct SurfaceRegion {
  int cos_sign;             // +1 inside L++ or L--, -1 in the mixed quadrants, 0 on a line
  bool three_to_one;        // cubic has three real roots in [-1, 1]
  double discriminant_residual;
  int v1_sign;              // -1 inside the ellipse, +1 outside, 0 on it
  double ellipse_value;     // signed ellipse membership function
};

inline SurfaceRegion surface_classify(double p_theta, double p_hat1, const SleighParams& p) {
  if (p.b != 0.0) throw std::invalid_argument("surface_classify: requires b = 0");
  SurfaceRegion r{};
  const double lp = -p_hat1 + p_theta - p.J;   // > 0 above the line l+
  const double lm = -p_hat1 - p_theta - p.J;   // > 0 above the line l-
  if (lp == 0.0 || lm == 0.0) r.cos_sign = 0;
  else r.cos_sign = (lp > 0.0) == (lm > 0.0) ? +1 : -1;

  const auto c = cubic_coefficients(p_theta, p_hat1, p);
  int real_in_band = 0;
  for (const Root& root : real_roots_cubic(c[0], c[1], c[2], c[3])) {
    if (std::abs(root.value) <= 1.0 + 1e-12) real_in_band += root.multiplicity;
  }
  r.three_to_one = real_in_band >= 3;

  const double J = p.J, pt2 = p_theta * p_theta;
  r.discriminant_residual = std::pow(p_hat1, 4) + 6.0 * J * std::pow(p_hat1, 3) +
                            p_hat1 * p_hat1 * (12.0 * J * J + 2.0 * pt2) -
                            p_hat1 * (10.0 * J * pt2 - 8.0 * J * J * J) + pt2 * pt2 -
                            J * J * pt2;

  const double ma2 = p.m * p.a * p.a;
  const double ex = p_theta / (p.J + ma2);
  const double ey = (ma2 != 0.0) ? p_hat1 / ma2 - 1.0 : std::numeric_limits<double>::infinity();
  r.ellipse_value = ex * ex + ey * ey - 1.0;
  const double etol = 1e-12 * (1.0 + ex * ex + ey * ey);
  r.v1_sign = (r.ellipse_value > etol) ? +1 : (r.ellipse_value < -etol ? -1 : 0);
  return r;
}

// =====================
// The discrete map
// =====================

struct SleighStepReport {
  StepStatus status = StepStatus::ok;
  int root_count = 0;
  int chosen_index = -1;
  double residual = 0.0;
  double lambda = 0.0;  // multiplier: defect of the p2 component against pure transport
  int iterations = 0;
  bool stationary_shortcut = false;
};

struct SleighStepResult {
  SleighDisplacement next;
  Eigen::Vector3d momentum_before;
  Eigen::Vector3d momentum_after;
  SleighStepReport report;

  explicit SleighStepResult(const SleighDisplacement& d)
      : next(d),
        momentum_before(Eigen::Vector3d::Zero()),
        momentum_after(Eigen::Vector3d::Zero()) {}
};

namespace detail {

/// Residual of the next-displacement system in (dtheta, V1) for given
/// updated momenta (targets); V2 is eliminated through the constraint.
inline Fn2 sleigh_system(const Eigen::Vector2d& target, const SleighParams& p, double a_sign) {
  const double k = p.J + p.m * (p.a * p.a + p.b * p.b);
  const double am = a_sign * p.a * p.m, bm = p.b * p.m, m = p.m;
  return [=](const Eigen::Vector2d& v) {
    const double t = v(0), w = v(1);
    if (std::abs(t) >= kPi - 1e-9) {
      return Eigen::Vector2d(std::numeric_limits<double>::quiet_NaN(),
                             std::numeric_limits<double>::quiet_NaN());
    }
    const double ht = std::tan(0.5 * t);
    return Eigen::Vector2d(k * std::sin(t) + (am * ht - bm) * w - target(0),
                           m * w - am * (1.0 - std::cos(t)) - bm * std::sin(t) - target(1));
  };
}

inline Jac2 sleigh_system_jacobian(const SleighParams& p, double a_sign) {
  const double k = p.J + p.m * (p.a * p.a + p.b * p.b);
  const double am = a_sign * p.a * p.m, bm = p.b * p.m, m = p.m;
  return [=](const Eigen::Vector2d& v) {
    const double t = v(0), w = v(1);
    const double ht = std::tan(0.5 * t);
    Eigen::Matrix2d jm;
    jm(0, 0) = k * std::cos(t) + 0.5 * am * w * (1.0 + ht * ht);
    jm(0, 1) = am * ht - bm;
    jm(1, 0) = -am * std::sin(t) - bm * std::cos(t);
    jm(1, 1) = m;
    return jm;
  };
}

/// Candidate (dtheta, V1) seeds for the Legendre inversion with momenta
/// targets; the b = 0 cubic supplies sharp seeds, a fan around the current
/// angle covers the rest.
inline std::vector<Eigen::Vector2d> sleigh_seeds(const Eigen::Vector2d& target,
                                                 const SleighParams& p, double a_sign,
                                                 double dtheta_prev, double v1_prev) {
  std::vector<Eigen::Vector2d> seeds;
  seeds.emplace_back(dtheta_prev, v1_prev);
  // Roots of the b = 0 locus cubic, each mapped back through the quartic
  // relation cos = 1 - (p_theta z - J z^2) / p_hat1.
  const double a_eff = a_sign * p.a;
  const double p_hat1 = a_eff * target(1) + 2.0 * p.m * a_eff * a_eff;
  if (p.a != 0.0 && std::abs(p_hat1) > 1e-12) {
    const double J = p.J;
    for (const Root& root : real_roots_cubic(J * J, -2.0 * J * target(0),
                                             p_hat1 * p_hat1 + 2.0 * J * p_hat1 +
                                                 target(0) * target(0),
                                             -2.0 * target(0) * p_hat1)) {
      const double z = root.value;
      if (std::abs(z) > 1.0 + 1e-9) continue;
      const double c = 1.0 - (target(0) * z - J * z * z) / p_hat1;
      if (std::abs(c) > 1.0 + 1e-6) continue;
      const double t = std::atan2(z, std::clamp(c, -1.0, 1.0));
      const double w =
          target(1) / p.m + a_eff * (1.0 - std::clamp(c, -1.0, 1.0)) + p.b * std::sin(t);
      seeds.emplace_back(t, w);
    }
  }
  for (double dt : {dtheta_prev + 0.25 * kPi, dtheta_prev - 0.25 * kPi, -dtheta_prev + 0.25 * kPi,
                    -dtheta_prev - 0.25 * kPi}) {
    if (std::abs(dt) < kPi - 1e-6) seeds.emplace_back(dt, v1_prev);
  }
  seeds.emplace_back(0.0, target(1) / p.m);
  return seeds;
}

inline int select_sleigh_branch(const std::vector<Eigen::Vector2d>& roots, double dtheta_prev,
                                BranchPolicy policy) {
  int best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (int i = 0; i < static_cast<int>(roots.size()); ++i) {
    double score = 0.0;
    switch (policy) {
      case BranchPolicy::continuity:
        score = std::abs(roots[i](0) - dtheta_prev);
        break;
      case BranchPolicy::smallest_norm:
        score = std::abs(std::sin(roots[i](0)));
        break;
      case BranchPolicy::largest_norm:
        score = -std::abs(std::sin(roots[i](0)));
        break;
    }
    if (score < best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

/// Shared body of the forward and backward step: solve the Legendre-type
/// system (with the a-coupling possibly negated) for the new chart point.
inline SleighStepResult sleigh_invert(const Eigen::Vector2d& target, const SleighParams& p,
                                      double a_sign, double dtheta_prev, double v1_prev,
                                      BranchPolicy policy, NewtonConfig cfg) {
  cfg.residual_tol = std::min(cfg.residual_tol, 1e-12);
  SleighStepResult out(SleighDisplacement::from_chart(dtheta_prev, v1_prev));
  const Fn2 f = detail::sleigh_system(target, p, a_sign);
  const Jac2 jac = detail::sleigh_system_jacobian(p, a_sign);
  const auto seeds = detail::sleigh_seeds(target, p, a_sign, dtheta_prev, v1_prev);
  const MultistartResult ms = multistart(f, jac, seeds, cfg);
  out.report.iterations = ms.total_iterations;
  out.report.root_count = static_cast<int>(ms.roots.size());
  if (ms.roots.empty()) {
    out.report.status = StepStatus::branch_failure;
    return out;
  }
  const int best = detail::select_sleigh_branch(ms.roots, dtheta_prev, policy);
  out.report.chosen_index = best;
  out.report.residual = f(ms.roots[best]).norm();
  out.next = SleighDisplacement::from_chart(ms.roots[best](0), ms.roots[best](1));
  return out;
}

}  // namespace detail

/// One step of the discrete sleigh map in the constraint chart. Updates
/// (p_theta, p1) by the momentum law, then inverts the discrete Legendre
/// transformation on the admissible variety for the next displacement.
/// For a = 0 every state is stationary and the step is exact.
inline SleighStepResult sleigh_step(const SleighDisplacement& d, const SleighParams& p,
                                    BranchPolicy policy = BranchPolicy::continuity,
                                    const NewtonConfig& cfg = {}) {
  const Eigen::Vector3d pk = discrete_momentum_se2(d, p);
  if (p.a == 0.0) {
    SleighStepResult out(d);
    out.momentum_before = pk;
    out.momentum_after = pk;
    out.report.stationary_shortcut = true;
    out.report.root_count = 1;
    out.report.chosen_index = 0;
    return out;
  }
  const Eigen::Vector2d target(pk(0) - 2.0 * p.a * p.m * d.v2,
                               pk(1) + 2.0 * p.a * p.m * (1.0 - std::cos(d.dtheta)));
  SleighStepResult out = detail::sleigh_invert(target, p, +1.0, d.dtheta, d.v1, policy, cfg);
  out.momentum_before = pk;
  if (out.report.status != StepStatus::ok) return out;
  out.momentum_after = discrete_momentum_se2(out.next, p);
  out.report.lambda = out.momentum_after(2) - coad_se2(d.dtheta, d.v1, d.v2, pk)(2);
  return out;
}

/// One step of the inverse map: the displacement whose forward step produces
/// the current one. The inversion is the forward Legendre system with the
/// a-coupling negated.
inline SleighStepResult sleigh_step_back(const SleighDisplacement& d, const SleighParams& p,
                                         BranchPolicy policy = BranchPolicy::continuity,
                                         const NewtonConfig& cfg = {}) {
  const Eigen::Vector3d pk1 = discrete_momentum_se2(d, p);
  if (p.a == 0.0) {
    SleighStepResult out(d);
    out.momentum_before = pk1;
    out.momentum_after = pk1;
    out.report.stationary_shortcut = true;
    out.report.root_count = 1;
    out.report.chosen_index = 0;
    return out;
  }
  SleighStepResult out =
      detail::sleigh_invert(pk1.head<2>(), p, -1.0, d.dtheta, d.v1, policy, cfg);
  out.momentum_before = pk1;
  if (out.report.status != StepStatus::ok) return out;
  out.momentum_after = discrete_momentum_se2(out.next, p);
  const Eigen::Vector3d forward =
      coad_se2(out.next.dtheta, out.next.v1, out.next.v2, out.momentum_after);
  out.report.lambda = pk1(2) - forward(2);
  return out;
}

/// Compose a displacement sequence into world-frame poses, X_{k+1} = X_k W_k.
inline std::vector<PoseSE2> reconstruct_discrete(const PoseSE2& start,
                                                 const std::vector<SleighDisplacement>& steps) {
  std::vector<PoseSE2> poses{start};
  poses.reserve(steps.size() + 1);
  for (const SleighDisplacement& d : steps) {
    poses.push_back(se2_compose(poses.back(), PoseSE2(d.dtheta, d.v1, d.v2)));
  }
  return poses;
}

// =====================
// Bi-asymptotics
// =====================

struct AsymptoticsReport {
  bool increments_nonnegative = true;   // p1 never decreases along the forward orbit
  bool ptheta_sign_constant = true;
  Eigen::Vector2d forward_limit = Eigen::Vector2d::Zero();
  Eigen::Vector2d backward_limit = Eigen::Vector2d::Zero();
  double forward_ptheta_gap = 0.0;      // |p_theta| at the forward end
  double backward_ptheta_gap = 0.0;
  double max_energy_drift = 0.0;        // relative, over both half-orbits
  bool forward_on_stable_segment = false;   // 0 < p1 < m a at the forward limit
  bool backward_on_unstable_segment = false;
  StepStatus status = StepStatus::ok;
};

/// Runs the map forward and backward from d0 and summarizes the heteroclinic
/// structure in the momentum plane. Requires b = 0, a > 0 and energy below
/// m^2 a^2 (J + m a^2), the single-valued neighborhood of the origin.
inline AsymptoticsReport sleigh_asymptotics_check(const SleighDisplacement& d0,
                                                  const SleighParams& p, int steps,
                                                  BranchPolicy policy = BranchPolicy::continuity) {
  if (p.b != 0.0 || !(p.a > 0.0)) {
    throw std::invalid_argument("sleigh_asymptotics_check: requires b = 0 and a > 0");
  }
  const Eigen::Vector3d pm0 = discrete_momentum_se2(d0, p);
  const double e0 = sleigh_energy(pm0(0), pm0(1), p);
  const double bound = p.m * p.m * p.a * p.a * (p.J + p.m * p.a * p.a);
  if (!(e0 < bound)) {
    throw std::domain_error("sleigh_asymptotics_check: energy outside the single-valued region");
  }

  AsymptoticsReport rep;
  const double sign0 = pm0(0) >= 0.0 ? 1.0 : -1.0;

  SleighDisplacement d = d0;
  Eigen::Vector3d pm = pm0;
  for (int k = 0; k < steps; ++k) {
    const SleighStepResult r = sleigh_step(d, p, policy);
    if (r.report.status != StepStatus::ok) {
      rep.status = r.report.status;
      return rep;
    }
    if (r.momentum_after(1) < pm(1) - 1e-13 * (1.0 + std::abs(pm(1)))) {
      rep.increments_nonnegative = false;
    }
    if (r.momentum_after(0) * sign0 < -1e-12) rep.ptheta_sign_constant = false;
    const double e = sleigh_energy(r.momentum_after(0), r.momentum_after(1), p);
    rep.max_energy_drift = std::max(rep.max_energy_drift, std::abs(e - e0) / std::abs(e0));
    d = r.next;
    pm = r.momentum_after;
  }
  rep.forward_limit = pm.head<2>();
  rep.forward_ptheta_gap = std::abs(pm(0));
  rep.forward_on_stable_segment = pm(1) > 0.0 && pm(1) < p.m * p.a;

  d = d0;
  pm = pm0;
  for (int k = 0; k < steps; ++k) {
    const SleighStepResult r = sleigh_step_back(d, p, policy);
    if (r.report.status != StepStatus::ok) {
      rep.status = r.report.status;
      return rep;
    }
    if (r.momentum_after(0) * sign0 < -1e-12) rep.ptheta_sign_constant = false;
    const double e = sleigh_energy(r.momentum_after(0), r.momentum_after(1), p);
    rep.max_energy_drift = std::max(rep.max_energy_drift, std::abs(e - e0) / std::abs(e0));
    d = r.next;
    pm = r.momentum_after;
  }
  rep.backward_limit = pm.head<2>();
  rep.backward_ptheta_gap = std::abs(pm(0));
  rep.backward_on_unstable_segment = pm(1) < 0.0 && pm(1) > -p.m * p.a;
  return rep;
}

// =====================
// Naive-constraint map (for comparison runs)
// =====================

/// Discrete map under the rejected constraint V2 = 0 (b = 0 only): momenta
/// transported coadjointly, the multiplier absorbed by p2, and the
/// displacement recovered with V2 = 0.
struct NaiveStepResult {
  double dtheta, v1;
  Eigen::Vector3d momentum_after = Eigen::Vector3d::Zero();
  StepStatus status = StepStatus::ok;
};

inline NaiveStepResult sleigh_naive_step(double dtheta, double v1, const SleighParams& p) {
  if (p.b != 0.0) throw std::invalid_argument("sleigh_naive_step: requires b = 0");
  const Eigen::Vector3d pk = discrete_momentum_se2(dtheta, v1, 0.0, p);
  const Eigen::Vector3d ad = coad_se2(dtheta, v1, 0.0, pk);
  NaiveStepResult out{dtheta, v1};
  // Invert the Legendre relations with V2 fixed to zero:
  // p_theta = (J + m a^2) sin t, p1 = m w - a m (1 - cos t).
  const double k = p.J + p.m * p.a * p.a;
  const double s = ad(0) / k;
  if (std::abs(s) > 1.0) {
    out.status = StepStatus::branch_failure;
    return out;
  }
  const double t = std::abs(dtheta) <= 0.5 * kPi ? std::asin(s) : std::copysign(kPi, dtheta) - std::asin(s);
  out.dtheta = wrap_angle(t);
  out.v1 = ad(1) / p.m + p.a * (1.0 - std::cos(out.dtheta));
  out.momentum_after = discrete_momentum_se2(out.dtheta, out.v1, 0.0, p);
  return out;
}

}  // namespace deps
