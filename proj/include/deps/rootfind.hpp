// Shared numerical kernels: closed-form real roots of low-degree polynomials
// with a Newton polish, damped two-variable Newton with multistart root
// enumeration, and finite-difference helpers used as test oracles.
#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace deps {

namespace detail {
inline constexpr double kTwoPi = 6.28318530717958647692528676655900577;
}

struct Root {
  double value;
  int multiplicity;
};

struct NewtonConfig {
  double residual_tol = 1e-12;
  int max_iter = 60;
  double damping = 0.5;
  double fd_step = 1e-7;
  double dedupe_radius = 1e-8;
};

namespace detail {

inline void polish_root(double& z, const std::function<double(double)>& f,
                        const std::function<double(double)>& df, int steps = 2) {
  double fz = f(z);
  for (int i = 0; i < steps; ++i) {
    const double d = df(z);
    if (d == 0.0 || !std::isfinite(d)) return;
    const double zn = z - fz / d;
    const double fn = f(zn);
    if (!std::isfinite(fn) || std::abs(fn) >= std::abs(fz)) return;
    z = zn;
    fz = fn;
  }
}

inline std::vector<Root> cluster_roots(std::vector<double> vals, double radius) {
  std::sort(vals.begin(), vals.end());
  std::vector<Root> out;
  for (double v : vals) {
    const double scale = 1.0 + std::abs(v);
    if (!out.empty() && std::abs(v - out.back().value) <= radius * scale) {
      out.back().multiplicity += 1;
    } else {
      out.push_back({v, 1});
    }
  }
  return out;
}

}  // namespace detail

/// Real roots of c2 z^2 + c1 z + c0, multiplicity-aware.
inline std::vector<Root> real_roots_quadratic(double c2, double c1, double c0,
                                              double dedupe_radius = 1e-8) {
  const double scale = std::max({std::abs(c2), std::abs(c1), std::abs(c0)});
  if (scale == 0.0) throw std::invalid_argument("real_roots_quadratic: zero polynomial");
  if (std::abs(c2) <= 1e-14 * scale) {
    if (std::abs(c1) <= 1e-14 * scale) return {};
    return {{-c0 / c1, 1}};
  }
  const double disc = c1 * c1 - 4.0 * c2 * c0;
  const double disc_scale = std::max(c1 * c1, std::abs(4.0 * c2 * c0));
  if (disc < 0.0) {
    if (disc > -1e-14 * disc_scale) return {{-c1 / (2.0 * c2), 2}};
    return {};
  }
  if (disc == 0.0) return {{-c1 / (2.0 * c2), 2}};
  // Citardauq on the small root to avoid cancellation.
  const double sq = std::sqrt(disc);
  const double u = -0.5 * (c1 + (c1 >= 0 ? sq : -sq));
  std::vector<double> vals{u / c2, (u != 0.0) ? c0 / u : -c1 / c2 - u / c2};
  return detail::cluster_roots(std::move(vals), dedupe_radius);
}

/// All real roots of c3 z^3 + c2 z^2 + c1 z + c0, ascending, with detected
/// multiplicities. Closed form (trigonometric / Cardano) plus a Newton
/// polish on the original coefficients. Throws if the cubic degenerates.
inline std::vector<Root> real_roots_cubic(double c3, double c2, double c1, double c0,
                                          double dedupe_radius = 1e-8) {
  const double scale = std::max({std::abs(c3), std::abs(c2), std::abs(c1), std::abs(c0)});
  if (scale == 0.0) throw std::invalid_argument("real_roots_cubic: zero polynomial");
  if (std::abs(c3) <= 1e-14 * scale) {
    throw std::invalid_argument("real_roots_cubic: leading coefficient vanishes");
  }
  const double a = c2 / c3, b = c1 / c3, c = c0 / c3;
  const double q = (a * a - 3.0 * b) / 9.0;
  const double r = (a * (2.0 * a * a - 9.0 * b) + 27.0 * c) / 54.0;
  const double r2 = r * r, q3 = q * q * q;

  std::vector<double> vals;
  if (r2 < q3) {
    const double t = std::acos(std::clamp(r / std::sqrt(q3), -1.0, 1.0));
    const double f = -2.0 * std::sqrt(q);
    vals = {f * std::cos(t / 3.0) - a / 3.0,
            f * std::cos((t + detail::kTwoPi) / 3.0) - a / 3.0,
            f * std::cos((t - detail::kTwoPi) / 3.0) - a / 3.0};
  } else {
    const double u3 = -r - std::copysign(std::sqrt(std::max(0.0, r2 - q3)), r);
    const double u = std::cbrt(u3);
    const double v = (u == 0.0) ? 0.0 : q / u;
    vals = {u + v - a / 3.0};
    // The conjugate pair collapses to a real double root when r2 ~ q3.
    const double imag = std::sqrt(3.0) / 2.0 * std::abs(u - v);
    const double real = -0.5 * (u + v) - a / 3.0;
    if (imag <= 1e-8 * (1.0 + std::abs(real))) {
      vals.push_back(real);
      vals.push_back(real);
    }
  }

  auto f = [&](double z) { return ((c3 * z + c2) * z + c1) * z + c0; };
  auto df = [&](double z) { return (3.0 * c3 * z + 2.0 * c2) * z + c1; };
  for (double& z : vals) detail::polish_root(z, f, df);
  return detail::cluster_roots(std::move(vals), dedupe_radius);
}

/// All real roots of a quartic via the resolvent cubic, polished.
inline std::vector<Root> real_roots_quartic(double c4, double c3, double c2, double c1,
                                            double c0, double dedupe_radius = 1e-8) {
  const double scale = std::max({std::abs(c4), std::abs(c3), std::abs(c2), std::abs(c1),
                                 std::abs(c0)});
  if (scale == 0.0) throw std::invalid_argument("real_roots_quartic: zero polynomial");
  if (std::abs(c4) <= 1e-14 * scale) {
    throw std::invalid_argument("real_roots_quartic: leading coefficient vanishes");
  }
  const double a = c3 / c4, b = c2 / c4, c = c1 / c4, d = c0 / c4;
  // Depressed form y^4 + p y^2 + q y + r with z = y - a/4.
  const double p = b - 3.0 * a * a / 8.0;
  const double q = c - a * b / 2.0 + a * a * a / 8.0;
  const double r = d - a * c / 4.0 + a * a * b / 16.0 - 3.0 * a * a * a * a / 256.0;

  std::vector<double> vals;
  if (std::abs(q) <= 1e-13 * (1.0 + std::abs(p) + std::abs(r))) {
    // Biquadratic.
    for (const Root& s : real_roots_quadratic(1.0, p, r)) {
      if (s.value < 0.0) continue;
      const double y = std::sqrt(std::max(0.0, s.value));
      vals.push_back(y - a / 4.0);
      vals.push_back(-y - a / 4.0);
    }
  } else {
    // Resolvent cubic; any real root m with 2m - p > 0 splits the quartic
    // into two quadratics.
    const auto res = real_roots_cubic(8.0, -4.0 * p, -8.0 * r, 4.0 * p * r - q * q);
    double m = 0.0;
    bool found = false;
    for (const Root& s : res) {
      if (2.0 * s.value - p > 1e-14 * (1.0 + std::abs(p))) {
        m = s.value;
        found = true;
        break;
      }
    }
    if (found) {
      const double w = std::sqrt(2.0 * m - p);
      const double t = q / (2.0 * w);
      for (const Root& s : real_roots_quadratic(1.0, w, m - t)) vals.push_back(s.value - a / 4.0);
      for (const Root& s : real_roots_quadratic(1.0, -w, m + t)) vals.push_back(s.value - a / 4.0);
    }
  }

  auto f = [&](double z) { return (((c4 * z + c3) * z + c2) * z + c1) * z + c0; };
  auto df = [&](double z) { return ((4.0 * c4 * z + 3.0 * c3) * z + 2.0 * c2) * z + c1; };
  for (double& z : vals) detail::polish_root(z, f, df);
  return detail::cluster_roots(std::move(vals), dedupe_radius);
}

// =====================
// Damped Newton in two variables
// =====================

using Fn2 = std::function<Eigen::Vector2d(const Eigen::Vector2d&)>;
using Jac2 = std::function<Eigen::Matrix2d(const Eigen::Vector2d&)>;

struct Newton2Result {
  bool converged = false;
  Eigen::Vector2d x = Eigen::Vector2d::Zero();
  int iterations = 0;
  double residual = std::numeric_limits<double>::infinity();
};

inline Jac2 fd_jacobian(const Fn2& f, double h) {
  return [f, h](const Eigen::Vector2d& x) {
    Eigen::Matrix2d j;
    for (int k = 0; k < 2; ++k) {
      Eigen::Vector2d e = Eigen::Vector2d::Zero();
      e(k) = h;
      j.col(k) = (f(x + e) - f(x - e)) / (2.0 * h);
    }
    return j;
  };
}

/// Damped Newton iteration. Divergence (max iterations, a singular Jacobian,
/// or a step that cannot reduce the residual) is reported, never silent.
/// Once below tolerance, up to two extra full steps are taken while they
/// keep reducing the residual.
inline Newton2Result newton2(const Fn2& f, Jac2 jac, Eigen::Vector2d seed,
                             const NewtonConfig& cfg = {}) {
  if (!jac) jac = fd_jacobian(f, cfg.fd_step);
  Newton2Result res;
  res.x = seed;
  Eigen::Vector2d fx = f(res.x);
  res.residual = fx.norm();
  int polish_left = 2;
  for (res.iterations = 0; res.iterations <= cfg.max_iter; ++res.iterations) {
    if (!std::isfinite(res.residual)) return res;
    const bool within_tol = res.residual <= cfg.residual_tol;
    if (within_tol) res.converged = true;
    if (within_tol && (polish_left == 0 || res.residual == 0.0)) return res;

    const Eigen::Matrix2d j = jac(res.x);
    const double det = j(0, 0) * j(1, 1) - j(0, 1) * j(1, 0);
    if (std::abs(det) < 1e-300 || !std::isfinite(det)) return res;
    Eigen::Vector2d step;
    step(0) = (-fx(0) * j(1, 1) + fx(1) * j(0, 1)) / det;
    step(1) = (-fx(1) * j(0, 0) + fx(0) * j(1, 0)) / det;

    double alpha = 1.0;
    bool accepted = false;
    while (alpha >= 1e-6) {
      const Eigen::Vector2d xn = res.x + alpha * step;
      const Eigen::Vector2d fn = f(xn);
      const double rn = fn.norm();
      if (std::isfinite(rn) && rn < res.residual) {
        res.x = xn;
        fx = fn;
        res.residual = rn;
        accepted = true;
        break;
      }
      alpha *= cfg.damping;
    }
    if (!accepted) return res;  // converged stays as-is; stalled otherwise
    if (within_tol) --polish_left;
  }
  return res;
}

enum class SeedOutcome { converged_new, converged_duplicate, diverged };

struct MultistartResult {
  std::vector<Eigen::Vector2d> roots;  // deduplicated, lexicographically sorted
  std::vector<SeedOutcome> outcomes;   // one per seed, in input order
  int total_iterations = 0;
};

/// Runs newton2 from every seed and deduplicates the converged roots at
/// cfg.dedupe_radius (custom metric optional). Root order is canonical.
inline MultistartResult multistart(
    const Fn2& f, const Jac2& jac, const std::vector<Eigen::Vector2d>& seeds,
    const NewtonConfig& cfg = {},
    const std::function<double(const Eigen::Vector2d&, const Eigen::Vector2d&)>& metric = {}) {
  MultistartResult out;
  auto dist = metric ? metric
                     : [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
                         return (a - b).norm();
                       };
  for (const Eigen::Vector2d& s : seeds) {
    const Newton2Result r = newton2(f, jac, s, cfg);
    out.total_iterations += r.iterations;
    if (!r.converged) {
      out.outcomes.push_back(SeedOutcome::diverged);
      continue;
    }
    bool dup = false;
    for (const Eigen::Vector2d& known : out.roots) {
      if (dist(known, r.x) <= cfg.dedupe_radius * (1.0 + known.norm())) {
        dup = true;
        break;
      }
    }
    out.outcomes.push_back(dup ? SeedOutcome::converged_duplicate : SeedOutcome::converged_new);
    if (!dup) out.roots.push_back(r.x);
  }
  std::sort(out.roots.begin(), out.roots.end(),
            [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
              return a(0) != b(0) ? a(0) < b(0) : a(1) < b(1);
            });
  return out;
}

/// Central finite difference d/dx f at x.
inline double fd_central(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace deps
