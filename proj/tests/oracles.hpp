// Test-only oracles: enumeration and counting routines that are independent
// of the solver paths they check.
#pragma once

#include <Eigen/Dense>
#include <limits>
#include <vector>

#include "deps/suslov.hpp"

namespace deps::testing {

/// Counts the real solutions of the momentum-matching system by a dense
/// sign-change grid over the disk followed by a Newton refinement of the
/// flagged cells. Independent of the multistart seeding used by solve_sys.
inline int grid_oracle_root_count(double t1, double t2, const MassTensor& j, int n = 600) {
  const Fn2 f = detail::suslov_system(Eigen::Vector2d(t1, t2), j);
  auto value = [&](int i, int k, int comp) {
    const double x = -1.0 + 2.0 * i / n, y = -1.0 + 2.0 * k / n;
    if (x * x + y * y > 1.0) return std::numeric_limits<double>::quiet_NaN();
    return f(Eigen::Vector2d(x, y))(comp);
  };
  std::vector<Eigen::Vector2d> candidates;
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      double f1[4] = {value(i, k, 0), value(i + 1, k, 0), value(i, k + 1, 0),
                      value(i + 1, k + 1, 0)};
      double f2[4] = {value(i, k, 1), value(i + 1, k, 1), value(i, k + 1, 1),
                      value(i + 1, k + 1, 1)};
      bool ok = true;
      for (int c = 0; c < 4; ++c) ok = ok && std::isfinite(f1[c]) && std::isfinite(f2[c]);
      if (!ok) continue;
      auto changes = [](const double* v) {
        const double lo = std::min({v[0], v[1], v[2], v[3]});
        const double hi = std::max({v[0], v[1], v[2], v[3]});
        return lo <= 0.0 && hi >= 0.0;
      };
      if (changes(f1) && changes(f2)) {
        candidates.emplace_back(-1.0 + 2.0 * (i + 0.5) / n, -1.0 + 2.0 * (k + 0.5) / n);
      }
    }
  }
  const auto metric = [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    const auto lift = [](const Eigen::Vector2d& v) {
      return Eigen::Vector3d(std::sqrt(std::max(0.0, 1.0 - v.squaredNorm())), v(0), v(1));
    };
    const Eigen::Vector3d pa = lift(a), pb = lift(b);
    return std::min((pa - pb).norm(), (pa + pb).norm());
  };
  const auto res =
      multistart(f, detail::suslov_system_jacobian(j), candidates, NewtonConfig{}, metric);
  return static_cast<int>(res.roots.size());
}

}  // namespace deps::testing
