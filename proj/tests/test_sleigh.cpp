#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "deps/sleigh.hpp"

using namespace deps;

namespace {

std::mt19937& rng() {
  static std::mt19937 gen(90210u);
  return gen;
}

double uniform(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng());
}

const SleighParams kDemo(1.0, 1.5, 1.0, 0.0);
const SleighParams kDemoB(1.0, 1.5, 1.0, 0.4);

Eigen::Matrix3d se2_algebra(double w, double x, double y) {
  Eigen::Matrix3d m;
  m << 0, -w, x, w, 0, y, 0, 0, 0;
  return m;
}

}  // namespace

TEST_CASE("params validation") {
  CHECK_THROWS_AS(SleighParams(0.0, 1.0, 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(SleighParams(1.0, -1.0, 0, 0), std::invalid_argument);
}

TEST_CASE("reduced lagrangian and its quadratic form") {
  CHECK(sleigh_reduced_lagrangian(0, 0, 0, kDemoB) == 0.0);

  // Centered body: pure kinetic energy.
  const SleighParams centered(2.0, 1.1, 0.0, 0.0);
  CHECK(sleigh_reduced_lagrangian(0.7, 0.3, -0.2, centered) ==
        doctest::Approx(0.5 * (1.1 * 0.49 + 2.0 * (0.09 + 0.04))).epsilon(1e-14));

  // Trace-form oracle: l = 1/2 tr(xi Jq xi^T).
  for (int i = 0; i < 300; ++i) {
    const SleighParams p(uniform(0.5, 2), uniform(0.5, 2), uniform(-1, 1), uniform(-1, 1));
    const double w = uniform(-2, 2), v1 = uniform(-2, 2), v2 = uniform(-2, 2);
    const Eigen::Matrix3d xi = se2_algebra(w, v1, v2);
    const double oracle = 0.5 * (xi * sleigh_quadratic_form_matrix(p) * xi.transpose()).trace();
    CHECK(sleigh_reduced_lagrangian(w, v1, v2, p) == doctest::Approx(oracle).epsilon(1e-13));
  }

  // The alternate form coincides when b = 0 and differs by b m w v1 (v1 - 1)
  // otherwise.
  for (int i = 0; i < 100; ++i) {
    const SleighParams p(uniform(0.5, 2), uniform(0.5, 2), uniform(-1, 1), uniform(-1, 1));
    const double w = uniform(-2, 2), v1 = uniform(-2, 2), v2 = uniform(-2, 2);
    const double gap = sleigh_reduced_lagrangian(w, v1, v2, p) -
                       sleigh_reduced_lagrangian_alt(w, v1, v2, p);
    const double expected = p.b * p.m * w * v1 * (v1 - 1.0);
    CHECK(std::abs(gap - expected) < 1e-13 * (1.0 + std::abs(expected)));
  }
  const SleighParams b0(1.0, 1.5, 0.7, 0.0);
  CHECK(sleigh_reduced_lagrangian(0.4, 0.8, -0.3, b0) ==
        sleigh_reduced_lagrangian_alt(0.4, 0.8, -0.3, b0));
}

TEST_CASE("continuous momentum dynamics") {
  // Equilibrium line p_theta + b p1 = 0.
  const double p1 = 0.8;
  CHECK(sleigh_continuous_rhs(-kDemoB.b * p1, p1, kDemoB).norm() == 0.0);

  // a = 0: the momentum pair is conserved.
  const SleighParams a0(1.0, 1.5, 0.0, 0.3);
  CHECK(sleigh_continuous_rhs(0.7, -0.4, a0).norm() == 0.0);

  // b = 0 collapses to the two-term form.
  for (int i = 0; i < 100; ++i) {
    const double pt = uniform(-2, 2), px = uniform(-2, 2);
    const double d = kDemo.J + kDemo.m * kDemo.a * kDemo.a;
    const Eigen::Vector2d r = sleigh_continuous_rhs(pt, px, kDemo);
    CHECK(r(0) == doctest::Approx(-kDemo.a * pt * px / d).epsilon(1e-13));
    CHECK(r(1) == doctest::Approx(kDemo.m * kDemo.a * pt * pt / (d * d)).epsilon(1e-13));
  }

  // Energy is a first integral: finite-difference derivative along the flow.
  // The step balances integrator truncation against round-off cancellation.
  for (int i = 0; i < 100; ++i) {
    const SleighParams p(uniform(0.5, 2), uniform(0.5, 2), uniform(-1, 1), uniform(-1, 1));
    const double pt = uniform(-1, 1), px = uniform(-1, 1);
    const double h = 1e-3;
    const Eigen::Vector2d fwd = sleigh_rk4_step(Eigen::Vector2d(pt, px), p, h);
    const Eigen::Vector2d bwd = sleigh_rk4_step(Eigen::Vector2d(pt, px), p, -h);
    const double de = (sleigh_energy(fwd(0), fwd(1), p) - sleigh_energy(bwd(0), bwd(1), p)) /
                      (2.0 * h);
    CHECK(std::abs(de) < 1e-12 * (1.0 + std::abs(sleigh_energy(pt, px, p))));
  }

  // Positive definiteness of the energy form.
  for (int i = 0; i < 100; ++i) {
    const SleighParams p(uniform(0.1, 3), uniform(0.1, 3), uniform(-2, 2), uniform(-2, 2));
    const double pt = uniform(-2, 2), px = uniform(-2, 2);
    if (pt == 0 && px == 0) continue;
    CHECK(sleigh_energy(pt, px, p) > 0.0);
  }
  CHECK(sleigh_energy(0, 0, kDemoB) == 0.0);
}

TEST_CASE("a = 0 reconstruction: circles and lines") {
  const PoseSE2 start(0.3, 1.0, 2.0);

  const PoseSE2 same = reconstruct_continuous_a0(start, 0.8, 0.5, 0.0);
  CHECK(same.theta == doctest::Approx(start.theta));
  CHECK(same.x == doctest::Approx(start.x));
  CHECK(same.y == doctest::Approx(start.y));

  // omega = 0: straight line along the initial heading.
  const PoseSE2 line = reconstruct_continuous_a0(start, 0.0, 2.0, 1.5);
  CHECK(line.theta == doctest::Approx(start.theta));
  CHECK(line.x == doctest::Approx(start.x + 3.0 * std::cos(start.theta)));
  CHECK(line.y == doctest::Approx(start.y + 3.0 * std::sin(start.theta)));

  // omega != 0: all points at distance |v1/omega| from the circle center.
  const double w = 0.7, v1 = 1.3;
  const double cx = start.x - v1 / w * std::sin(start.theta);
  const double cy = start.y + v1 / w * std::cos(start.theta);
  for (double t : {0.1, 0.5, 1.0, 2.0, 4.0}) {
    const PoseSE2 g = reconstruct_continuous_a0(start, w, v1, t);
    CHECK(std::hypot(g.x - cx, g.y - cy) == doctest::Approx(std::abs(v1 / w)).epsilon(1e-12));
  }

  // Continuity at omega = 0.
  const PoseSE2 lo = reconstruct_continuous_a0(start, 1e-9, 1.0, 1.0);
  const PoseSE2 hi = reconstruct_continuous_a0(start, 1.1e-8, 1.0, 1.0);
  CHECK(std::abs(lo.x - hi.x) < 1e-8);
  CHECK(std::abs(lo.y - hi.y) < 1e-8);
}

TEST_CASE("discrete lagrangian: invariance and continuous limit") {
  CHECK(discrete_lagrangian_se2(PoseSE2(0.4, 1, 2), PoseSE2(0.4, 1, 2), kDemoB) == 0.0);

  // Left invariance under 100 random group elements.
  const PoseSE2 gk(0.7, -1.0, 0.4), gk1(1.1, -0.2, 0.9);
  const double base = discrete_lagrangian_se2(gk, gk1, kDemoB);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const PoseSE2 g(uniform(-3, 3), uniform(-4, 4), uniform(-4, 4));
    const double moved =
        discrete_lagrangian_se2(se2_compose(g, gk), se2_compose(g, gk1), kDemoB);
    worst = std::max(worst, std::abs(moved - base));
  }
  CHECK(worst < 1e-12);

  // Scaling a velocity into the increments recovers the reduced Lagrangian
  // at quadratic order, with first-order error in the step size.
  const double w = 0.6, vx = 0.8, vy = -0.5;
  const PoseSE2 g0(0.9, 0.3, -0.7);
  auto limit_err = [&](double eps) {
    const PoseSE2 g1(g0.theta + eps * w, g0.x + eps * vx, g0.y + eps * vy);
    const double v1 = std::cos(g0.theta) * vx + std::sin(g0.theta) * vy;
    const double v2 = -std::sin(g0.theta) * vx + std::cos(g0.theta) * vy;
    const double expected = sleigh_reduced_lagrangian(w, v1, v2, kDemoB);
    return std::abs(discrete_lagrangian_se2(g0, g1, kDemoB) / (eps * eps) - expected);
  };
  const double ratio = limit_err(1e-3) / limit_err(5e-4);
  CHECK(ratio > 1.5);
  CHECK(ratio < 2.5);
}

TEST_CASE("discrete momenta match the variational definition") {
  // Closed-form substitutions.
  const Eigen::Vector3d m1 = discrete_momentum_se2(0.0, 0.7, 0.0, kDemo);
  CHECK(m1(0) == 0.0);
  CHECK(m1(1) == doctest::Approx(kDemo.m * 0.7));
  CHECK(m1(2) == 0.0);

  const SleighParams centered(1.3, 0.9, 0.0, 0.0);
  const Eigen::Vector3d m2 = discrete_momentum_se2(0.5, 0.7, -0.2, centered);
  CHECK(m2(0) == doctest::Approx(0.9 * std::sin(0.5)));
  CHECK(m2(1) == doctest::Approx(1.3 * 0.7));
  CHECK(m2(2) == doctest::Approx(1.3 * -0.2));

  // Central finite differences of the discrete Lagrangian along the three
  // body directions.
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const SleighParams p(uniform(0.5, 2), uniform(0.5, 2), uniform(-1, 1), uniform(-1, 1));
    const PoseSE2 gk(uniform(-2, 2), uniform(-2, 2), uniform(-2, 2));
    const PoseSE2 gk1(gk.theta + uniform(-1.5, 1.5), gk.x + uniform(-1.5, 1.5),
                      gk.y + uniform(-1.5, 1.5));
    const HelicalDisplacement d = helical_displacement(gk, gk1);
    const Eigen::Vector3d closed = discrete_momentum_se2(d.dtheta, d.t1, d.t2, p);

    const double h = 1e-6;
    const double ct = std::cos(gk.theta), st = std::sin(gk.theta);
    auto ld = [&](double dth, double dx, double dy) {
      return discrete_lagrangian_se2(PoseSE2(gk.theta + dth, gk.x + dx, gk.y + dy), gk1, p);
    };
    const Eigen::Vector3d fd(
        -(ld(h, 0, 0) - ld(-h, 0, 0)) / (2 * h),
        -(ld(0, h * ct, h * st) - ld(0, -h * ct, -h * st)) / (2 * h),
        -(ld(0, -h * st, h * ct) - ld(0, h * st, -h * ct)) / (2 * h));
    worst = std::max(worst, (closed - fd).lpNorm<Eigen::Infinity>());
  }
  CHECK(worst < 1e-7);
}

TEST_CASE("constraint chart") {
  CHECK(v2_from_constraint(0.0, 1.7) == 0.0);
  CHECK(v2_from_constraint(kPi / 2, 1.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS((void)v2_from_constraint(kPi, 1.0), std::domain_error);
  CHECK(naive_constraint_v2(0.7, 2.0) == 0.0);

  for (int i = 0; i < 200; ++i) {
    const double dth = uniform(-3.0, 3.0), v1 = uniform(-2, 2);
    const SleighDisplacement d = SleighDisplacement::from_chart(dth, v1);
    CHECK(std::abs(constraint_residual(d.dtheta, d.v1, d.v2)) <
          1e-12 * (1.0 + std::abs(d.v1) + std::abs(d.v2)));

    // Group form on reconstructed pose pairs: the chord is orthogonal to
    // the mid-angle normal.
    const PoseSE2 gk(uniform(-3, 3), uniform(-2, 2), uniform(-2, 2));
    const PoseSE2 gk1 = se2_compose(gk, PoseSE2(d.dtheta, d.v1, d.v2));
    const double mid = 0.5 * (gk.theta + (gk.theta + d.dtheta));
    const double form =
        -std::sin(mid) * (gk1.x - gk.x) + std::cos(mid) * (gk1.y - gk.y);
    CHECK(std::abs(form) < 1e-12 * (1.0 + std::abs(d.v1)));
  }

  CHECK_THROWS_AS(SleighDisplacement(0.5, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("cubic momentum locus") {
  const SleighParams p = kDemo;

  // p_theta = 0: roots are 0 and +-sqrt(-p_hat1 (p_hat1 + 2J)) / J,
  // real exactly when -2J < p_hat1 < 0.
  for (double ph1 : {-2.0, -1.0, -0.5}) {
    const auto c = cubic_coefficients(0.0, ph1, p);
    const auto roots = real_roots_cubic(c[0], c[1], c[2], c[3]);
    const double inner = -ph1 * (ph1 + 2.0 * p.J);
    if (inner > 0) {
      REQUIRE(roots.size() == 3);
      const double r = std::sqrt(inner) / p.J;
      CHECK(roots[0].value == doctest::Approx(-r).epsilon(1e-11));
      CHECK(roots[1].value == doctest::Approx(0.0).epsilon(1e-11));
      CHECK(roots[2].value == doctest::Approx(r).epsilon(1e-11));
    }
  }
  const auto none = real_roots_cubic(p.J * p.J, 0.0, 0.5 * 0.5 + 2 * p.J * 0.5, 0.0);
  CHECK(none.size() == 1);  // only z = 0 for p_hat1 > 0

  // Tangency at z = +-1: residual collapses to +-(J -+ p_theta + p_hat1)^2.
  for (int i = 0; i < 200; ++i) {
    const double pt = uniform(-3, 3), ph = uniform(-3, 3);
    const double up = cubic_residual(HatCoords{pt, ph, 1.0}, p);
    const double dn = cubic_residual(HatCoords{pt, ph, -1.0}, p);
    const double sp = (p.J - pt + ph) * (p.J - pt + ph);
    const double sm = (p.J + pt + ph) * (p.J + pt + ph);
    CHECK(up == doctest::Approx(sp).epsilon(1e-12));
    CHECK(dn == doctest::Approx(-sm).epsilon(1e-12));
  }

  // Legendre consistency: z = sin(dtheta) of an admissible displacement is
  // a root of the cubic built from its momenta.
  for (int i = 0; i < 1000; ++i) {
    const SleighDisplacement d = SleighDisplacement::from_chart(uniform(-2.5, 2.5),
                                                                uniform(-2, 2));
    const Eigen::Vector3d pm = discrete_momentum_se2(d, p);
    const double ph1 = p.a * pm(1) + 2.0 * p.m * p.a * p.a;
    const auto c = cubic_coefficients(pm(0), ph1, p);
    const double scale = std::abs(c[0]) + std::abs(c[1]) + std::abs(c[2]) + std::abs(c[3]);
    CHECK(std::abs(cubic_residual(HatCoords{pm(0), ph1, std::sin(d.dtheta)}, p)) <
          1e-10 * scale);
  }

  CHECK_THROWS_AS((void)cubic_coefficients(0, 0, kDemoB), std::invalid_argument);
}

TEST_CASE("surface classification") {
  const SleighParams p = kDemo;
  const double ma2 = p.m * p.a * p.a;

  // The point over the momentum origin: single-valued, cos > 0, on the ellipse.
  const SurfaceRegion origin = surface_classify(0.0, 2.0 * ma2, p);
  CHECK(origin.cos_sign == +1);
  CHECK_FALSE(origin.three_to_one);
  CHECK(origin.v1_sign == 0);

  // Ellipse parameterization has zero membership value.
  for (double t : {0.3, 1.2, 2.8, 4.0, 5.9}) {
    const SurfaceRegion r =
        surface_classify((p.J + ma2) * std::sin(t), ma2 * (1.0 + std::cos(t)), p);
    CHECK(std::abs(r.ellipse_value) < 1e-12);
  }

  // Cusp of the discriminant curve.
  const SurfaceRegion cusp = surface_classify(0.0, -2.0 * p.J, p);
  CHECK(std::abs(cusp.discriminant_residual) < 1e-12);

  // The three-real-roots region is exactly the negative side of the printed
  // discriminant quartic (checked away from the curve itself).
  for (int i = 0; i < 500; ++i) {
    const double pt = uniform(-4, 4), ph = uniform(-4, 4);
    const SurfaceRegion r = surface_classify(pt, ph, p);
    if (std::abs(r.discriminant_residual) < 1e-3 || std::abs(ph) < 1e-6) continue;
    CHECK(r.three_to_one == (r.discriminant_residual < 0.0));
  }

  // Quadrant rule for the cosine sign.
  CHECK(surface_classify(0.0, -6.0 * p.J, p).cos_sign == +1);   // deep L++
  CHECK(surface_classify(4.0 * p.J, 0.0, p).cos_sign == -1);    // mixed quadrant
}

TEST_CASE("free map: momentum transport") {
  const SleighDisplacement id = SleighDisplacement::from_chart(0.0, 0.0);
  const Eigen::Vector3d pm(0.3, -0.8, 0.5);
  CHECK((sleigh_free_step(id, pm, kDemo) - pm).norm() == 0.0);

  // Coadjoint-orbit invariant p1^2 + p2^2 is exactly conserved.
  for (int i = 0; i < 200; ++i) {
    const SleighDisplacement d = SleighDisplacement::from_chart(uniform(-2, 2), uniform(-2, 2));
    const Eigen::Vector3d q(uniform(-2, 2), uniform(-2, 2), uniform(-2, 2));
    const Eigen::Vector3d t = sleigh_free_step(d, q, kDemo);
    CHECK(t.tail<2>().squaredNorm() ==
          doctest::Approx(q.tail<2>().squaredNorm()).epsilon(1e-13));
  }

  // Centered body: world-frame increments are constant along the free orbit.
  const SleighParams centered(1.0, 1.5, 0.0, 0.0);
  PoseSE2 g(0.2, 0.0, 0.0);
  Eigen::Vector3d disp(0.15, 0.4, -0.2);  // (dtheta, V1, V2), unconstrained
  Eigen::Vector3d pm2 = discrete_momentum_se2(disp(0), disp(1), disp(2), centered);
  const PoseSE2 g1 = se2_compose(g, PoseSE2(disp(0), disp(1), disp(2)));
  const double dx0 = g1.x - g.x, dy0 = g1.y - g.y, dth0 = disp(0);
  g = g1;
  for (int k = 0; k < 20; ++k) {
    pm2 = coad_se2(disp(0), disp(1), disp(2), pm2);
    disp = sleigh_free_legendre_inverse(pm2, centered, disp(0));
    const PoseSE2 gn = se2_compose(g, PoseSE2(disp(0), disp(1), disp(2)));
    CHECK(gn.x - g.x == doctest::Approx(dx0).epsilon(1e-12));
    CHECK(gn.y - g.y == doctest::Approx(dy0).epsilon(1e-12));
    CHECK(disp(0) == doctest::Approx(dth0).epsilon(1e-12));
    g = gn;
  }
}

TEST_CASE("discrete step: stationary families") {
  // dtheta = 0 keeps the momentum pair; the stationary multiplier keeps d.
  const SleighDisplacement flat = SleighDisplacement::from_chart(0.0, 0.8);
  const SleighStepResult r = sleigh_step(flat, kDemo);
  REQUIRE(r.report.status == StepStatus::ok);
  CHECK(r.next.dtheta == doctest::Approx(0.0).epsilon(1e-13));
  CHECK(r.next.v1 == doctest::Approx(0.8).epsilon(1e-13));
  CHECK(r.momentum_after(0) == doctest::Approx(r.momentum_before(0)).epsilon(1e-13));
  CHECK(r.momentum_after(1) == doctest::Approx(r.momentum_before(1)).epsilon(1e-13));
  CHECK(std::abs(r.report.lambda) < 1e-12);

  // a = 0: every state is a fixed point, exactly.
  const SleighParams a0(1.0, 1.5, 0.0, 0.0);
  SleighDisplacement d = SleighDisplacement::from_chart(0.3, 0.5);
  for (int k = 0; k < 50; ++k) {
    const SleighStepResult s = sleigh_step(d, a0);
    REQUIRE(s.report.status == StepStatus::ok);
    CHECK(s.next.dtheta == d.dtheta);
    CHECK(s.next.v1 == d.v1);
    CHECK((s.momentum_after - s.momentum_before).norm() == 0.0);
    d = s.next;
  }
}

TEST_CASE("discrete step: conservation and exact momentum increments") {
  for (const SleighParams& p : {kDemo, kDemoB}) {
    SleighDisplacement d = SleighDisplacement::from_chart(0.12, 0.05);
    Eigen::Vector3d pm = discrete_momentum_se2(d, p);
    const double e0 = sleigh_energy(pm(0), pm(1), p);
    double worst_e = 0.0;
    for (int k = 0; k < 1000; ++k) {
      const SleighStepResult r = sleigh_step(d, p);
      REQUIRE(r.report.status == StepStatus::ok);
      // Momentum-law increments hold exactly.
      CHECK(r.momentum_after(0) ==
            doctest::Approx(pm(0) - 2 * p.a * p.m * d.v2).epsilon(1e-11));
      CHECK(r.momentum_after(1) ==
            doctest::Approx(pm(1) + 2 * p.a * p.m * (1 - std::cos(d.dtheta))).epsilon(1e-11));
      CHECK(r.momentum_after(1) >= pm(1) - 1e-14);  // p1 never decreases (a > 0)
      d = r.next;
      pm = r.momentum_after;
      const double e = sleigh_energy(pm(0), pm(1), p);
      worst_e = std::max(worst_e, std::abs(e - e0) / std::abs(e0));
      CHECK(std::abs(constraint_residual(d.dtheta, d.v1, d.v2)) <
            1e-10 * (1.0 + std::abs(d.v1)));
    }
    CHECK(worst_e < 1e-10);
  }
}

TEST_CASE("discrete step: branch agrees with a dense enumeration") {
  const SleighDisplacement d = SleighDisplacement::from_chart(0.35, 0.20);
  const Eigen::Vector3d pm = discrete_momentum_se2(d, kDemo);
  const Eigen::Vector2d target(pm(0) - 2 * kDemo.a * kDemo.m * d.v2,
                               pm(1) + 2 * kDemo.a * kDemo.m * (1 - std::cos(d.dtheta)));

  // Independent enumeration on a dense seed fan.
  const Fn2 f = detail::sleigh_system(target, kDemo, +1.0);
  std::vector<Eigen::Vector2d> seeds;
  for (double t = -3.0; t <= 3.0; t += 0.25) {
    for (double w = -1.5; w <= 1.5; w += 0.25) seeds.emplace_back(t, w);
  }
  const auto dense = multistart(f, detail::sleigh_system_jacobian(kDemo, +1.0), seeds);
  REQUIRE(!dense.roots.empty());
  double best = 1e300;
  Eigen::Vector2d expect = dense.roots[0];
  for (const auto& r : dense.roots) {
    if (std::abs(r(0) - d.dtheta) < best) {
      best = std::abs(r(0) - d.dtheta);
      expect = r;
    }
  }

  const SleighStepResult r = sleigh_step(d, kDemo);
  REQUIRE(r.report.status == StepStatus::ok);
  CHECK(r.next.dtheta == doctest::Approx(expect(0)).epsilon(1e-10));
  CHECK(r.next.v1 == doctest::Approx(expect(1)).epsilon(1e-10));
}

TEST_CASE("backward step inverts the forward step") {
  for (const SleighParams& p : {kDemo, kDemoB}) {
    const SleighDisplacement d0 = SleighDisplacement::from_chart(0.22, 0.12);
    const SleighStepResult fwd = sleigh_step(d0, p);
    REQUIRE(fwd.report.status == StepStatus::ok);
    const SleighStepResult back = sleigh_step_back(fwd.next, p);
    REQUIRE(back.report.status == StepStatus::ok);
    CHECK(back.next.dtheta == doctest::Approx(d0.dtheta).epsilon(1e-10));
    CHECK(back.next.v1 == doctest::Approx(d0.v1).epsilon(1e-10));
  }
}

TEST_CASE("reconstruction geometry") {
  // Zero displacements: constant pose.
  const PoseSE2 start(0.4, -1.0, 2.0);
  std::vector<SleighDisplacement> zeros(5, SleighDisplacement::from_chart(0.0, 0.0));
  for (const PoseSE2& g : reconstruct_discrete(start, zeros)) {
    CHECK(g.x == start.x);
    CHECK(g.y == start.y);
  }

  // a = 0 constant displacement: all contact points on one circle of
  // radius V1 / sin(dtheta).
  const double dth = 0.3, v1 = 0.5;
  std::vector<SleighDisplacement> arc(100, SleighDisplacement::from_chart(dth, v1));
  const auto poses = reconstruct_discrete(start, arc);
  const double v2 = v2_from_constraint(dth, v1);
  const double det = 2.0 * (1.0 - std::cos(dth));
  const double fx = ((1 - std::cos(dth)) * v1 - std::sin(dth) * v2) / det;
  const double fy = (std::sin(dth) * v1 + (1 - std::cos(dth)) * v2) / det;
  const double cx = start.x + std::cos(start.theta) * fx - std::sin(start.theta) * fy;
  const double cy = start.y + std::sin(start.theta) * fx + std::cos(start.theta) * fy;
  const double rho = v1 / std::sin(dth);
  double worst = 0.0;
  for (const PoseSE2& g : poses) {
    worst = std::max(worst, std::abs(std::hypot(g.x - cx, g.y - cy) - std::abs(rho)));
  }
  CHECK(worst < 1e-9);

  // Mid-angle displacement identities on every consecutive pair.
  for (size_t k = 0; k + 1 < poses.size(); ++k) {
    const PoseSE2& a = poses[k];
    const PoseSE2& b = poses[k + 1];
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double lhs1 = dx * std::cos(a.theta) + dy * std::sin(a.theta);
    const double rhs1 = dx * std::cos(b.theta) + dy * std::sin(b.theta);
    const double lhs2 = -dx * std::sin(a.theta) + dy * std::cos(a.theta);
    const double rhs2 = dx * std::sin(b.theta) - dy * std::cos(b.theta);
    CHECK(lhs1 == doctest::Approx(rhs1).epsilon(1e-12));
    CHECK(lhs2 == doctest::Approx(rhs2).epsilon(1e-12));
  }

  // Left translation commutes with reconstruction.
  const PoseSE2 g(1.2, 3.0, -0.5);
  const auto moved = reconstruct_discrete(se2_compose(g, start), arc);
  for (size_t k = 0; k < poses.size(); ++k) {
    const PoseSE2 expect = se2_compose(g, poses[k]);
    CHECK(moved[k].x == doctest::Approx(expect.x).epsilon(1e-12));
    CHECK(moved[k].y == doctest::Approx(expect.y).epsilon(1e-12));
  }
}

TEST_CASE("naive constraint: spiral versus circle") {
  const SleighParams a0(1.0, 1.5, 0.0, 0.0);
  const PoseSE2 start(0.2, 0.1, -0.3);
  const double dth = 0.3, v1 = 0.5;

  // Locate the spiral center by running the naive map to its limit.
  PoseSE2 g = start;
  double d = dth, w = v1;
  for (int k = 0; k < 4000; ++k) {
    g = se2_compose(g, PoseSE2(d, w, 0.0));
    const NaiveStepResult r = sleigh_naive_step(d, w, a0);
    REQUIRE(r.status == StepStatus::ok);
    d = r.dtheta;
    w = r.v1;
  }
  const double cx = g.x, cy = g.y;

  g = start;
  d = dth;
  w = v1;
  double prev = std::hypot(g.x - cx, g.y - cy);
  int monotone_steps = 0;
  for (int k = 0; k < 60; ++k) {
    g = se2_compose(g, PoseSE2(d, w, 0.0));
    const NaiveStepResult r = sleigh_naive_step(d, w, a0);
    d = r.dtheta;
    w = r.v1;
    const double rad = std::hypot(g.x - cx, g.y - cy);
    if (rad < prev) ++monotone_steps;
    prev = rad;
  }
  CHECK(monotone_steps >= 60);  // strictly decreasing radius: a spiral
}

TEST_CASE("bi-asymptotics in the single-valued region") {
  // Small transversal kick off the stationary line.
  const SleighDisplacement d0 = SleighDisplacement::from_chart(0.10, 0.01);
  const AsymptoticsReport rep = sleigh_asymptotics_check(d0, kDemo, 3000);
  CHECK(rep.status == StepStatus::ok);
  CHECK(rep.increments_nonnegative);
  CHECK(rep.ptheta_sign_constant);
  CHECK(rep.forward_ptheta_gap < 1e-4);
  CHECK(rep.backward_ptheta_gap < 1e-4);
  CHECK(rep.forward_on_stable_segment);
  CHECK(rep.backward_on_unstable_segment);
  CHECK(rep.max_energy_drift < 1e-9);

  // The mirrored start stays in the opposite half plane.
  const SleighDisplacement dm = SleighDisplacement::from_chart(-0.10, 0.01);
  const AsymptoticsReport mirrored = sleigh_asymptotics_check(dm, kDemo, 1500);
  CHECK(mirrored.status == StepStatus::ok);
  CHECK(mirrored.ptheta_sign_constant);

  // Energy bound enforcement.
  CHECK_THROWS_AS((void)sleigh_asymptotics_check(SleighDisplacement::from_chart(1.5, 1.5),
                                                 kDemo, 10),
                  std::domain_error);
  CHECK_THROWS_AS((void)sleigh_asymptotics_check(d0, kDemoB, 10), std::invalid_argument);
}
