#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "deps/liegroup.hpp"

using namespace deps;

namespace {

std::mt19937& rng() {
  static std::mt19937 gen(20240917u);
  return gen;
}

double uniform(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng());
}

AdmissibleRotation random_admissible() {
  while (true) {
    const double x = uniform(-1.0, 1.0), y = uniform(-1.0, 1.0), z = uniform(-1.0, 1.0);
    const double n = std::sqrt(x * x + y * y + z * z);
    if (n > 1e-3 && n <= 1.0) return AdmissibleRotation(x / n, y / n, z / n);
  }
}

}  // namespace

TEST_CASE("hat3/vee3 basics") {
  CHECK(hat3(Eigen::Vector3d::Zero().eval()).isZero(0.0));

  const Eigen::Vector3d v(1.0, 2.0, 3.0);
  CHECK((vee3(hat3(v)) - v).norm() == 0.0);

  // e3 x e1 = e2
  const Eigen::Vector3d w = hat3(Eigen::Vector3d(0, 0, 1).eval()) * Eigen::Vector3d(1, 0, 0);
  CHECK((w - Eigen::Vector3d(0, 1, 0)).norm() == doctest::Approx(0.0));

  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector3d a(uniform(-2, 2), uniform(-2, 2), uniform(-2, 2));
    const Eigen::Vector3d b(uniform(-2, 2), uniform(-2, 2), uniform(-2, 2));
    CHECK((hat3(a) * b - a.cross(b)).norm() < 1e-14);
  }

  Eigen::Matrix3d not_skew = Eigen::Matrix3d::Identity();
  CHECK_THROWS_AS((void)vee3(not_skew), std::domain_error);
}

TEST_CASE("euler-rodrigues rotation") {
  const Eigen::Matrix3d id = rotation_from_euler_rodrigues(EulerRodrigues(1, 0, 0, 0));
  CHECK((id - Eigen::Matrix3d::Identity()).norm() < 1e-15);

  // Rotation about e1: diagonal (1, cos a, cos a) and R(2,1) = sin a.
  const double a = 0.83;
  const Eigen::Matrix3d r =
      rotation_from_euler_rodrigues(EulerRodrigues(std::cos(a / 2), std::sin(a / 2), 0, 0));
  CHECK(r(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(r(1, 1) == doctest::Approx(std::cos(a)).epsilon(1e-14));
  CHECK(r(2, 2) == doctest::Approx(std::cos(a)).epsilon(1e-14));
  CHECK(r(2, 1) == doctest::Approx(std::sin(a)).epsilon(1e-14));
  CHECK((r.col(0) - Eigen::Vector3d::UnitX()).norm() < 1e-15);

  // Antipodal quaternions give the same matrix.
  for (int i = 0; i < 50; ++i) {
    const EulerRodrigues q = [&] {
      const double w = uniform(-1, 1), x = uniform(-1, 1), y = uniform(-1, 1),
                   z = uniform(-1, 1);
      return EulerRodrigues::normalized(w, x, y, z);
    }();
    const EulerRodrigues qn(-q.q0, -q.q1, -q.q2, -q.q3);
    CHECK((rotation_from_euler_rodrigues(q) - rotation_from_euler_rodrigues(qn)).norm() == 0.0);
    const Eigen::Matrix3d m = rotation_from_euler_rodrigues(q);
    CHECK((m.transpose() * m - Eigen::Matrix3d::Identity()).norm() < 1e-14);
    CHECK(m.determinant() == doctest::Approx(1.0).epsilon(1e-12));
  }

  CHECK_THROWS_AS(EulerRodrigues(1.0, 0.5, 0, 0), std::invalid_argument);
}

TEST_CASE("admissible rotations on SO(3)") {
  const Eigen::Matrix3d id = admissible_rotation_so3(AdmissibleRotation(1, 0, 0));
  CHECK((id - Eigen::Matrix3d::Identity()).norm() < 1e-15);

  for (int i = 0; i < 1000; ++i) {
    const AdmissibleRotation p = random_admissible();
    const Eigen::Matrix3d m = admissible_rotation_so3(p);
    CHECK((m.transpose() * m - Eigen::Matrix3d::Identity()).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK(m.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    // Symmetric upper block, antisymmetric last row/column.
    CHECK(m(0, 1) == doctest::Approx(m(1, 0)).epsilon(1e-14));
    CHECK(m(0, 2) == doctest::Approx(-m(2, 0)).epsilon(1e-14));
    CHECK(m(1, 2) == doctest::Approx(-m(2, 1)).epsilon(1e-14));
    // Agrees with the quaternion map at q3 = 0.
    const Eigen::Matrix3d viaq =
        rotation_from_euler_rodrigues(EulerRodrigues(p.q0, p.q1, p.q2, 0.0));
    CHECK((m - viaq).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("admissible rotations on SO(n)") {
  // z0 = 1 is the identity.
  Eigen::VectorXd z = Eigen::VectorXd::Zero(5);
  z(0) = 1.0;
  CHECK((admissible_rotation_son(z) - Eigen::MatrixXd::Identity(5, 5)).norm() < 1e-15);

  // n = 3 coincides with the SO(3) chart under q1 = -z2, q2 = z1.
  for (int i = 0; i < 200; ++i) {
    Eigen::VectorXd v(3);
    v << uniform(-1, 1), uniform(-1, 1), uniform(-1, 1);
    if (v.norm() < 1e-3) continue;
    v.normalize();
    const Eigen::MatrixXd a = admissible_rotation_son(v);
    const Eigen::Matrix3d b =
        admissible_rotation_so3(AdmissibleRotation(v(0), -v(2), v(1)));
    CHECK((a - b).lpNorm<Eigen::Infinity>() < 1e-13);
  }

  // n = 4: orthogonal, det +1, block structure.
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd v(4);
    v << uniform(-1, 1), uniform(-1, 1), uniform(-1, 1), uniform(-1, 1);
    if (v.norm() < 1e-3) continue;
    v.normalize();
    const Eigen::MatrixXd m = admissible_rotation_son(v);
    CHECK((m.transpose() * m - Eigen::MatrixXd::Identity(4, 4)).lpNorm<Eigen::Infinity>() <
          1e-13);
    CHECK(m.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) CHECK(m(r, c) == doctest::Approx(m(c, r)).epsilon(1e-14));
      CHECK(m(r, 3) == doctest::Approx(-m(3, r)).epsilon(1e-14));
    }
  }
}

TEST_CASE("log of admissible rotations") {
  const AdmissibleRotation id = log_admissible_so3(Eigen::Matrix3d::Identity());
  CHECK(id.q0 == doctest::Approx(1.0));
  CHECK(std::abs(id.q1) + std::abs(id.q2) < 1e-12);

  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const AdmissibleRotation p = random_admissible();
    const AdmissibleRotation back = log_admissible_so3(admissible_rotation_so3(p));
    worst = std::max(worst, p.distance(back));
  }
  CHECK(worst < 1e-10);

  // Half-turn boundary: q0 = 0 representatives are sign-canonicalized.
  const AdmissibleRotation half(0.0, -0.6, 0.8);
  CHECK(half.q1 == doctest::Approx(0.6));  // canonical flip
  const AdmissibleRotation rec = log_admissible_so3(admissible_rotation_so3(half));
  CHECK(half.distance(rec) < 1e-10);
  CHECK(rec.q1 >= 0.0);

  // Rotation about e3 is not admissible.
  Eigen::Matrix3d rz;
  rz << std::cos(0.7), -std::sin(0.7), 0, std::sin(0.7), std::cos(0.7), 0, 0, 0, 1;
  CHECK_THROWS_AS((void)log_admissible_so3(rz), std::domain_error);
}

TEST_CASE("se2 composition and inverse") {
  for (int i = 0; i < 200; ++i) {
    const PoseSE2 g(uniform(-3, 3), uniform(-5, 5), uniform(-5, 5));
    const PoseSE2 gi = se2_inverse(g);
    const PoseSE2 e = se2_compose(g, gi);
    CHECK(std::abs(e.theta) < 1e-13);
    CHECK(std::abs(e.x) < 1e-12);
    CHECK(std::abs(e.y) < 1e-12);
    // Matches the homogeneous-matrix product.
    const PoseSE2 h(uniform(-3, 3), uniform(-5, 5), uniform(-5, 5));
    const Eigen::Matrix3d prod = se2_matrix(g) * se2_matrix(h);
    const PoseSE2 c = se2_compose(g, h);
    CHECK((se2_matrix(c) - prod).lpNorm<Eigen::Infinity>() < 1e-12);
  }

  const PoseSE2 c1 = se2_compose(PoseSE2(0, 1, 0), PoseSE2(0, 2, 3));
  CHECK(c1.x == doctest::Approx(3.0));
  CHECK(c1.y == doctest::Approx(3.0));
  const PoseSE2 c2 = se2_compose(PoseSE2(kPi / 2, 0, 0), PoseSE2(0, 1, 0));
  CHECK(c2.theta == doctest::Approx(kPi / 2));
  CHECK(c2.x == doctest::Approx(0.0));
  CHECK(c2.y == doctest::Approx(1.0));
}

TEST_CASE("helical displacement") {
  const PoseSE2 a(0.4, 1.0, -2.0);
  const HelicalDisplacement zero = helical_displacement(a, a);
  CHECK(std::abs(zero.dtheta) + std::abs(zero.t1) + std::abs(zero.t2) == 0.0);

  const HelicalDisplacement d1 = helical_displacement(PoseSE2(0, 0, 0), PoseSE2(0, 3, 4));
  CHECK(d1.t1 == doctest::Approx(3.0));
  CHECK(d1.t2 == doctest::Approx(4.0));

  const HelicalDisplacement d2 =
      helical_displacement(PoseSE2(kPi / 2, 0, 0), PoseSE2(kPi / 2, 1, 0));
  CHECK(d2.dtheta == doctest::Approx(0.0));
  CHECK(d2.t1 == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(d2.t2 == doctest::Approx(-1.0));

  // Consistency with the matrix definition A^{-1} B.
  for (int i = 0; i < 200; ++i) {
    const PoseSE2 g(uniform(-3, 3), uniform(-5, 5), uniform(-5, 5));
    const PoseSE2 h(uniform(-3, 3), uniform(-5, 5), uniform(-5, 5));
    const HelicalDisplacement d = helical_displacement(g, h);
    const Eigen::Matrix3d w = se2_matrix(g).inverse() * se2_matrix(h);
    CHECK(std::cos(d.dtheta) == doctest::Approx(w(0, 0)).epsilon(1e-12));
    CHECK(d.t1 == doctest::Approx(w(0, 2)).epsilon(1e-12));
    CHECK(d.t2 == doctest::Approx(w(1, 2)).epsilon(1e-12));
  }
}

TEST_CASE("screw exponential on SE(2)") {
  // omega = 0: straight line.
  const PoseSE2 line = exp_d_se2(0.0, 2.0, 1.5);
  CHECK(line.theta == 0.0);
  CHECK(line.x == doctest::Approx(3.0));
  CHECK(line.y == doctest::Approx(0.0));

  const PoseSE2 half = exp_d_se2(kPi, kPi, 1.0);
  CHECK(half.theta == doctest::Approx(kPi));
  CHECK(half.x == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(half.y == doctest::Approx(2.0));

  // Quotient identity t2 * W21 = t1 * (1 - W11), exact in the limit form.
  for (int i = 0; i < 400; ++i) {
    const double w = uniform(-2.5, 2.5), v = uniform(-2, 2), t = uniform(0.01, 1.2);
    const PoseSE2 g = exp_d_se2(w, v, t);
    const double w11 = std::cos(g.theta), w21 = std::sin(g.theta);
    CHECK(std::abs(g.y * w21 - g.x * (1.0 - w11)) < 1e-12 * (1.0 + std::abs(g.x) + std::abs(g.y)));
  }

  // Series branch is continuous against the closed form.
  const PoseSE2 tiny1 = exp_d_se2(1e-9, 1.0, 1.0);
  const PoseSE2 tiny2 = exp_d_se2(1.0000001e-8, 1.0, 1.0);
  CHECK(tiny1.x == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(tiny2.x == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(tiny1.y - 0.5e-9) < 1e-20);
}

TEST_CASE("coadjoint action on so*(3)") {
  const Eigen::Vector3d m(0.3, -1.2, 2.0);
  const Eigen::Vector3d same = coad_so3(AdmissibleRotation(1, 0, 0), m);
  CHECK((same - m).norm() < 1e-15);

  for (int i = 0; i < 1000; ++i) {
    const AdmissibleRotation p = random_admissible();
    const Eigen::Vector3d v(uniform(-2, 2), uniform(-2, 2), uniform(-2, 2));
    const Eigen::Vector3d tv = coad_so3(p, v);
    CHECK(tv.norm() == doctest::Approx(v.norm()).epsilon(1e-13));
    // Matrix-conjugation oracle: Omega^T hat(v) Omega = hat(Omega^T v).
    const Eigen::Matrix3d om = admissible_rotation_so3(p);
    const Eigen::Matrix3d conj = om.transpose() * hat3(v) * om;
    CHECK((conj - hat3(tv)).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("coadjoint action on se*(2)") {
  const Eigen::Vector3d p0(0.7, -0.2, 1.1);
  CHECK((coad_se2(0, 0, 0, p0) - p0).norm() == 0.0);

  for (int i = 0; i < 500; ++i) {
    const double dth = uniform(-3, 3), v1 = uniform(-2, 2), v2 = uniform(-2, 2);
    const Eigen::Vector3d pv(uniform(-2, 2), uniform(-2, 2), uniform(-2, 2));
    const Eigen::Vector3d ad = coad_se2(dth, v1, v2, pv);
    // Planar rotation of the linear part preserves its norm.
    CHECK(ad.tail<2>().norm() == doctest::Approx(pv.tail<2>().norm()).epsilon(1e-13));

    // Matrix oracle: <Ad*_g P, xi> = <P, Ad_g xi> on a basis of se(2).
    const Eigen::Matrix3d g = se2_matrix(PoseSE2(dth, v1, v2));
    const Eigen::Matrix3d gi = g.inverse();
    auto alg = [](double w, double x, double y) {
      Eigen::Matrix3d m;
      m << 0, -w, x, w, 0, y, 0, 0, 0;
      return m;
    };
    auto pair = [&pv](const Eigen::Matrix3d& xi) {
      return pv(0) * xi(1, 0) + pv(1) * xi(0, 2) + pv(2) * xi(1, 2);
    };
    const Eigen::Vector3d oracle(pair(g * alg(1, 0, 0) * gi), pair(g * alg(0, 1, 0) * gi),
                                 pair(g * alg(0, 0, 1) * gi));
    CHECK((ad - oracle).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("angle wrapping") {
  CHECK(wrap_angle(kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(3 * kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(0.0) == 0.0);
  for (int i = 0; i < 200; ++i) {
    const double t = uniform(-50, 50);
    const double w = wrap_angle(t);
    CHECK(w > -kPi);
    CHECK(w <= kPi);
    CHECK(std::remainder(w - t, 2 * kPi) == doctest::Approx(0.0).epsilon(1e-9));
  }
}
