#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "mpsurvey/kinematics.hpp"

using namespace mps;

namespace {

constexpr double kPi = 3.14159265358979323846;

ArmGeometry wide_geom(double r1 = 1.0, double r2 = 1.0, double alpha_j = 0.0) {
  ArmGeometry g;
  g.r1 = r1;
  g.r2 = r2;
  g.alpha_j = alpha_j;
  g.limits = JointLimits::around(0.0, 0.0, 0.0, kPi);
  return g;
}

// Independent oracle: compose homogeneous transforms
//   Rz(g0) * Ry(g1 + alpha_j) * Tz(r1) * Ry(pi/2 + g2 - alpha_j) * Tz(r2)
// and read the chain origin. Exercises a different computational path than
// the closed-form trig expressions.
Eigen::Vector3d transform_chain_oracle(const ArmGeometry& g, const JointConfig& q) {
  auto rz = [](double a) {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m(0, 0) = std::cos(a);
    m(0, 1) = -std::sin(a);
    m(1, 0) = std::sin(a);
    m(1, 1) = std::cos(a);
    return m;
  };
  auto ry = [](double a) {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m(0, 0) = std::cos(a);
    m(0, 2) = std::sin(a);
    m(2, 0) = -std::sin(a);
    m(2, 2) = std::cos(a);
    return m;
  };
  auto tz = [](double d) {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m(2, 3) = d;
    return m;
  };
  const Eigen::Matrix4d t = rz(q.gamma0) * ry(q.gamma1 + g.alpha_j) * tz(g.r1) *
                            ry(kPi / 2.0 + q.gamma2 - g.alpha_j) * tz(g.r2);
  return t.block<3, 1>(0, 3);
}

}  // namespace

TEST_CASE("forward kinematics matches the stated closed form at simple poses") {
  const ArmGeometry g = wide_geom();
  const CylindricalPoint p = forward_cylindrical(g, {0.0, 0.0, 0.0});
  CHECK(p.r == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(p.theta == doctest::Approx(0.0));
  CHECK(p.h == doctest::Approx(1.0).epsilon(1e-15));

  const CylindricalPoint p2 = forward_cylindrical(g, {kPi / 2.0, 0.0, 0.0});
  CHECK(p2.theta == doctest::Approx(kPi / 2.0));
  CHECK(p2.r == doctest::Approx(1.0));
  CHECK(p2.h == doctest::Approx(1.0));

  const CartesianPoint c = forward_cartesian(g, {0.0, 0.0, 0.0});
  CHECK(c.x == doctest::Approx(1.0));
  CHECK(c.y == doctest::Approx(0.0));
  CHECK(c.z == doctest::Approx(1.0));
}

TEST_CASE("gamma0 = 0 keeps the point in the xz plane") {
  const ArmGeometry g = wide_geom(0.13, 0.124, 0.186);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  for (int i = 0; i < 100; ++i) {
    const CartesianPoint c = forward_cartesian(g, {0.0, u(rng), u(rng)});
    CHECK(c.y == 0.0);
  }
}

TEST_CASE("forward kinematics agrees with the homogeneous-transform oracle") {
  const ArmGeometry g = wide_geom(0.13, 0.124, 0.186);
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(-1.4, 1.4);
  for (int i = 0; i < 500; ++i) {
    const JointConfig q{u(rng), u(rng), u(rng)};
    const CartesianPoint c = forward_cartesian(g, q);
    const Eigen::Vector3d oracle = transform_chain_oracle(g, q);
    CHECK(std::abs(c.x - oracle.x()) < 1e-12);
    CHECK(std::abs(c.y - oracle.y()) < 1e-12);
    CHECK(std::abs(c.z - oracle.z()) < 1e-12);
  }
}

TEST_CASE("cylindrical and Cartesian forms are consistent bit-for-bit") {
  const ArmGeometry g = wide_geom(0.13, 0.124, 0.186);
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int i = 0; i < 1000; ++i) {
    const JointConfig q{u(rng), u(rng), u(rng)};
    const CartesianPoint a = forward_cartesian(g, q);
    const CartesianPoint b = forward_cylindrical(g, q).to_cartesian();
    CHECK(a.x == b.x);
    CHECK(a.y == b.y);
    CHECK(a.z == b.z);
  }
}

TEST_CASE("joint limit violations are rejected") {
  ArmGeometry g = wide_geom();
  g.limits = JointLimits::around(0.0, 0.0, 0.0, 0.5);
  CHECK_THROWS_AS(forward_cylindrical(g, {0.0, 0.9, 0.0}), JointLimitError);
  CHECK_THROWS_AS(image_jacobian(g, {0.6, 0.0, 0.0}), JointLimitError);
}

TEST_CASE("geometry invariants are validated") {
  ArmGeometry g = wide_geom();
  g.r1 = -1.0;
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  g = wide_geom();
  g.wrist_sum = kPi / 2.0 + 0.2;
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
}

TEST_CASE("Jacobian row one at the zero pose") {
  const ArmGeometry g = wide_geom();
  const Eigen::Matrix3d j = image_jacobian(g, {0.0, 0.0, 0.0});
  CHECK(j(0, 0) == doctest::Approx(0.0));
  CHECK(j(0, 1) == doctest::Approx(1.0));
  CHECK(j(0, 2) == doctest::Approx(0.0));
  CHECK(j(2, 0) == 0.0);
}

TEST_CASE("dz/dgamma0 is identically zero") {
  const ArmGeometry g = wide_geom(0.13, 0.124, 0.186);
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> u(-1.4, 1.4);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Matrix3d j = image_jacobian(g, {u(rng), u(rng), u(rng)});
    CHECK(j(2, 0) == 0.0);
  }
}

TEST_CASE("Jacobian matches central finite differences of the position") {
  const ArmGeometry g = wide_geom(0.13, 0.124, 0.186);
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-1.4, 1.4);
  const double h = 1e-6;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const JointConfig q{u(rng), u(rng), u(rng)};
    const Eigen::Matrix3d j = image_jacobian(g, q);
    for (int col = 0; col < 3; ++col) {
      JointConfig lo = q;
      JointConfig hi = q;
      double* lo_angle = col == 0 ? &lo.gamma0 : (col == 1 ? &lo.gamma1 : &lo.gamma2);
      double* hi_angle = col == 0 ? &hi.gamma0 : (col == 1 ? &hi.gamma1 : &hi.gamma2);
      *lo_angle -= h;
      *hi_angle += h;
      const CartesianPoint pl = forward_cartesian(g, lo);
      const CartesianPoint ph = forward_cartesian(g, hi);
      const Eigen::Vector3d fd{(ph.x - pl.x) / (2 * h), (ph.y - pl.y) / (2 * h),
                               (ph.z - pl.z) / (2 * h)};
      for (int row = 0; row < 3; ++row) {
        const double scale = std::max(1e-3, std::abs(fd(row)));
        worst = std::max(worst, std::abs(j(row, col) - fd(row)) / scale);
      }
    }
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("Jacobian bottom row uses cos(beta): finite differences decide") {
  // At beta = 0 the z-row entries are -phi1 - phi2 and -phi2; a sin(beta)
  // reading would give -phi1 and 0 instead.
  const ArmGeometry g = wide_geom(0.13, 0.124, 0.0);
  const JointConfig q{0.3, 0.4, -0.4};  // beta = 0
  const Eigen::Matrix3d j = image_jacobian(g, q);
  const double phi1 = g.r1 * std::sin(q.gamma1);
  const double phi2 = g.r2;
  CHECK(j(2, 2) == doctest::Approx(-phi2).epsilon(1e-12));
  CHECK(j(2, 1) == doctest::Approx(-phi1 - phi2).epsilon(1e-12));

  const double h = 1e-6;
  JointConfig lo = q;
  JointConfig hi = q;
  lo.gamma2 -= h;
  hi.gamma2 += h;
  const double fd = (forward_cartesian(g, hi).z - forward_cartesian(g, lo).z) / (2 * h);
  CHECK(fd == doctest::Approx(-phi2).epsilon(1e-6));
}

TEST_CASE("solve_increment inverts the Jacobian") {
  const ArmGeometry g = wide_geom(0.13, 0.124, 0.186);
  const JointConfig q{0.1, 1.02, 0.148};

  SUBCASE("zero displacement gives zero deltas") {
    const JointDeltas d = solve_increment(g, q, {0.0, 0.0, 0.0}, 0.2);
    CHECK(d.d0 == 0.0);
    CHECK(d.d1 == 0.0);
    CHECK(d.d2 == 0.0);
  }

  SUBCASE("lambda = 1 round trip through J") {
    const CartesianPoint dp{0.004, -0.002, 0.003};
    const JointDeltas d = solve_increment(g, q, dp, 1.0);
    const Eigen::Vector3d back = image_jacobian(g, q) * Eigen::Vector3d(d.d0, d.d1, d.d2);
    CHECK(std::abs(back.x() - dp.x) < 1e-9);
    CHECK(std::abs(back.y() - dp.y) < 1e-9);
    CHECK(std::abs(back.z() - dp.z) < 1e-9);
  }

  SUBCASE("scaling homogeneity is exact") {
    const CartesianPoint dp{0.01, 0.0, 0.0};
    const JointDeltas full = solve_increment(g, q, dp, 1.0);
    const JointDeltas fifth = solve_increment(g, q, dp, 0.2);
    CHECK(fifth.d0 == 0.2 * full.d0);
    CHECK(fifth.d1 == 0.2 * full.d1);
    CHECK(fifth.d2 == 0.2 * full.d2);
  }

  SUBCASE("lambda outside (0,1] is rejected") {
    CHECK_THROWS_AS(solve_increment(g, q, {0.01, 0.0, 0.0}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(solve_increment(g, q, {0.01, 0.0, 0.0}, 1.5), std::invalid_argument);
  }
}

TEST_CASE("singular configuration: damped least squares or a named error") {
  // r = r1*sin(delta) + r2*cos(beta) = 0 at gamma1 = -pi/2, gamma2 = pi/2
  // (alpha_j = 0): the first Jacobian column vanishes.
  const ArmGeometry g = wide_geom();
  const JointConfig q{0.2, -kPi / 2.0, kPi / 2.0};
  CHECK(jacobian_condition(image_jacobian(g, q)) > 1e6);

  IncrementOptions no_damping;
  no_damping.damping_enabled = false;
  CHECK_THROWS_AS(solve_increment(g, q, {0.001, 0.0, 0.0}, 1.0, no_damping),
                  SingularityError);
  CHECK_THROWS_WITH_AS(solve_increment(g, q, {0.001, 0.0, 0.0}, 1.0, no_damping),
                       doctest::Contains("at q="), SingularityError);

  const JointDeltas d = solve_increment(g, q, {0.001, 0.0, 0.0}, 1.0);
  CHECK(std::isfinite(d.d0));
  CHECK(std::isfinite(d.d1));
  CHECK(std::isfinite(d.d2));
}
