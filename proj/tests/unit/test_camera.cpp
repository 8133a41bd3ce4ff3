#include <doctest.h>

#include <cmath>
#include <random>

#include "mpsurvey/camera.hpp"

using namespace mps;

TEST_CASE("projection puts the optical axis on the principal point") {
  CameraIntrinsics intr;
  intr.omega = 1000.0;
  intr.u0 = 640.0;
  intr.v0 = 360.0;
  intr.width = 1280;
  intr.height = 720;
  const PixelCoord p = project(intr, {0.0, 0.0, 0.25});
  CHECK(p.u == doctest::Approx(640.0));
  CHECK(p.v == doctest::Approx(360.0));
}

TEST_CASE("direct substitution example") {
  CameraIntrinsics intr;
  intr.omega = 1000.0;
  intr.u0 = 640.0;
  intr.v0 = 360.0;
  intr.width = 1280;
  intr.height = 720;
  const PixelCoord p = project(intr, {0.01, 0.0, 0.1});
  CHECK(p.u == doctest::Approx(740.0).epsilon(1e-12));
  CHECK(p.v == doctest::Approx(360.0).epsilon(1e-12));
}

TEST_CASE("points behind the camera are rejected") {
  CameraIntrinsics intr;
  CHECK_THROWS_AS(project(intr, {0.0, 0.0, 0.0}), BehindCameraError);
  CHECK_THROWS_AS(project(intr, {0.1, 0.0, -0.2}), BehindCameraError);
}

TEST_CASE("projection is scale invariant in the point coordinates") {
  CameraIntrinsics intr;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  std::uniform_real_distribution<double> s(0.2, 5.0);
  for (int i = 0; i < 200; ++i) {
    const CartesianPoint p{u(rng), u(rng), 0.08 + std::abs(u(rng))};
    const double k = s(rng);
    const PixelCoord a = project(intr, p);
    const PixelCoord b = project(intr, {k * p.x, k * p.y, k * p.z});
    CHECK(a.u == doctest::Approx(b.u).epsilon(1e-12));
    CHECK(a.v == doctest::Approx(b.v).epsilon(1e-12));
  }
}

TEST_CASE("pixel_to_displacement basics") {
  ScaleCalibration cal;
  cal.meters_per_pixel = 1e-4;
  cal.nominal_zc = 0.1;

  SUBCASE("zero error maps to zero displacement") {
    const PlanarDisplacement d = pixel_to_displacement(cal, {0.0, 0.0});
    CHECK(d.dx == 0.0);
    CHECK(d.dy == 0.0);
  }

  SUBCASE("one pixel maps to meters_per_pixel") {
    const PlanarDisplacement d = pixel_to_displacement(cal, {1.0, 0.0});
    CHECK(d.dx == doctest::Approx(1e-4));
    CHECK(d.dy == doctest::Approx(0.0));
  }

  SUBCASE("90 degree hand-eye yaw maps image-u onto rover-y") {
    cal.hand_eye_yaw = 3.14159265358979323846 / 2.0;
    const PlanarDisplacement d = pixel_to_displacement(cal, {1.0, 0.0});
    // Rotation-matrix oracle: R(90) * (1e-4, 0) = (0, 1e-4).
    CHECK(d.dx == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(d.dy == doctest::Approx(1e-4));
  }
}

TEST_CASE("project then pixel_to_displacement round trip at nominal height") {
  CameraIntrinsics intr;
  ScaleCalibration cal;
  cal.nominal_zc = 0.1;
  cal.meters_per_pixel = cal.nominal_zc / intr.omega;

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-0.03, 0.03);
  for (int i = 0; i < 200; ++i) {
    const CartesianPoint p{u(rng), u(rng), cal.nominal_zc};
    const PixelCoord px = project(intr, p);
    const PlanarDisplacement d =
        pixel_to_displacement(cal, {px.u - intr.u0, px.v - intr.v0});
    CHECK(std::abs(d.dx - p.x) < 1e-9);
    CHECK(std::abs(d.dy - p.y) < 1e-9);
  }
}

TEST_CASE("intrinsics invariants") {
  CameraIntrinsics intr;
  intr.omega = -1.0;
  CHECK_THROWS_AS(intr.validate(), std::invalid_argument);
  intr = CameraIntrinsics{};
  intr.u0 = 1e5;
  CHECK_THROWS_AS(intr.validate(), std::invalid_argument);
}
