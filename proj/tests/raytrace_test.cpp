#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

#include "fixtures.hpp"
#include "lensforge/raytrace.hpp"

using namespace lensforge;
using namespace lensforge::testing;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

LensSystem<double> slab(double thickness, double n) {
  LensSystem<double> sys;
  sys.surfaces.push_back(stop(-0.5, 10.0));
  sys.surfaces.push_back(plane(0.0, 50.0, glass(n)));
  sys.surfaces.push_back(plane(thickness, 50.0));
  sys.sensor_z = thickness + 5.0;
  sys.wavelengths = {0.587};
  sys.renumber();
  return sys;
}

// Plano-convex lens, f = 100 mm (flat side first, R2 = -50, n = 1.5, 1 mm
// thick), with the stop 20 mm behind its rear principal plane (the curved
// vertex). The front principal plane sits 2/3 mm behind the first vertex.
LensSystem<double> buried_stop() {
  LensSystem<double> sys;
  sys.surfaces.push_back(plane(0.0, 20.0, glass(1.5)));
  sys.surfaces.push_back(sphere(-50.0, 1.0, 20.0));
  sys.surfaces.push_back(stop(21.0, 4.0));
  sys.sensor_z = 100.0;
  sys.wavelengths = {0.587};
  sys.renumber();
  return sys;
}

}  // namespace

TEST_CASE("Snell refraction") {
  const Vec3<double> n(0, 0, -1);
  Vec3<double> d(std::sin(30 * kDeg), 0, std::cos(30 * kDeg));
  REQUIRE(refract(d, n, 1.0, 1.5));
  const double out = std::asin(d.x()) / kDeg;
  CHECK(std::abs(out - std::asin(0.5 / 1.5) / kDeg) < 1e-6);
  CHECK(std::abs(out - 19.471) < 1e-3);
  CHECK(std::abs(d.norm() - 1.0) < 1e-12);

  Vec3<double> normal_inc(0, 0, 1);
  REQUIRE(refract(normal_inc, n, 1.0, 1.7));
  CHECK(normal_inc == Vec3<double>(0, 0, 1));

  const double critical = std::asin(1.0 / 1.5) / kDeg;
  CHECK(critical == doctest::Approx(41.81).epsilon(1e-4));
  Vec3<double> tir(std::sin(45 * kDeg), 0, std::cos(45 * kDeg));
  CHECK_FALSE(refract(tir, n, 1.5, 1.0));
  Vec3<double> below(std::sin((critical - 0.01) * kDeg), 0, std::cos((critical - 0.01) * kDeg));
  CHECK(refract(below, n, 1.5, 1.0));

  Ray<double> ray;
  ray.direction = Vec3<double>(std::sin(45 * kDeg), 0, std::cos(45 * kDeg));
  refract(ray, n, 1.5, 1.0);
  CHECK_FALSE(ray.valid);
  CHECK(ray.failure == RayFailure::kTotalInternalReflection);
  const Ray<double> frozen = ray;
  refract(ray, n, 1.0, 1.5);
  CHECK(ray.direction == frozen.direction);
}

TEST_CASE("refraction is reversible and planar") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const Vec3<double> n = Vec3<double>(0.3 * u(gen), 0.3 * u(gen), -1.0).normalized();
    const Vec3<double> d0 = Vec3<double>(0.4 * u(gen), 0.4 * u(gen), 1.0).normalized();
    const double n1 = 1.0 + 0.8 * std::abs(u(gen)), n2 = 1.0 + 0.8 * std::abs(u(gen));
    Vec3<double> d = d0;
    if (!refract(d, n, n1, n2)) continue;
    const double sin1 = d0.cross(n).norm(), sin2 = d.cross(n).norm();
    CHECK(std::abs(n1 * sin1 - n2 * sin2) < 1e-9);
    CHECK(std::abs(d0.cross(n).dot(d)) < 1e-12);
    Vec3<double> back = -d;
    REQUIRE(refract(back, n, n2, n1));
    CHECK((back + d0).norm() < 1e-9);
  }
}

TEST_CASE("empty system traces straight to the sensor") {
  LensSystem<double> sys;
  sys.sensor_z = 10.0;
  Ray<double> ray;
  auto traced = trace(sys, ray);
  REQUIRE(traced.valid());
  CHECK(traced.sensor == Vec2<double>(0, 0));
}

TEST_CASE("slab lateral shift") {
  const double t = 3.0, n = 1.5, s30 = std::sin(30 * kDeg), c30 = std::cos(30 * kDeg);
  LensSystem<double> sys = slab(t, n);
  Ray<double> ray;
  ray.origin = Vec3<double>(0, 0, -2.0);
  ray.direction = Vec3<double>(s30, 0, c30);
  auto traced = trace(sys, ray);
  REQUIRE(traced.valid());
  const Vec3<double> exit = traced.ray.origin;
  CHECK((traced.ray.direction - ray.direction).norm() < 1e-12);
  const double shift = (exit - ray.origin).cross(ray.direction).norm();
  const double formula = t * s30 * (1.0 - c30 / std::sqrt(n * n - s30 * s30));
  CHECK(std::abs(shift - formula) < 1e-9);
  CHECK(std::abs(shift - 0.58140) < 1e-4);
}

TEST_CASE("paraxial focal lengths") {
  auto pc = plano_convex(50.0, 1.5, 3.0, 5.0, 110.0);
  auto res = paraxial_solve(pc, 0.587);
  CHECK(res.efl == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(res.bfd == doctest::Approx(100.0 - 3.0 / 1.5).epsilon(1e-12));

  LensSystem<double> pair;
  pair.surfaces.push_back(stop(-1.0, 5.0));
  pair.surfaces.push_back(sphere(50.0, 0.0, 20.0, glass(1.5)));
  pair.surfaces.push_back(plane(1e-6, 20.0));
  pair.surfaces.push_back(plane(2e-6, 20.0, glass(1.5)));
  pair.surfaces.push_back(sphere(-50.0, 3e-6, 20.0));
  pair.sensor_z = 60.0;
  pair.renumber();
  CHECK(paraxial_solve(pair, 0.587).efl == doctest::Approx(50.0).epsilon(1e-6));

  CHECK_THROWS_AS(paraxial_solve(slab(3.0, 1.5), 0.587), ParaxialError);
}

TEST_CASE("collimated bundle converges at the paraxial focus") {
  auto sys = plano_convex(50.0, 1.5, 3.0, 1.0, 0.0);
  sys.sensor_z = 3.0 + paraxial_solve(sys, 0.587).bfd;
  double worst = 0.0;
  for (const auto& ray : sample_rays(sys, Field{}, 0.587, 64, PupilPattern::kGrid, 0)) {
    auto t = trace(sys, ray);
    REQUIRE(t.valid());
    worst = std::max(worst, t.sensor.norm());
  }
  CHECK(worst < 2e-4);
}

TEST_CASE("entrance pupil of a buried stop") {
  auto sys = buried_stop();
  EntrancePupil ep = entrance_pupil(sys, 0.587);
  // Image of the stop: d f / (f - d) from the front principal plane,
  // magnification f / (f - d).
  CHECK(ep.z == doctest::Approx(2.0 / 3.0 + 25.0).epsilon(1e-12));
  CHECK(ep.radius == doctest::Approx(5.0).epsilon(1e-12));

  set_stop_for_fnumber(sys, 100.0, 4.0);
  CHECK(2.0 * entrance_pupil(sys, 0.587).radius == doctest::Approx(25.0).epsilon(1e-9));

  sys.surfaces[2].semi_diameter = 0.0;
  CHECK_THROWS_AS(entrance_pupil(sys, 0.587), std::invalid_argument);
}

TEST_CASE("pupil sampling") {
  auto sys = buried_stop();
  auto one = sample_rays(sys, Field{}, 0.587, 1, PupilPattern::kGrid, 0);
  REQUIRE(one.size() == 1);
  CHECK(one[0].direction == Vec3<double>(0, 0, 1));
  CHECK(one[0].origin.head<2>().norm() == 0.0);

  // All grid rays stay inside the stop aperture.
  for (double tan_y : {0.0, 0.05}) {
    auto rays = sample_rays(sys, Field{0.0, tan_y}, 0.587, 49, PupilPattern::kGrid, 0);
    CHECK(rays.size() == 49);
    LensSystem<double> front = sys;
    front.surfaces.resize(3);
    front.surfaces[2].semi_diameter = 1e9;
    front.sensor_z = 21.0 + 1e-9;
    for (const auto& r : rays) {
      auto t = trace(front, r);
      REQUIRE(t.valid());
      CHECK(t.sensor.norm() <= sys.surfaces[2].semi_diameter);
    }
  }

  const double u = 12 * kDeg;
  for (const auto& r : sample_rays(sys, Field{std::tan(u), 0.0}, 0.587, 37,
                                   PupilPattern::kFibonacci, 0)) {
    CHECK((r.direction - Vec3<double>(std::sin(u), 0, std::cos(u))).norm() < 1e-15);
    CHECK(r.origin.z() < sys.surfaces.front().z);
  }

  auto a = sample_rays(sys, Field{0.0, 0.1, 500.0}, 0.587, 20, PupilPattern::kRandom, 9);
  auto b = sample_rays(sys, Field{0.0, 0.1, 500.0}, 0.587, 20, PupilPattern::kRandom, 9);
  auto c = sample_rays(sys, Field{0.0, 0.1, 500.0}, 0.587, 20, PupilPattern::kRandom, 10);
  CHECK(a[5].direction == b[5].direction);
  CHECK(a[5].direction != c[5].direction);
  // A finite-depth bundle diverges from a single object point.
  CHECK((a[0].origin - a[7].origin).norm() == 0.0);
}

TEST_CASE("chief ray passes through the center of a buried stop") {
  auto sys = buried_stop();
  Ray<double> chief = chief_ray(sys, Field{0.0, 0.15}, 0.587);
  LensSystem<double> front = sys;
  front.surfaces.resize(3);
  front.sensor_z = 21.0 + 1e-12;
  auto t = trace(front, chief);
  REQUIRE(t.valid());
  CHECK(t.sensor.norm() < 1e-9);
}

TEST_CASE("paraxial image scale equals EFL at focus") {
  auto sys = plano_convex(50.0, 1.5, 3.0, 2.0, 0.0);
  auto p = paraxial_solve(sys, 0.587);
  sys.sensor_z = 3.0 + p.bfd;
  CHECK(paraxial_image_scale(sys, 0.587) == doctest::Approx(p.efl).epsilon(1e-12));
}

TEST_CASE("trace is deterministic and failures are data") {
  auto sys = plano_convex(50.0, 1.5, 3.0, 5.0, 98.0);
  sys.surfaces[1].semi_diameter = 3.0;
  auto rays = sample_rays(sys, Field{}, 0.587, 100, PupilPattern::kRandom, 4);
  int failed = 0;
  for (const auto& r : rays) {
    auto t1 = trace(sys, r), t2 = trace(sys, r);
    CHECK(t1.sensor == t2.sensor);
    CHECK(t1.valid() == t2.valid());
    if (!t1.valid()) {
      ++failed;
      CHECK(t1.ray.failure == RayFailure::kClipped);
      CHECK(t1.failed_surface == 1);
    }
  }
  CHECK(failed > 0);
  CHECK(failed < 100);
}
