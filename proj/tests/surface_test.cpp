#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "lensforge/surface.hpp"

using namespace lensforge;
using namespace lensforge::testing;

TEST_CASE("sag closed forms") {
  Surface<double> flat = plane(0.0, 5.0);
  CHECK(sag(flat, 1.3, -0.7) == 0.0);

  Surface<double> s = sphere(10.0, 0.0, 5.0);
  const double expected = 1.0 / (10.0 * (1.0 + std::sqrt(0.99)));
  CHECK(sag(s, 1.0, 0.0) == doctest::Approx(expected).epsilon(1e-15));
  CHECK(sag(s, 1.0, 0.0) == doctest::Approx(0.0501256).epsilon(1e-6));
  // Same value as the textbook sphere R - sqrt(R^2 - r^2).
  CHECK(sag(s, 0.6, 0.8) == doctest::Approx(10.0 - std::sqrt(99.0)).epsilon(1e-13));

  Surface<double> cubic = plane(0.0, 5.0);
  cubic.type = SurfaceType::kHybrid;
  cubic.odd_x = {0.001};
  CHECK(sag(cubic, 2.0, 0.0) == doctest::Approx(0.008).epsilon(1e-15));
}

TEST_CASE("conic domain violation names the surface") {
  Surface<double> s = sphere(1.0, 0.0, 5.0);
  s.index = 3;
  try {
    sag(s, 2.0, 0.0);
    FAIL("expected SurfaceDomainError");
  } catch (const SurfaceDomainError& e) {
    CHECK(e.surface() == 3);
  }
}

TEST_CASE("normals") {
  Vec3<double> n = normal(plane(0.0, 5.0), 0.4, -2.0);
  CHECK(n == Vec3<double>(0.0, 0.0, -1.0));

  Surface<double> s = sphere(10.0, 0.0, 5.0);
  n = normal(s, 1.0, 0.0);
  const double slope = 1.0 / (10.0 * std::sqrt(1.0 - 0.01));
  CHECK(slope == doctest::Approx(0.10050).epsilon(1e-4));
  CHECK(std::atan2(n.x(), -n.z()) == doctest::Approx(std::atan(slope)).epsilon(1e-14));
  // Sphere normal points back toward the center of curvature.
  const Vec3<double> p(1.0, 0.0, sag(s, 1.0, 0.0));
  const Vec3<double> to_center = (Vec3<double>(0, 0, 10.0) - p).normalized();
  CHECK((n + to_center).norm() < 1e-14);

  Surface<double> odd = plane(0.0, 5.0);
  odd.odd_x = {0.01, 0.002};
  odd.odd_y = {-0.03};
  CHECK(normal(odd, 1.5, 0.0).x() == doctest::Approx(normal(odd, -1.5, 0.0).x()).epsilon(1e-15));
}

TEST_CASE("symmetries of the sag") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Surface<double> s = sphere(12.0, 0.0, 5.0);
  s.conic = -0.6;
  s.even = {1e-3, -2e-4, 3e-6};
  Surface<double> odd = plane(0.0, 5.0);
  odd.odd_x = {0.01, -0.002, 1e-4};
  odd.odd_y = {0.004};
  for (int i = 0; i < 100; ++i) {
    const double x = u(gen), y = u(gen);
    CHECK(sag(s, x, y) == doctest::Approx(sag(s, y, x)).epsilon(1e-14));
    CHECK(sag(s, x, y) == sag(s, -x, -y));
    CHECK(sag(odd, -x, -y) == -sag(odd, x, y));
    const Vec3<double> n = normal(s, x, y);
    CHECK(std::abs(n.norm() - 1.0) < 1e-12);
  }
}

TEST_CASE("sag gradients match central differences") {
  // Parameters: c, k, a2, a4, odd x3, odd y3, odd x5.
  const double at[] = {0.05, -0.4, 2e-3, -1e-4, 4e-3, -3e-3, 2e-4};
  const double steps[] = {1e-6, 1e-4, 1e-6, 1e-7, 1e-6, 1e-6, 1e-7};
  for (auto [x, y] : {std::pair{1.2, 0.7}, std::pair{-2.0, 0.4}, std::pair{0.3, -1.9}}) {
    auto f = [x = x, y = y](std::span<const DiffScalar> p) {
      Surface<DiffScalar> s;
      s.curvature = p[0];
      s.conic = p[1];
      s.even = {p[2], p[3]};
      s.odd_x = {p[4], p[6]};
      s.odd_y = {p[5]};
      return sag(s, DiffScalar(x), DiffScalar(y));
    };
    CHECK(finite_difference_check(f, at, steps).max_relative_error < 1e-5);
  }
}

TEST_CASE("intersection") {
  Vec3<double> o(0, 0, 0), d(0, 0, 1);
  Surface<double> p = plane(5.0, 3.0);
  Hit<double> hit = intersect(p, p, o, d);
  REQUIRE(hit.ok());
  CHECK(hit.point == Vec3<double>(0, 0, 5));
  CHECK(hit.t == 5.0);

  Surface<double> s = sphere(10.0, 0.0, 5.0);
  hit = intersect(s, s, Vec3<double>(1.0, 0.0, -3.0), d);
  REQUIRE(hit.ok());
  CHECK(hit.point.z() == doctest::Approx(0.0501256).epsilon(1e-6));

  hit = intersect(s, s, Vec3<double>(6.0, 0.0, -3.0), d);
  CHECK(hit.failure == RayFailure::kClipped);

  hit = intersect(p, p, Vec3<double>(0, 0, 6.0), d);
  CHECK(hit.failure == RayFailure::kMiss);
}

TEST_CASE("intersection residual over random rays and shapes") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int hits = 0;
  for (int i = 0; i < 500; ++i) {
    Surface<double> s = sphere(0.0, 2.0 + u(gen), 4.0);
    s.curvature = 0.08 * u(gen);
    s.conic = 2.0 * u(gen);
    s.even = {2e-3 * u(gen), 1e-4 * u(gen)};
    if (i % 2) s.odd_x = {3e-3 * u(gen)}, s.odd_y = {3e-3 * u(gen)};
    const Vec3<double> o(2.0 * u(gen), 2.0 * u(gen), -1.0);
    const Vec3<double> d = Vec3<double>(0.3 * u(gen), 0.3 * u(gen), 1.0).normalized();
    Hit<double> hit = intersect(s, s, o, d);
    if (!hit.ok()) continue;
    ++hits;
    CHECK(hit.t > 0.0);
    const double resid = hit.point.z() - s.z - sag(s, hit.point.x(), hit.point.y());
    CHECK(std::abs(resid) < 1e-9);
    CHECK(std::hypot(hit.point.x(), hit.point.y()) <= s.semi_diameter);
  }
  CHECK(hits > 400);
}
