#pragma once

#include <cmath>
#include <cstring>

#include "lensforge/raytrace.hpp"

namespace lensforge::testing {

inline Material glass(double n) { return Material{"n" + std::to_string(n), n, 0.0}; }

inline Surface<double> plane(double z, double sd, Material m = air()) {
  Surface<double> s;
  s.z = z;
  s.semi_diameter = sd;
  s.material = m;
  return s;
}

inline Surface<double> sphere(double radius, double z, double sd, Material m = air()) {
  Surface<double> s = plane(z, sd, m);
  s.curvature = radius == 0.0 ? 0.0 : 1.0 / radius;
  return s;
}

inline Surface<double> stop(double z, double sd) {
  Surface<double> s = plane(z, sd);
  s.type = SurfaceType::kStop;
  s.is_stop = true;
  return s;
}

/// Front stop, then a plano-convex element (curved side first).
inline LensSystem<double> plano_convex(double radius, double n, double thickness,
                                       double stop_sd, double sensor_z) {
  LensSystem<double> sys;
  sys.surfaces.push_back(stop(-1.0, stop_sd));
  sys.surfaces.push_back(sphere(radius, 0.0, 20.0, glass(n)));
  sys.surfaces.push_back(plane(thickness, 20.0));
  sys.sensor_z = sensor_z;
  sys.sensor_diagonal = 4.0;
  sys.wavelengths = {0.587};
  sys.renumber();
  return sys;
}

/// Value with random sign, mantissa and decimal exponent in [lo, hi].
inline double wild(Rng& rng, int lo, int hi) {
  const double m = rng.uniform(1.0, 10.0);
  const int e = lo + static_cast<int>(rng.next() % static_cast<std::uint64_t>(hi - lo + 1));
  return (rng.uniform() < 0.5 ? -m : m) * std::pow(10.0, e);
}

/// Valid system with random surface count, types, coefficients, materials
/// and full-precision values everywhere.
inline LensSystem<double> random_system(std::uint64_t seed) {
  Rng rng(seed);
  LensSystem<double> sys;
  const int n = 2 + static_cast<int>(rng.next() % 6);
  const int stop_at = static_cast<int>(rng.next() % static_cast<std::uint64_t>(n));
  double z = rng.uniform(-5.0, 5.0);
  for (int i = 0; i < n; ++i) {
    Surface<double> s;
    s.z = z;
    s.semi_diameter = rng.uniform(0.1, 30.0);
    if (i == stop_at) {
      s.type = SurfaceType::kStop;
      s.is_stop = true;
    } else {
      s.type = rng.uniform() < 0.3 ? SurfaceType::kHybrid : SurfaceType::kAspheric;
      s.curvature = wild(rng, -6, -1);
      s.conic = rng.uniform() < 0.3 ? 0.0 : wild(rng, -3, 1);
      s.even.resize(rng.next() % 5);
      for (auto& a : s.even) a = wild(rng, -14, -2);
      if (s.type == SurfaceType::kHybrid) {
        s.odd_x.resize(1 + rng.next() % 3);
        s.odd_y.resize(1 + rng.next() % 3);
        for (auto& a : s.odd_x) a = wild(rng, -12, -2);
        for (auto& a : s.odd_y) a = wild(rng, -12, -2);
      }
      if (rng.uniform() < 0.5) {
        s.material = Material{"g" + std::to_string(i), rng.uniform(1.4, 1.9), rng.uniform(0.001, 0.02)};
      }
    }
    sys.surfaces.push_back(s);
    z += rng.uniform(0.01, 10.0);
  }
  sys.sensor_z = z + rng.uniform(0.01, 50.0);
  sys.sensor_diagonal = rng.uniform(0.5, 50.0);
  sys.sensor_width = 1 + static_cast<int>(rng.next() % 4096);
  sys.sensor_height = 1 + static_cast<int>(rng.next() % 4096);
  sys.wavelengths.clear();
  for (std::uint64_t k = 0, m = 1 + rng.next() % 4; k < m; ++k) sys.wavelengths.push_back(rng.uniform(0.4, 0.8));
  sys.renumber();
  return sys;
}

inline bool bits_equal(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

inline bool bits_equal(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!bits_equal(a[i], b[i])) return false;
  }
  return true;
}

/// Field-for-field, bit-for-bit equality.
inline bool identical(const LensSystem<double>& a, const LensSystem<double>& b) {
  if (a.surfaces.size() != b.surfaces.size()) return false;
  for (std::size_t i = 0; i < a.surfaces.size(); ++i) {
    const auto& s = a.surfaces[i];
    const auto& t = b.surfaces[i];
    if (s.type != t.type || s.is_stop != t.is_stop || s.index != t.index || !(s.material == t.material)) return false;
    if (!bits_equal(s.curvature, t.curvature) || !bits_equal(s.conic, t.conic) || !bits_equal(s.z, t.z) ||
        !bits_equal(s.semi_diameter, t.semi_diameter)) {
      return false;
    }
    if (!bits_equal(s.even, t.even) || !bits_equal(s.odd_x, t.odd_x) || !bits_equal(s.odd_y, t.odd_y)) return false;
  }
  return bits_equal(a.sensor_z, b.sensor_z) && bits_equal(a.sensor_diagonal, b.sensor_diagonal) &&
         a.sensor_width == b.sensor_width && a.sensor_height == b.sensor_height &&
         bits_equal(a.wavelengths, b.wavelengths);
}

}  // namespace lensforge::testing
