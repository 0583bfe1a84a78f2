// Sequential ray tracing: refraction, per-ray failure accounting, pupil and
// field sampling, and first-order (paraxial) properties.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "lensforge/system.hpp"

namespace lensforge {

template <typename Scalar>
struct Ray {
  Vec3<Scalar> origin = Vec3<Scalar>::Zero();
  Vec3<Scalar> direction = Vec3<Scalar>(0.0, 0.0, 1.0);
  double wavelength = 0.587;
  bool valid = true;
  RayFailure failure = RayFailure::kNone;

  void fail(RayFailure f) {
    if (!valid) return;
    valid = false;
    failure = f;
  }

  template <typename To>
  Ray<To> cast() const {
    Ray<To> r;
    for (int i = 0; i < 3; ++i) {
      r.origin[i] = scalar_cast<To>(origin[i]);
      r.direction[i] = scalar_cast<To>(direction[i]);
    }
    r.wavelength = wavelength;
    r.valid = valid;
    r.failure = failure;
    return r;
  }
};

/// Vector Snell refraction of unit `direction` at a unit `normal` (either
/// orientation). Returns false on total internal reflection.
template <typename S>
bool refract(Vec3<S>& direction, Vec3<S> normal, double n1, double n2) {
  S cos_i = -direction.dot(normal);
  if (value(cos_i) < 0.0) {
    normal = -normal;
    cos_i = -cos_i;
  }
  const double eta = n1 / n2;
  const S k = 1.0 - eta * eta * (1.0 - cos_i * cos_i);
  if (!(value(k) >= 0.0)) return false;
  const S coeff = eta * cos_i - sqrt(k);
  direction = eta * direction + coeff * normal;
  return true;
}

/// Ray form of refract(): an invalid ray is left untouched, TIR invalidates.
template <typename S>
void refract(Ray<S>& ray, const Vec3<S>& normal, double n1, double n2) {
  if (!ray.valid) return;
  if (!refract(ray.direction, normal, n1, n2)) {
    ray.fail(RayFailure::kTotalInternalReflection);
  }
}

template <typename Scalar>
struct TracedRay {
  Ray<Scalar> ray;
  Vec2<Scalar> sensor = Vec2<Scalar>::Zero();
  /// Product over refracting surfaces of incident . outgoing direction.
  Scalar obliquity{1.0};
  int failed_surface = -1;

  bool valid() const { return ray.valid; }
};

/// Per-surface maximum hit radius, filled when tracing with auto-sizing.
struct ApertureProbe {
  std::vector<double> max_radius;
};

/// Traces one ray through `system` to the sensor plane. `plain` must hold the
/// values of `system`. Failures are reported in the returned ray, never thrown.
template <typename S>
TracedRay<S> trace(const LensSystem<S>& system, const LensSystem<double>& plain,
                   Ray<S> ray, ApertureProbe* probe = nullptr) {
  TracedRay<S> out;
  if (!ray.valid) {
    out.ray = ray;
    return out;
  }
  const double wl = ray.wavelength;
  double n1 = 1.0;
  for (std::size_t k = 0; k < system.surfaces.size(); ++k) {
    const Surface<S>& s = system.surfaces[k];
    const Surface<double>& sp = plain.surfaces[k];
    Hit<S> hit = intersect(s, sp, ray.origin, ray.direction);
    if (!hit.ok()) {
      ray.fail(hit.failure);
      out.failed_surface = static_cast<int>(k);
      out.ray = ray;
      return out;
    }
    ray.origin = hit.point;
    if (probe != nullptr) {
      const double r = std::hypot(value(hit.point.x()), value(hit.point.y()));
      if (r > probe->max_radius[k]) probe->max_radius[k] = r;
    }
    const double n2 = s.type == SurfaceType::kStop ? n1 : s.material.index(wl);
    if (n2 != n1) {
      S zx, zy;
      if (!try_slope(s, S(hit.point.x()), S(hit.point.y()), zx, zy)) {
        ray.fail(RayFailure::kMiss);
        out.failed_surface = static_cast<int>(k);
        out.ray = ray;
        return out;
      }
      const Vec3<S> n = normal_from_slope(zx, zy);
      const Vec3<S> incoming = ray.direction;
      if (!refract(ray.direction, n, n1, n2)) {
        ray.fail(RayFailure::kTotalInternalReflection);
        out.failed_surface = static_cast<int>(k);
        out.ray = ray;
        return out;
      }
      out.obliquity = out.obliquity * incoming.dot(ray.direction);
    }
    n1 = n2;
  }
  const double dz = value(ray.direction.z());
  const double tz = (value(plain.sensor_z) - value(ray.origin.z())) / dz;
  if (!(dz > 0.0) || !(tz > 0.0)) {
    ray.fail(RayFailure::kMiss);
    out.failed_surface = static_cast<int>(system.surfaces.size());
    out.ray = ray;
    return out;
  }
  const S t = (system.sensor_z - ray.origin.z()) / ray.direction.z();
  out.sensor = Vec2<S>(ray.origin.x() + t * ray.direction.x(),
                       ray.origin.y() + t * ray.direction.y());
  ray.origin = ray.origin + t * ray.direction;
  out.ray = ray;
  return out;
}

template <typename S>
TracedRay<S> trace(const LensSystem<S>& system, const Ray<S>& ray) {
  return trace(system, values_of(system), ray);
}

/// Field point: a direction (tan of the field angle along x and y) for
/// objects at infinity, or the same direction seen from the entrance pupil
/// for an object at a finite depth (mm in front of the first surface).
struct Field {
  double tan_x = 0.0;
  double tan_y = 0.0;
  double depth = std::numeric_limits<double>::infinity();

  bool at_infinity() const { return !std::isfinite(depth); }
};

enum class PupilPattern : std::uint8_t { kGrid, kFibonacci, kRandom };

/// Paraxial entrance pupil: axial position and radius.
struct EntrancePupil {
  double z = 0.0;
  double radius = 0.0;
};

/// First-order solution at one wavelength.
template <typename Scalar>
struct ParaxialResult {
  Scalar efl{0.0};
  Scalar bfd{0.0};
};

class ParaxialError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Paraxial curvature c + 2 * alpha_2 of a surface.
template <typename S>
S paraxial_curvature(const Surface<S>& s) {
  if (s.even.empty()) return s.curvature;
  return s.curvature + 2.0 * s.even[0];
}

/// y-nu trace of a collimated ray of unit height. Throws ParaxialError when
/// the system has no optical power.
template <typename S>
ParaxialResult<S> paraxial_solve(const LensSystem<S>& system, double wavelength) {
  S y(1.0), nu(0.0);
  double n = 1.0;
  const auto& surfaces = system.surfaces;
  for (std::size_t k = 0; k < surfaces.size(); ++k) {
    const auto& s = surfaces[k];
    const double n2 = s.type == SurfaceType::kStop ? n : s.material.index(wavelength);
    if (n2 != n) nu = nu - y * ((n2 - n) * paraxial_curvature(s));
    n = n2;
    if (k + 1 < surfaces.size()) y = y + (surfaces[k + 1].z - s.z) * (nu / n);
  }
  const S u = nu / n;
  if (!(std::abs(value(u)) > 1e-13)) {
    throw ParaxialError("paraxial solve: system has zero optical power");
  }
  ParaxialResult<S> out;
  out.efl = -1.0 / u;
  out.bfd = -y / u;
  return out;
}

/// Paraxial entrance pupil of the stop, imaged back through the surfaces in
/// front of it. Throws std::invalid_argument for a missing or degenerate stop.
EntrancePupil entrance_pupil(const LensSystem<double>& system, double wavelength);

/// Stop height of a collimated axial paraxial ray of unit input height.
double stop_height_ratio(const LensSystem<double>& system, double wavelength);

/// Sets the stop semi-diameter so that the entrance pupil diameter equals
/// focal_length / f_number.
void set_stop_for_fnumber(LensSystem<double>& system, double focal_length,
                          double f_number);

/// Unit-disk sample positions for a pupil pattern. A single sample is always
/// the pupil center.
std::vector<Vec2<double>> pupil_samples(int count, PupilPattern pattern,
                                        std::uint64_t seed);

/// Rays from `field` filling the paraxial entrance pupil, launched in front of
/// the first surface. Deterministic given the seed.
std::vector<Ray<double>> sample_rays(const LensSystem<double>& system,
                                     const Field& field, double wavelength,
                                     int count, PupilPattern pattern,
                                     std::uint64_t seed);

/// Ray aimed through the center of the real stop (2D Newton on the launch
/// position). Falls back to the paraxial aim if the stop cannot be reached.
Ray<double> chief_ray(const LensSystem<double>& system, const Field& field,
                      double wavelength);

/// Sensor-plane height of the paraxial chief ray per unit field tangent. The
/// chief ray of a field does not depend on object depth, so neither does this.
/// With the sensor at focus it equals the EFL.
double paraxial_image_scale(const LensSystem<double>& system, double wavelength);

/// Double-precision generator whose output is identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  double uniform();  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t next();

 private:
  std::uint64_t state_;
};

}  // namespace lensforge
