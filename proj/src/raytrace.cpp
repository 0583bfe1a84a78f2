#include "lensforge/raytrace.hpp"

#include <algorithm>
#include <numbers>

#include <Eigen/LU>
#include <sstream>

namespace lensforge {

const char* surface_type_name(SurfaceType type) {
  switch (type) {
    case SurfaceType::kAspheric: return "aspheric";
    case SurfaceType::kHybrid: return "hybrid";
    case SurfaceType::kStop: return "stop";
  }
  return "unknown";
}

const char* failure_name(RayFailure f) {
  switch (f) {
    case RayFailure::kNone: return "none";
    case RayFailure::kMiss: return "miss";
    case RayFailure::kClipped: return "clipped";
    case RayFailure::kTotalInternalReflection: return "total-internal-reflection";
    case RayFailure::kNewtonDiverged: return "newton-diverged";
  }
  return "unknown";
}

void validate(const LensSystem<double>& system) {
  int stops = 0;
  for (std::size_t k = 0; k < system.surfaces.size(); ++k) {
    const auto& s = system.surfaces[k];
    if (s.is_stop) ++stops;
    if (!(s.semi_diameter > 0.0)) {
      std::ostringstream os;
      os << "surface " << k << ": clear semi-diameter must be > 0";
      throw InvariantError(os.str());
    }
    if (k > 0 && !(s.z > system.surfaces[k - 1].z)) {
      std::ostringstream os;
      os << "surface " << k << ": axial position " << s.z
         << " does not exceed previous " << system.surfaces[k - 1].z;
      throw InvariantError(os.str());
    }
  }
  if (!system.surfaces.empty() && !(system.sensor_z > system.surfaces.back().z)) {
    throw InvariantError("sensor plane must lie beyond the last surface");
  }
  if (stops != 1) {
    throw InvariantError("lens system needs exactly one stop surface, found " +
                         std::to_string(stops));
  }
  if (system.wavelengths.empty()) throw InvariantError("no design wavelengths");
  if (system.sensor_width <= 0 || system.sensor_height <= 0 ||
      !(system.sensor_diagonal > 0.0)) {
    throw InvariantError("sensor geometry must be positive");
  }
}

namespace {

struct ParaxialRay {
  double y;
  double u;
};

// Traces an object-space paraxial ray given at the first vertex up to (but not
// refracting at) surface `last`.
ParaxialRay paraxial_to_surface(const LensSystem<double>& system, ParaxialRay ray,
                                std::size_t last, double wavelength) {
  double n = 1.0;
  double nu = ray.u;
  double y = ray.y;
  for (std::size_t k = 0; k < last; ++k) {
    const auto& s = system.surfaces[k];
    const double n2 = s.type == SurfaceType::kStop ? n : s.material.index(wavelength);
    if (n2 != n) nu -= y * (n2 - n) * paraxial_curvature(s);
    n = n2;
    y += (system.surfaces[k + 1].z - s.z) * nu / n;
  }
  return {y, nu / n};
}

}  // namespace

double stop_height_ratio(const LensSystem<double>& system, double wavelength) {
  const int stop = system.stop_index();
  if (stop < 0) throw std::invalid_argument("system has no aperture stop");
  return paraxial_to_surface(system, {1.0, 0.0}, static_cast<std::size_t>(stop),
                             wavelength)
      .y;
}

EntrancePupil entrance_pupil(const LensSystem<double>& system, double wavelength) {
  const int stop = system.stop_index();
  if (stop < 0) throw std::invalid_argument("system has no aperture stop");
  const double sd = system.surfaces[static_cast<std::size_t>(stop)].semi_diameter;
  if (!(sd > 0.0)) throw std::invalid_argument("degenerate pupil: stop diameter <= 0");
  const auto s = static_cast<std::size_t>(stop);
  const double a = paraxial_to_surface(system, {1.0, 0.0}, s, wavelength).y;
  const double b = paraxial_to_surface(system, {0.0, 1.0}, s, wavelength).y;
  if (!(std::abs(a) > 1e-12)) {
    throw std::invalid_argument("degenerate pupil: stop is not imaged into object space");
  }
  EntrancePupil ep;
  ep.z = system.surfaces.front().z + b / a;
  ep.radius = sd / std::abs(a);
  return ep;
}

void set_stop_for_fnumber(LensSystem<double>& system, double focal_length,
                          double f_number) {
  const int stop = system.stop_index();
  if (stop < 0) throw std::invalid_argument("system has no aperture stop");
  const double ratio = stop_height_ratio(system, system.primary_wavelength());
  system.surfaces[static_cast<std::size_t>(stop)].semi_diameter =
      std::abs(ratio) * focal_length / (2.0 * f_number);
}

double paraxial_image_scale(const LensSystem<double>& system, double wavelength) {
  const EntrancePupil ep = entrance_pupil(system, wavelength);
  const double z0 = system.surfaces.front().z;
  ParaxialRay ray{z0 - ep.z, 1.0};
  const std::size_t n = system.surfaces.size();
  ParaxialRay at_last = paraxial_to_surface(system, ray, n - 1, wavelength);
  // Refract at the last surface, then transfer to the sensor.
  const auto& last = system.surfaces.back();
  const double n1 = system.index_before(n - 1, wavelength);
  const double n2 = last.type == SurfaceType::kStop ? n1 : last.material.index(wavelength);
  double nu = n1 * at_last.u;
  if (n2 != n1) nu -= at_last.y * (n2 - n1) * paraxial_curvature(last);
  return at_last.y + (system.sensor_z - last.z) * nu / n2;
}

Rng::Rng(std::uint64_t seed) : state_(seed) {}

std::uint64_t Rng::next() {
  // splitmix64
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

namespace {

// Shirley-Chiu concentric map from [-1, 1]^2 to the unit disk.
Vec2<double> concentric(double a, double b) {
  if (a == 0.0 && b == 0.0) return {0.0, 0.0};
  const double pi4 = std::numbers::pi / 4.0;
  double r, phi;
  if (std::abs(a) > std::abs(b)) {
    r = a;
    phi = pi4 * (b / a);
  } else {
    r = b;
    phi = 2.0 * pi4 - pi4 * (a / b);
  }
  return {r * std::cos(phi), r * std::sin(phi)};
}

}  // namespace

std::vector<Vec2<double>> pupil_samples(int count, PupilPattern pattern,
                                        std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("pupil samples must be >= 1");
  std::vector<Vec2<double>> out;
  if (count == 1) {
    out.emplace_back(0.0, 0.0);
    return out;
  }
  switch (pattern) {
    case PupilPattern::kGrid: {
      const int k = std::max(1, static_cast<int>(std::floor(std::sqrt(count + 0.5))));
      for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
          const double a = -1.0 + (2.0 * j + 1.0) / k;
          const double b = -1.0 + (2.0 * i + 1.0) / k;
          out.push_back(concentric(a, b));
        }
      }
      break;
    }
    case PupilPattern::kFibonacci: {
      const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
      for (int i = 0; i < count; ++i) {
        const double r = std::sqrt((i + 0.5) / count);
        const double phi = golden * i;
        out.emplace_back(r * std::cos(phi), r * std::sin(phi));
      }
      break;
    }
    case PupilPattern::kRandom: {
      Rng rng(seed);
      for (int i = 0; i < count; ++i) {
        const double a = rng.uniform(-1.0, 1.0);
        const double b = rng.uniform(-1.0, 1.0);
        out.push_back(concentric(a, b));
      }
      break;
    }
  }
  return out;
}

namespace {

Ray<double> launch(const LensSystem<double>& system, const EntrancePupil& ep,
                   const Field& field, double wavelength, double px, double py) {
  const double z_first = system.surfaces.front().z;
  Ray<double> ray;
  ray.wavelength = wavelength;
  const Vec3<double> pupil_point(px, py, ep.z);
  if (field.at_infinity()) {
    const Vec3<double> dir(field.tan_x, field.tan_y, 1.0);
    const double z_start = std::min(z_first, ep.z) - 1.0;
    ray.origin = pupil_point + (z_start - ep.z) * dir;
    ray.direction = dir.normalized();
  } else {
    const double z_obj = z_first - field.depth;
    const double len = ep.z - z_obj;
    const Vec3<double> object(-field.tan_x * len, -field.tan_y * len, z_obj);
    ray.origin = object;
    ray.direction = (pupil_point - object).normalized();
  }
  return ray;
}

// Position of a ray where it meets surface `stop` (no clipping), if reachable.
bool hit_on_surface(const LensSystem<double>& system, Ray<double> ray,
                    std::size_t stop, Vec2<double>& at) {
  LensSystem<double> front;
  front.surfaces.assign(system.surfaces.begin(),
                        system.surfaces.begin() + static_cast<std::ptrdiff_t>(stop) + 1);
  for (auto& s : front.surfaces) s.semi_diameter = 1e9;
  front.sensor_z = front.surfaces.back().z + 1.0;
  double n1 = 1.0;
  for (std::size_t k = 0; k <= stop; ++k) {
    const auto& s = front.surfaces[k];
    Hit<double> hit = intersect(s, s, ray.origin, ray.direction);
    if (!hit.ok()) return false;
    ray.origin = hit.point;
    if (k == stop) {
      at = Vec2<double>(hit.point.x(), hit.point.y());
      return true;
    }
    const double n2 = s.type == SurfaceType::kStop ? n1 : s.material.index(ray.wavelength);
    if (n2 != n1) {
      Vec3<double> n = normal(s, hit.point.x(), hit.point.y());
      if (!refract(ray.direction, n, n1, n2)) return false;
    }
    n1 = n2;
  }
  return false;
}

}  // namespace

std::vector<Ray<double>> sample_rays(const LensSystem<double>& system,
                                     const Field& field, double wavelength,
                                     int count, PupilPattern pattern,
                                     std::uint64_t seed) {
  if (system.surfaces.empty()) throw std::invalid_argument("sample_rays: empty system");
  const EntrancePupil ep = entrance_pupil(system, wavelength);
  std::vector<Ray<double>> rays;
  rays.reserve(static_cast<std::size_t>(count));
  for (const auto& p : pupil_samples(count, pattern, seed)) {
    rays.push_back(launch(system, ep, field, wavelength, ep.radius * p.x(),
                          ep.radius * p.y()));
  }
  return rays;
}

Ray<double> chief_ray(const LensSystem<double>& system, const Field& field,
                      double wavelength) {
  const EntrancePupil ep = entrance_pupil(system, wavelength);
  const int stop = system.stop_index();
  Ray<double> best = launch(system, ep, field, wavelength, 0.0, 0.0);
  if (stop <= 0 && system.surfaces.front().type == SurfaceType::kStop) return best;
  const auto s = static_cast<std::size_t>(stop);
  double ex = 0.0, ey = 0.0;
  const double h = 1e-6 * std::max(ep.radius, 1e-3);
  for (int it = 0; it < 20; ++it) {
    Vec2<double> p0, px, py;
    if (!hit_on_surface(system, launch(system, ep, field, wavelength, ex, ey), s, p0) ||
        !hit_on_surface(system, launch(system, ep, field, wavelength, ex + h, ey), s, px) ||
        !hit_on_surface(system, launch(system, ep, field, wavelength, ex, ey + h), s, py)) {
      break;
    }
    if (p0.norm() < 1e-12) break;
    Eigen::Matrix2d jac;
    jac.col(0) = (px - p0) / h;
    jac.col(1) = (py - p0) / h;
    const Vec2<double> step = jac.fullPivLu().solve(p0);
    if (!step.allFinite()) break;
    ex -= step.x();
    ey -= step.y();
    best = launch(system, ep, field, wavelength, ex, ey);
    if (step.norm() < 1e-13) break;
  }
  return best;
}

}  // namespace lensforge
