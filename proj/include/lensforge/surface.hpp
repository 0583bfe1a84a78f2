// Refractive interfaces: rotationally symmetric asphere plus optional odd
// x/y polynomial terms, their sag, slopes, normals and ray intersection.
#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lensforge/diffmath.hpp"
#include "lensforge/material.hpp"

namespace lensforge {

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;

template <typename To>
To scalar_cast(double x) {
  return To(x);
}
template <typename To>
To scalar_cast(const DiffScalar& x) {
  if constexpr (std::is_same_v<To, DiffScalar>) {
    return x;
  } else {
    return To(x.value());
  }
}

enum class SurfaceType : std::uint8_t { kAspheric, kHybrid, kStop };

const char* surface_type_name(SurfaceType type);

enum class RayFailure : std::uint8_t {
  kNone,
  kMiss,
  kClipped,
  kTotalInternalReflection,
  kNewtonDiverged,
};

const char* failure_name(RayFailure f);

/// Thrown when the conic square root has a non-positive argument.
class SurfaceDomainError : public std::domain_error {
 public:
  explicit SurfaceDomainError(int surface)
      : std::domain_error("sag undefined on surface " + std::to_string(surface) +
                          ": conic square-root argument <= 0"),
        surface_(surface) {}
  int surface() const { return surface_; }

 private:
  int surface_;
};

/// One interface. `even[j]` multiplies r^(2j+2); `odd_x[i]` and `odd_y[i]`
/// multiply x^(2i+3) and y^(2i+3), so index 0 is the cubic term.
template <typename Scalar>
struct Surface {
  SurfaceType type = SurfaceType::kAspheric;
  Scalar curvature{0.0};
  Scalar conic{0.0};
  std::vector<Scalar> even;
  std::vector<Scalar> odd_x;
  std::vector<Scalar> odd_y;
  Scalar z{0.0};
  double semi_diameter = 1.0;
  Material material;
  bool is_stop = false;
  int index = -1;

  bool has_odd_terms() const { return !odd_x.empty() || !odd_y.empty(); }

  template <typename To>
  Surface<To> cast() const {
    Surface<To> s;
    s.type = type;
    s.curvature = scalar_cast<To>(curvature);
    s.conic = scalar_cast<To>(conic);
    for (const auto& a : even) s.even.push_back(scalar_cast<To>(a));
    for (const auto& a : odd_x) s.odd_x.push_back(scalar_cast<To>(a));
    for (const auto& a : odd_y) s.odd_y.push_back(scalar_cast<To>(a));
    s.z = scalar_cast<To>(z);
    s.semi_diameter = semi_diameter;
    s.material = material;
    s.is_stop = is_stop;
    s.index = index;
    return s;
  }
};

namespace detail {

/// Even aspheric part as a function of u = r^2. Returns false outside the
/// conic domain.
template <typename S>
bool even_sag(const Surface<S>& s, const S& u, S& z) {
  const S arg = 1.0 - (1.0 + s.conic) * s.curvature * s.curvature * u;
  if (!(value(arg) > 0.0)) return false;
  z = s.curvature * u / (1.0 + sqrt(arg));
  if (!s.even.empty()) {
    S poly(0.0);
    for (std::size_t j = s.even.size(); j-- > 0;) {
      poly = poly * u + s.even[j];
    }
    z += poly * u;
  }
  return true;
}

/// dz/du of the even part.
template <typename S>
bool even_slope(const Surface<S>& s, const S& u, S& dzdu) {
  const S arg = 1.0 - (1.0 + s.conic) * s.curvature * s.curvature * u;
  if (!(value(arg) > 0.0)) return false;
  dzdu = s.curvature / (2.0 * sqrt(arg));
  if (!s.even.empty()) {
    S poly(0.0);
    for (std::size_t j = s.even.size(); j-- > 0;) {
      poly = poly * u + static_cast<double>(j + 1) * s.even[j];
    }
    dzdu += poly;
  }
  return true;
}

template <typename S>
void odd_sag(const std::vector<S>& coeffs, const S& t, S& z) {
  if (coeffs.empty()) return;
  const S t2 = t * t;
  S power = t * t2;
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    if (!is_structural_zero(coeffs[i])) z += coeffs[i] * power;
    if (i + 1 < coeffs.size()) power = power * t2;
  }
}

template <typename S>
void odd_slope(const std::vector<S>& coeffs, const S& t, S& dz) {
  if (coeffs.empty()) return;
  const S t2 = t * t;
  S power = t2;
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    if (!is_structural_zero(coeffs[i])) {
      dz += static_cast<double>(2 * i + 3) * coeffs[i] * power;
    }
    if (i + 1 < coeffs.size()) power = power * t2;
  }
}

}  // namespace detail

/// Sag relative to the vertex plane. Returns false outside the conic domain.
template <typename S>
bool try_sag(const Surface<S>& s, const S& x, const S& y, S& z) {
  const S u = x * x + y * y;
  if (!detail::even_sag(s, u, z)) return false;
  detail::odd_sag(s.odd_x, x, z);
  detail::odd_sag(s.odd_y, y, z);
  return true;
}

/// (dz/dx, dz/dy). Returns false outside the conic domain.
template <typename S>
bool try_slope(const Surface<S>& s, const S& x, const S& y, S& zx, S& zy) {
  const S u = x * x + y * y;
  S dzdu;
  if (!detail::even_slope(s, u, dzdu)) return false;
  const S twice = 2.0 * dzdu;
  zx = twice * x;
  zy = twice * y;
  detail::odd_slope(s.odd_x, x, zx);
  detail::odd_slope(s.odd_y, y, zy);
  return true;
}

template <typename S>
S sag(const Surface<S>& s, const S& x, const S& y) {
  S z(0.0);
  if (!try_sag(s, x, y, z)) throw SurfaceDomainError(s.index);
  return z;
}

/// Radial slope dz/dr of the rotationally symmetric part at radius r.
template <typename S>
S radial_slope(const Surface<S>& s, const S& r) {
  S dzdu;
  if (!detail::even_slope(s, S(r * r), dzdu)) throw SurfaceDomainError(s.index);
  return 2.0 * r * dzdu;
}

/// Unit normal of z - z0 - sag(x, y) = 0, pointing toward -z.
template <typename S>
Vec3<S> normal_from_slope(const S& zx, const S& zy) {
  const S inv = 1.0 / sqrt(1.0 + zx * zx + zy * zy);
  return Vec3<S>(zx * inv, zy * inv, -inv);
}

template <typename S>
Vec3<S> normal(const Surface<S>& s, const S& x, const S& y) {
  S zx, zy;
  if (!try_slope(s, x, y, zx, zy)) throw SurfaceDomainError(s.index);
  return normal_from_slope(zx, zy);
}

template <typename S>
struct Hit {
  Vec3<S> point;
  S t{0.0};
  RayFailure failure = RayFailure::kNone;
  bool ok() const { return failure == RayFailure::kNone; }
};

inline constexpr int kNewtonMaxIterations = 32;

/// Ray-surface intersection. The root is found by Newton iteration in double
/// precision starting from the vertex tangent plane; one extra Newton step is
/// then taken in `S` so that the hit carries the implicit-function derivative
/// with respect to the ray and the surface parameters.
///
/// `plain` must hold the values of `s`; it is passed separately so callers
/// tracing many rays convert the surface once.
template <typename S>
Hit<S> intersect(const Surface<S>& s, const Surface<double>& plain,
                 const Vec3<S>& origin, const Vec3<S>& direction) {
  Hit<S> hit;
  const double ox = value(origin.x()), oy = value(origin.y()), oz = value(origin.z());
  const double dx = value(direction.x()), dy = value(direction.y()),
               dz = value(direction.z());
  const double z0 = value(plain.z);
  if (!(dz > 0.0)) {
    hit.failure = RayFailure::kMiss;
    return hit;
  }
  double t = (z0 - oz) / dz;
  double residual = 0.0, derivative = dz;
  bool converged = false;
  for (int it = 0; it < kNewtonMaxIterations; ++it) {
    const double px = ox + t * dx, py = oy + t * dy, pz = oz + t * dz;
    double zs = 0.0, zx = 0.0, zy = 0.0;
    if (!try_sag(plain, px, py, zs) || !try_slope(plain, px, py, zx, zy)) {
      hit.failure = RayFailure::kMiss;
      return hit;
    }
    residual = pz - z0 - zs;
    derivative = dz - zx * dx - zy * dy;
    if (derivative == 0.0 || !std::isfinite(residual)) break;
    const double step = residual / derivative;
    t -= step;
    if (std::abs(step) <= 1e-15 * (1.0 + std::abs(t))) {
      converged = true;
      break;
    }
  }
  {
    const double px = ox + t * dx, py = oy + t * dy, pz = oz + t * dz;
    double zs = 0.0;
    if (!try_sag(plain, px, py, zs)) {
      hit.failure = RayFailure::kMiss;
      return hit;
    }
    residual = pz - z0 - zs;
  }
  if (!(std::abs(residual) < 1e-10) || (!converged && !(std::abs(residual) < 1e-12))) {
    hit.failure = RayFailure::kNewtonDiverged;
    return hit;
  }
  if (!(t > 0.0)) {
    hit.failure = RayFailure::kMiss;
    return hit;
  }
  // Differentiable refinement: t <- t - F(t) / F'(t). At the root F = 0, so a
  // constant F' already yields the exact first-order sensitivity.
  Vec3<S> p = origin + direction * S(t);
  S zs(0.0);
  if (!try_sag(s, S(p.x()), S(p.y()), zs)) {
    hit.failure = RayFailure::kMiss;
    return hit;
  }
  const S f = p.z() - s.z - zs;
  const S t_s = t - f * (1.0 / derivative);
  hit.t = t_s;
  hit.point = origin + direction * t_s;
  const double hx = value(hit.point.x()), hy = value(hit.point.y());
  if (hx * hx + hy * hy > plain.semi_diameter * plain.semi_diameter) {
    hit.failure = RayFailure::kClipped;
  }
  return hit;
}

}  // namespace lensforge
