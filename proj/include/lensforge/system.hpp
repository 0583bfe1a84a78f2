#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "lensforge/surface.hpp"

namespace lensforge {

/// Raised when a LensSystem breaks one of its structural invariants.
class InvariantError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ordered surfaces, aperture stop and sensor plane. All lengths in mm,
/// wavelengths in um.
template <typename Scalar>
struct LensSystem {
  std::vector<Surface<Scalar>> surfaces;
  Scalar sensor_z{0.0};
  double sensor_diagonal = 1.0;
  int sensor_width = 64;
  int sensor_height = 64;
  std::vector<double> wavelengths{0.486, 0.587, 0.656};

  int stop_index() const {
    for (std::size_t i = 0; i < surfaces.size(); ++i) {
      if (surfaces[i].is_stop) return static_cast<int>(i);
    }
    return -1;
  }

  double primary_wavelength() const {
    return wavelengths.empty() ? 0.587 : wavelengths[wavelengths.size() / 2];
  }

  /// Square pixels: pitch follows from the diagonal and the pixel counts.
  double pixel_pitch() const {
    return sensor_diagonal /
           std::hypot(static_cast<double>(sensor_width), static_cast<double>(sensor_height));
  }
  double sensor_half_width() const { return 0.5 * pixel_pitch() * sensor_width; }
  double sensor_half_height() const { return 0.5 * pixel_pitch() * sensor_height; }

  /// Index of refraction in front of surface k.
  double index_before(std::size_t k, double wavelength) const {
    return k == 0 ? 1.0 : surfaces[k - 1].material.index(wavelength);
  }

  template <typename To>
  LensSystem<To> cast() const {
    LensSystem<To> out;
    out.surfaces.reserve(surfaces.size());
    for (const auto& s : surfaces) out.surfaces.push_back(s.template cast<To>());
    out.sensor_z = scalar_cast<To>(sensor_z);
    out.sensor_diagonal = sensor_diagonal;
    out.sensor_width = sensor_width;
    out.sensor_height = sensor_height;
    out.wavelengths = wavelengths;
    return out;
  }

  void renumber() {
    for (std::size_t i = 0; i < surfaces.size(); ++i) surfaces[i].index = static_cast<int>(i);
  }
};

template <typename S>
LensSystem<double> values_of(const LensSystem<S>& system) {
  return system.template cast<double>();
}

/// Throws InvariantError unless positions increase strictly, the sensor lies
/// beyond the last surface, exactly one stop exists, and semi-diameters are
/// positive.
void validate(const LensSystem<double>& system);

}  // namespace lensforge
