// Image-quality measures: RMS spot size, field-grid spot reports, geometric
// PSF and MTF, and the chief-ray distortion map.
#pragma once

#include <array>
#include <cstdint>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "lensforge/raytrace.hpp"

namespace lensforge {

/// Raised when every ray of a bundle failed; an empty bundle has no RMS.
class AllRaysFailedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sums over the valid rays of a traced bundle.
template <typename S>
struct BundleStats {
  Vec2<S> centroid = Vec2<S>::Zero();
  S mean_square_radius{0.0};  // about the centroid, mm^2
  S obliquity_sum{0.0};
  int valid = 0;
  int total = 0;

  double failure_fraction() const {
    return total == 0 ? 1.0 : static_cast<double>(total - valid) / total;
  }
};

/// Traces `rays` (fixed launch geometry) and accumulates centroid-referenced
/// second moments of the sensor hits.
template <typename S>
BundleStats<S> trace_bundle(const LensSystem<S>& system, const LensSystem<double>& plain,
                            std::span<const Ray<double>> rays,
                            ApertureProbe* probe = nullptr) {
  BundleStats<S> st;
  st.total = static_cast<int>(rays.size());
  std::vector<Vec2<S>> hits;
  hits.reserve(rays.size());
  for (const auto& r : rays) {
    TracedRay<S> t = trace(system, plain, r.template cast<S>(), probe);
    if (!t.valid()) continue;
    hits.push_back(t.sensor);
    st.obliquity_sum += t.obliquity;
  }
  st.valid = static_cast<int>(hits.size());
  if (hits.empty()) return st;
  S cx(0.0), cy(0.0);
  for (const auto& h : hits) {
    cx += h.x();
    cy += h.y();
  }
  const double inv = 1.0 / static_cast<double>(hits.size());
  cx = cx * inv;
  cy = cy * inv;
  S acc(0.0);
  for (const auto& h : hits) {
    const S dx = h.x() - cx, dy = h.y() - cy;
    acc += dx * dx + dy * dy;
  }
  st.centroid = Vec2<S>(cx, cy);
  st.mean_square_radius = acc * inv;
  return st;
}

/// RMS radius in mm of a traced bundle. Throws AllRaysFailedError when no
/// ray reached the sensor.
template <typename S>
S bundle_rms(const BundleStats<S>& st) {
  if (st.valid == 0) throw AllRaysFailedError("all rays of the bundle failed");
  if (value(st.mean_square_radius) <= 0.0) return S(0.0) * st.mean_square_radius;
  return sqrt(st.mean_square_radius);
}

struct SpotResult {
  double rms_um = 0.0;
  double failure_fraction = 0.0;
  Eigen::Vector2d centroid_mm = Eigen::Vector2d::Zero();
};

/// Centroid-referenced RMS spot of one field at one wavelength.
SpotResult rms_spot(const LensSystem<double>& system, const Field& field,
                    double wavelength, int spp, std::uint64_t seed,
                    PupilPattern pattern = PupilPattern::kGrid);

/// Fraction of rays a field may lose before it is left out of the averages.
inline constexpr double kValidityCutoff = 0.2;

struct FieldSpot {
  double x_mm = 0.0;  // nominal image position
  double y_mm = 0.0;
  double tan_x = 0.0;
  double tan_y = 0.0;
  double rms_um = 0.0;  // mean over wavelengths; NaN if some wavelength fully failed
  double failure_fraction = 0.0;
  bool included = false;
};

struct SpotReport {
  std::vector<FieldSpot> fields;
  int grid = 0;  // fields form a grid x grid layout, row-major in y
  double avg_rms_um = 0.0;
  double min_rms_um = 0.0;
  double max_failure_fraction = 0.0;
  int excluded = 0;

  /// RMS (um) as a grid x grid matrix, row = y index; excluded fields NaN.
  Eigen::MatrixXd rms_grid() const;
};

struct SpotGridOptions {
  int field_count = 256;  // must be a perfect square
  int spp = 64;
  std::uint64_t seed = 0;
  PupilPattern pattern = PupilPattern::kGrid;
  /// Field tangent at the sensor corner. Zero means half-diagonal / EFL.
  double corner_tan = 0.0;
};

/// RMS spot over a uniform grid covering one quadrant of the sensor, from
/// the axis to the corner, averaged over the design wavelengths.
SpotReport spot_grid(const LensSystem<double>& system, const SpotGridOptions& options);

/// CSV with a header row; lengths in mm, spot sizes in um.
void write_spot_csv(std::ostream& out, const SpotReport& report);

/// Bilinear splat of sensor hits onto a kernel grid (row = y, col = x)
/// centered on `center`. Weights are normalized to unit sum over the rays
/// that land on the grid; returns false if none does.
template <typename S>
bool splat_kernel(std::span<const Vec2<S>> hits, const Vec2<double>& center,
                  int size, double pitch_mm, std::vector<S>& weights) {
  weights.assign(static_cast<std::size_t>(size) * size, S(0.0));
  const double half = 0.5 * (size - 1);
  double landed = 0.0;
  // First pass in double to find the landed mass, second to accumulate.
  for (const auto& h : hits) {
    const double u = (value(h.x()) - center.x()) / pitch_mm + half;
    const double v = (value(h.y()) - center.y()) / pitch_mm + half;
    const double fu = std::floor(u), fv = std::floor(v);
    for (int dy = 0; dy < 2; ++dy) {
      for (int dx = 0; dx < 2; ++dx) {
        const int c = static_cast<int>(fu) + dx, r = static_cast<int>(fv) + dy;
        if (c < 0 || r < 0 || c >= size || r >= size) continue;
        const double wx = dx ? u - fu : 1.0 - (u - fu);
        const double wy = dy ? v - fv : 1.0 - (v - fv);
        landed += wx * wy;
      }
    }
  }
  if (!(landed > 0.0)) return false;
  S total(0.0);
  for (const auto& h : hits) {
    const S u = (h.x() - center.x()) * (1.0 / pitch_mm) + half;
    const S v = (h.y() - center.y()) * (1.0 / pitch_mm) + half;
    const double fu = std::floor(value(u)), fv = std::floor(value(v));
    const S au = u - fu, av = v - fv;
    for (int dy = 0; dy < 2; ++dy) {
      for (int dx = 0; dx < 2; ++dx) {
        const int c = static_cast<int>(fu) + dx, r = static_cast<int>(fv) + dy;
        if (c < 0 || r < 0 || c >= size || r >= size) continue;
        const S wx = dx ? au : 1.0 - au;
        const S wy = dy ? av : 1.0 - av;
        const S w = wx * wy;
        auto& cell = weights[static_cast<std::size_t>(r) * size + c];
        cell += w;
        total += w;
      }
    }
  }
  const S inv = 1.0 / total;
  for (auto& w : weights) w = w * inv;
  return true;
}

struct PsfKernel {
  Eigen::MatrixXd weights;  // row = y, col = x
  double pitch_um = 1.0;
  double wavelength = 0.587;
  Field field;
  double depth = 0.0;  // mm, infinite for collimated fields
  Eigen::Vector2d center_mm = Eigen::Vector2d::Zero();
};

/// Geometric PSF centered on the chief-ray hit. Throws AllRaysFailedError if
/// no ray lands on the grid, std::invalid_argument for an even grid or a
/// non-positive pitch.
PsfKernel psf(const LensSystem<double>& system, const Field& field,
              double wavelength, int grid_size, double pitch_um, int spp,
              std::uint64_t seed, PupilPattern pattern = PupilPattern::kRandom);

/// Same, binning given hits (mm) around `center_mm`.
PsfKernel psf_from_hits(std::span<const Vec2<double>> hits, const Vec2<double>& center_mm,
                        int grid_size, double pitch_um);

/// Second central moment (mm^2) of a kernel, radial.
double kernel_second_moment(const PsfKernel& kernel);

enum class MtfAxis : std::uint8_t { kX, kY };

struct MtfCurve {
  std::vector<double> frequency;  // cycles/mm
  std::vector<double> contrast;
};

/// |DFT| of the line-spread function obtained by projecting the kernel onto
/// `axis`, normalized to 1 at zero frequency. `oversample` zero-pads the LSF.
MtfCurve geometric_mtf(const PsfKernel& kernel, MtfAxis axis, int oversample = 1);

void write_mtf_csv(std::ostream& out, const MtfCurve& curve);

class DistortionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Odd polynomial in normalized height rho = h / h_max:
/// real / h_max = sum_k coeffs[k] * rho^(2k+1).
struct DistortionFit {
  std::array<double, 4> coeffs{1.0, 0.0, 0.0, 0.0};
  double h_max = 1.0;
  double efl = 1.0;
  double image_scale = 1.0;  // paraxial image height per unit tangent on the sensor
  double max_residual_mm = 0.0;

  double forward(double ideal_mm) const;
  double slope(double ideal_mm) const;
  /// Ideal height that maps to `real_mm`. Requires a monotone fit.
  double inverse(double real_mm) const;
  /// Largest |real - ideal| / ideal over (0, h_max], in percent.
  double max_distortion_percent() const;
  bool monotone() const;
};

/// Least-squares odd fit of real vs ideal heights (mm).
DistortionFit fit_odd_polynomial(std::span<const double> ideal_mm,
                                 std::span<const double> real_mm, double h_max);

/// Chief-ray heights at `samples` ideal heights s * tan(u), s the paraxial
/// image scale on the sensor (the EFL when the sensor is at focus), evenly spread
/// over [0, h_max] (default: sensor half-diagonal). Throws DistortionError if
/// a chief ray fails or the map is not monotone, std::invalid_argument for
/// fewer than 5 samples.
DistortionFit fit_distortion(const LensSystem<double>& system, int samples,
                             double wavelength, double h_max = 0.0);

}  // namespace lensforge
