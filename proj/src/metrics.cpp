#include "lensforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

#include <Eigen/QR>

namespace lensforge {

SpotResult rms_spot(const LensSystem<double>& system, const Field& field,
                    double wavelength, int spp, std::uint64_t seed,
                    PupilPattern pattern) {
  if (spp < 2) throw std::invalid_argument("rms_spot needs at least 2 rays");
  const auto rays = sample_rays(system, field, wavelength, spp, pattern, seed);
  const auto st = trace_bundle<double>(system, system, rays);
  SpotResult out;
  out.failure_fraction = st.failure_fraction();
  out.rms_um = 1000.0 * bundle_rms(st);
  out.centroid_mm = st.centroid;
  return out;
}

Eigen::MatrixXd SpotReport::rms_grid() const {
  Eigen::MatrixXd m(grid, grid);
  for (int j = 0; j < grid; ++j) {
    for (int i = 0; i < grid; ++i) {
      const FieldSpot& f = fields[static_cast<std::size_t>(j * grid + i)];
      m(j, i) = f.included ? f.rms_um : std::numeric_limits<double>::quiet_NaN();
    }
  }
  return m;
}

namespace {

int square_side(int count) {
  const int g = static_cast<int>(std::lround(std::sqrt(static_cast<double>(count))));
  if (count < 1 || g * g != count) {
    throw std::invalid_argument("field count must be a perfect square, got " +
                                std::to_string(count));
  }
  return g;
}

}  // namespace

SpotReport spot_grid(const LensSystem<double>& system, const SpotGridOptions& options) {
  const int g = square_side(options.field_count);
  const double hw = system.sensor_half_width(), hh = system.sensor_half_height();
  double tan_per_mm;
  if (options.corner_tan > 0.0) {
    tan_per_mm = options.corner_tan / std::hypot(hw, hh);
  } else {
    tan_per_mm = 1.0 / paraxial_solve(system, system.primary_wavelength()).efl;
  }
  SpotReport report;
  report.grid = g;
  double sum = 0.0;
  int included = 0;
  report.min_rms_um = std::numeric_limits<double>::infinity();
  for (int j = 0; j < g; ++j) {
    for (int i = 0; i < g; ++i) {
      FieldSpot f;
      f.x_mm = g == 1 ? 0.0 : hw * i / (g - 1);
      f.y_mm = g == 1 ? 0.0 : hh * j / (g - 1);
      f.tan_x = f.x_mm * tan_per_mm;
      f.tan_y = f.y_mm * tan_per_mm;
      int failed = 0, total = 0;
      double rms = 0.0;
      for (double wl : system.wavelengths) {
        const auto rays = sample_rays(system, Field{f.tan_x, f.tan_y}, wl, options.spp,
                                      options.pattern, options.seed);
        const auto st = trace_bundle<double>(system, system, rays);
        failed += st.total - st.valid;
        total += st.total;
        rms += st.valid > 0 ? 1000.0 * bundle_rms(st)
                            : std::numeric_limits<double>::quiet_NaN();
      }
      f.rms_um = rms / static_cast<double>(system.wavelengths.size());
      f.failure_fraction = static_cast<double>(failed) / total;
      f.included = std::isfinite(f.rms_um) && f.failure_fraction <= kValidityCutoff;
      report.max_failure_fraction = std::max(report.max_failure_fraction, f.failure_fraction);
      if (f.included) {
        sum += f.rms_um;
        ++included;
        report.min_rms_um = std::min(report.min_rms_um, f.rms_um);
      } else {
        ++report.excluded;
      }
      report.fields.push_back(f);
    }
  }
  if (included == 0) {
    report.avg_rms_um = report.min_rms_um = std::numeric_limits<double>::quiet_NaN();
  } else {
    report.avg_rms_um = sum / included;
  }
  return report;
}

void write_spot_csv(std::ostream& out, const SpotReport& report) {
  out << "field_x_mm,field_y_mm,field_tan_x,field_tan_y,rms_um,failure_fraction,included\n";
  out.precision(10);
  for (const auto& f : report.fields) {
    out << f.x_mm << ',' << f.y_mm << ',' << f.tan_x << ',' << f.tan_y << ','
        << f.rms_um << ',' << f.failure_fraction << ',' << (f.included ? 1 : 0) << '\n';
  }
}

PsfKernel psf_from_hits(std::span<const Vec2<double>> hits, const Vec2<double>& center_mm,
                        int grid_size, double pitch_um) {
  if (grid_size < 1 || grid_size % 2 == 0) {
    throw std::invalid_argument("PSF grid size must be odd");
  }
  if (!(pitch_um > 0.0)) throw std::invalid_argument("PSF pitch must be > 0");
  std::vector<double> w;
  if (!splat_kernel<double>(hits, center_mm, grid_size, pitch_um * 1e-3, w)) {
    throw AllRaysFailedError("no ray landed on the PSF grid");
  }
  PsfKernel k;
  k.weights = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                             Eigen::RowMajor>>(w.data(), grid_size,
                                                               grid_size);
  k.pitch_um = pitch_um;
  k.center_mm = center_mm;
  return k;
}

PsfKernel psf(const LensSystem<double>& system, const Field& field, double wavelength,
              int grid_size, double pitch_um, int spp, std::uint64_t seed,
              PupilPattern pattern) {
  const auto rays = sample_rays(system, field, wavelength, spp, pattern, seed);
  std::vector<Vec2<double>> hits;
  for (const auto& r : rays) {
    auto t = trace(system, system, r);
    if (t.valid()) hits.push_back(t.sensor);
  }
  if (hits.empty()) throw AllRaysFailedError("all PSF rays failed");
  Vec2<double> center = Vec2<double>::Zero();
  auto chief = trace(system, system, chief_ray(system, field, wavelength));
  if (chief.valid()) {
    center = chief.sensor;
  } else {
    for (const auto& h : hits) center += h;
    center /= static_cast<double>(hits.size());
  }
  PsfKernel k = psf_from_hits(hits, center, grid_size, pitch_um);
  k.wavelength = wavelength;
  k.field = field;
  k.depth = field.depth;
  return k;
}

double kernel_second_moment(const PsfKernel& kernel) {
  const auto& w = kernel.weights;
  const double half = 0.5 * (w.cols() - 1), p = kernel.pitch_um * 1e-3;
  double sum = 0.0, cx = 0.0, cy = 0.0;
  for (int r = 0; r < w.rows(); ++r) {
    for (int c = 0; c < w.cols(); ++c) {
      sum += w(r, c);
      cx += w(r, c) * (c - half) * p;
      cy += w(r, c) * (r - half) * p;
    }
  }
  cx /= sum;
  cy /= sum;
  double m = 0.0;
  for (int r = 0; r < w.rows(); ++r) {
    for (int c = 0; c < w.cols(); ++c) {
      const double dx = (c - half) * p - cx, dy = (r - half) * p - cy;
      m += w(r, c) * (dx * dx + dy * dy);
    }
  }
  return m / sum;
}

MtfCurve geometric_mtf(const PsfKernel& kernel, MtfAxis axis, int oversample) {
  if (oversample < 1) throw std::invalid_argument("oversample must be >= 1");
  Eigen::VectorXd lsf = axis == MtfAxis::kX ? Eigen::VectorXd(kernel.weights.colwise().sum())
                                            : Eigen::VectorXd(kernel.weights.rowwise().sum());
  const int n = static_cast<int>(lsf.size()) * oversample;
  const double total = lsf.sum();
  const double pitch_mm = kernel.pitch_um * 1e-3;
  MtfCurve curve;
  for (int k = 0; k <= n / 2; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (int i = 0; i < lsf.size(); ++i) {
      const double phase = -2.0 * std::numbers::pi * k * i / n;
      acc += lsf[i] * std::complex<double>(std::cos(phase), std::sin(phase));
    }
    curve.frequency.push_back(k / (n * pitch_mm));
    curve.contrast.push_back(std::abs(acc) / total);
  }
  return curve;
}

void write_mtf_csv(std::ostream& out, const MtfCurve& curve) {
  out << "frequency_cycles_per_mm,contrast\n";
  out.precision(10);
  for (std::size_t i = 0; i < curve.frequency.size(); ++i) {
    out << curve.frequency[i] << ',' << curve.contrast[i] << '\n';
  }
}

namespace {

double poly(const std::array<double, 4>& c, double rho) {
  const double r2 = rho * rho;
  return rho * (c[0] + r2 * (c[1] + r2 * (c[2] + r2 * c[3])));
}

double poly_slope(const std::array<double, 4>& c, double rho) {
  const double r2 = rho * rho;
  return c[0] + r2 * (3.0 * c[1] + r2 * (5.0 * c[2] + r2 * 7.0 * c[3]));
}

}  // namespace

double DistortionFit::forward(double ideal_mm) const {
  return h_max * poly(coeffs, ideal_mm / h_max);
}

double DistortionFit::slope(double ideal_mm) const {
  return poly_slope(coeffs, ideal_mm / h_max);
}

bool DistortionFit::monotone() const {
  for (int i = 0; i <= 256; ++i) {
    if (!(poly_slope(coeffs, i / 256.0) > 0.0)) return false;
  }
  return true;
}

double DistortionFit::inverse(double real_mm) const {
  if (real_mm < 0.0) return -inverse(-real_mm);
  const double target = real_mm / h_max;
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 60 && poly(coeffs, hi) < target; ++i) hi *= 2.0;
  double rho = std::clamp(target / coeffs[0], lo, hi);
  for (int it = 0; it < 100; ++it) {
    const double f = poly(coeffs, rho) - target;
    if (f > 0.0) hi = rho; else lo = rho;
    const double d = poly_slope(coeffs, rho);
    double next = rho - f / d;
    if (!(d > 0.0) || !(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - rho) <= 1e-16 * std::max(1.0, rho)) {
      rho = next;
      break;
    }
    rho = next;
  }
  return rho * h_max;
}

double DistortionFit::max_distortion_percent() const {
  double worst = 0.0;
  for (int i = 1; i <= 256; ++i) {
    const double rho = i / 256.0;
    worst = std::max(worst, std::abs(poly(coeffs, rho) / rho - 1.0));
  }
  return 100.0 * worst;
}

DistortionFit fit_odd_polynomial(std::span<const double> ideal_mm,
                                 std::span<const double> real_mm, double h_max) {
  if (ideal_mm.size() != real_mm.size() || ideal_mm.size() < 4) {
    throw std::invalid_argument("distortion fit needs matching samples (>= 4)");
  }
  const auto n = static_cast<Eigen::Index>(ideal_mm.size());
  Eigen::MatrixXd a(n, 4);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double rho = ideal_mm[static_cast<std::size_t>(i)] / h_max;
    double p = rho;
    for (int k = 0; k < 4; ++k) {
      a(i, k) = p;
      p *= rho * rho;
    }
    b[i] = real_mm[static_cast<std::size_t>(i)] / h_max;
  }
  const Eigen::VectorXd x = a.colPivHouseholderQr().solve(b);
  DistortionFit fit;
  for (int k = 0; k < 4; ++k) fit.coeffs[static_cast<std::size_t>(k)] = x[k];
  fit.h_max = h_max;
  for (Eigen::Index i = 0; i < n; ++i) {
    fit.max_residual_mm =
        std::max(fit.max_residual_mm,
                 std::abs(fit.forward(ideal_mm[static_cast<std::size_t>(i)]) -
                          real_mm[static_cast<std::size_t>(i)]));
  }
  return fit;
}

DistortionFit fit_distortion(const LensSystem<double>& system, int samples,
                             double wavelength, double h_max) {
  if (samples < 5) throw std::invalid_argument("distortion fit needs >= 5 field samples");
  if (h_max <= 0.0) h_max = std::hypot(system.sensor_half_width(), system.sensor_half_height());
  const double efl = paraxial_solve(system, wavelength).efl;
  const double scale = paraxial_image_scale(system, wavelength);
  std::vector<double> ideal, real;
  for (int i = 0; i < samples; ++i) {
    const double h = h_max * i / (samples - 1);
    const Field field{0.0, h / scale};
    auto t = trace(system, system, chief_ray(system, field, wavelength));
    if (!t.valid()) {
      throw DistortionError("chief ray failed at ideal height " + std::to_string(h) + " mm");
    }
    ideal.push_back(h);
    real.push_back(t.sensor.y());
  }
  DistortionFit fit = fit_odd_polynomial(ideal, real, h_max);
  fit.efl = efl;
  fit.image_scale = scale;
  if (!fit.monotone()) throw DistortionError("distortion map is not monotone over the sensor");
  return fit;
}

}  // namespace lensforge
