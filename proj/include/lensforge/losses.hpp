// Clamped geometric regularizers, the re-weighting mask and the image-space
// loss terms.
#pragma once

#include <algorithm>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "lensforge/image.hpp"
#include "lensforge/metrics.hpp"

namespace lensforge {

struct RegularizerConfig {
  double eps_angle = 0.7;
  double eps_dist_glass = 0.4;  // mm, gap inside an element
  double eps_dist_air = 0.2;    // mm, gap between elements
  double eps_shape = 0.5;
  double w_angle = 0.02;
  double w_dist = 0.02;
  double w_shape = 0.02;
  int radial_samples = 16;
};

/// -min(mean obliquity, eps). Obliquity of a ray is the product over
/// refracting surfaces of incident . outgoing direction.
template <typename S>
S loss_angle(const S& obliquity_sum, int rays, double eps) {
  if (rays <= 0) throw std::invalid_argument("loss_angle: empty bundle");
  return -fmin(obliquity_sum * (1.0 / rays), eps);
}

template <typename S>
S loss_angle(std::span<const TracedRay<S>> traced, double eps) {
  S sum(0.0);
  int n = 0;
  for (const auto& t : traced) {
    if (!t.valid()) continue;
    sum += t.obliquity;
    ++n;
  }
  return loss_angle(sum, n, eps);
}

template <typename S>
struct DistLoss {
  S value{0.0};
  bool self_intersecting = false;
  double min_gap = 0.0;  // smallest sampled separation, mm
};

namespace detail {

/// Radial probe directions: one for rotationally symmetric pairs, four when
/// odd terms break the symmetry.
inline std::vector<std::pair<double, double>> probe_directions(bool odd) {
  if (!odd) return {{1.0, 0.0}};
  return {{1.0, 0.0}, {-1.0, 0.0}, {0.0, 1.0}, {0.0, -1.0}};
}

}  // namespace detail

/// Sum over adjacent surface pairs of -min(min sampled gap, eps_pair), with
/// the gap eps chosen by the medium between the two surfaces. Samples run
/// from the axis to the smaller clear semi-diameter.
template <typename S>
DistLoss<S> loss_dist(const LensSystem<S>& system, const RegularizerConfig& cfg) {
  if (system.surfaces.size() < 2) throw std::invalid_argument("loss_dist: need >= 2 surfaces");
  DistLoss<S> out;
  out.min_gap = std::numeric_limits<double>::infinity();
  const int m = cfg.radial_samples;
  for (std::size_t k = 0; k + 1 < system.surfaces.size(); ++k) {
    const Surface<S>& a = system.surfaces[k];
    const Surface<S>& b = system.surfaces[k + 1];
    const double eps = a.material.is_air() ? cfg.eps_dist_air : cfg.eps_dist_glass;
    const double rmax = std::min(a.semi_diameter, b.semi_diameter);
    bool have = false;
    S worst(0.0);
    for (auto [ux, uy] : detail::probe_directions(a.has_odd_terms() || b.has_odd_terms())) {
      for (int i = 0; i < m; ++i) {
        const double r = m == 1 ? 0.0 : rmax * i / (m - 1);
        const S x(r * ux), y(r * uy);
        S za(0.0), zb(0.0);
        if (!try_sag(a, x, y, za) || !try_sag(b, x, y, zb)) continue;
        const S gap = (b.z + zb) - (a.z + za);
        if (!have || value(gap) < value(worst)) worst = gap;
        have = true;
      }
    }
    if (!have) continue;
    out.min_gap = std::min(out.min_gap, value(worst));
    if (value(worst) < 0.0) out.self_intersecting = true;
    out.value += -fmin(worst, eps);
  }
  return out;
}

/// Sum over non-stop surfaces of max(max sampled |grad z|, eps_shape).
template <typename S>
S loss_shape(const LensSystem<S>& system, const RegularizerConfig& cfg) {
  S total(0.0);
  const int m = cfg.radial_samples;
  for (const auto& s : system.surfaces) {
    if (s.is_stop) continue;
    bool have = false;
    S steepest(0.0);
    for (auto [ux, uy] : detail::probe_directions(s.has_odd_terms())) {
      for (int i = 1; i <= m; ++i) {
        const double r = s.semi_diameter * i / m;
        S zx, zy;
        if (!try_slope(s, S(r * ux), S(r * uy), zx, zy)) continue;
        S mag;
        if (s.has_odd_terms()) {
          mag = sqrt(zx * zx + zy * zy);
        } else {
          mag = value(zx) < 0.0 ? -zx : zx;  // |dz/dr| along +x
        }
        if (!have || value(mag) > value(steepest)) steepest = mag;
        have = true;
      }
    }
    total += have ? fmax(steepest, cfg.eps_shape) : S(cfg.eps_shape);
  }
  return total;
}

struct Clearance {
  double min_gap = 0.0;  // mm, over adjacent pairs and the last surface to the sensor
  int pair = -1;         // index of the front surface of the tightest pair
  bool self_intersecting() const { return min_gap < 0.0; }
};

/// Dense geometric check: `samples` radii per pair along four directions,
/// out to the smaller clear semi-diameter (the sensor takes the last one's).
Clearance min_clearance(const LensSystem<double>& system, int samples = 64);

template <typename S>
struct Regularizers {
  S angle{0.0};
  S dist{0.0};
  S shape{0.0};
  bool self_intersecting = false;
  double min_gap = 0.0;

  S weighted(const RegularizerConfig& cfg) const {
    return cfg.w_angle * angle + cfg.w_dist * dist + cfg.w_shape * shape;
  }
};

/// Re-weighting mask from an RMS grid (any shape): values normalized to
/// [0, 1], bilinearly resized (corner-aligned) to rows x cols, and zeroed where
/// the resized RMS falls below threshold * mean RMS. NaN entries (excluded
/// fields) count as the worst value. Falls back to all ones if every entry
/// would be dropped or the grid is uniform.
Eigen::MatrixXd build_mask(const Eigen::MatrixXd& rms, int rows, int cols,
                           double threshold = 0.8);

/// Mirrors a quadrant grid (axis at (0, 0)) onto the full sensor.
Eigen::MatrixXd mirror_quadrant(const Eigen::MatrixXd& quadrant);

/// Mean over channels and pixels of (mask * (a - b))^2 and its gradient with
/// respect to `a`. An empty mask means all ones. Throws std::invalid_argument
/// on shape mismatch.
double masked_mse(const Image& a, const Image& b, const Eigen::MatrixXd& mask,
                  Image* grad_a = nullptr);

/// Mean squared difference.
double mse(const Image& a, const Image& b, Image* grad_a = nullptr);

/// Masked image term plus the weighted regularizers. All three regularizers
/// are defined so that smaller is better, so they enter with a plus sign.
template <typename S>
S masked_design_loss(const Image& simulated, const Image& reference,
                     const Eigen::MatrixXd& mask, const Regularizers<S>& regs,
                     const RegularizerConfig& cfg, Image* grad_simulated = nullptr) {
  return masked_mse(simulated, reference, mask, grad_simulated) + regs.weighted(cfg);
}

}  // namespace lensforge
