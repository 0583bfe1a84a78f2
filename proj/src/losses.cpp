#include "lensforge/losses.hpp"

#include <cmath>
#include <limits>

namespace lensforge {

namespace {

Eigen::MatrixXd resize_bilinear(const Eigen::MatrixXd& in, int rows, int cols) {
  Eigen::MatrixXd out(rows, cols);
  const auto ir = in.rows(), ic = in.cols();
  for (int r = 0; r < rows; ++r) {
    const double y = rows == 1 ? 0.0 : static_cast<double>(r) * (ir - 1) / (rows - 1);
    const auto y0 = std::min<Eigen::Index>(static_cast<Eigen::Index>(y), ir - 1);
    const auto y1 = std::min<Eigen::Index>(y0 + 1, ir - 1);
    const double fy = y - y0;
    for (int c = 0; c < cols; ++c) {
      const double x = cols == 1 ? 0.0 : static_cast<double>(c) * (ic - 1) / (cols - 1);
      const auto x0 = std::min<Eigen::Index>(static_cast<Eigen::Index>(x), ic - 1);
      const auto x1 = std::min<Eigen::Index>(x0 + 1, ic - 1);
      const double fx = x - x0;
      out(r, c) = (1 - fy) * ((1 - fx) * in(y0, x0) + fx * in(y0, x1)) +
                  fy * ((1 - fx) * in(y1, x0) + fx * in(y1, x1));
    }
  }
  return out;
}

}  // namespace

Eigen::MatrixXd build_mask(const Eigen::MatrixXd& rms, int rows, int cols,
                           double threshold) {
  if (rms.size() == 0 || rows < 1 || cols < 1) {
    throw std::invalid_argument("build_mask: empty grid or target size");
  }
  double hi = -std::numeric_limits<double>::infinity();
  double lo = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < rms.size(); ++i) {
    const double v = rms.data()[i];
    if (!std::isfinite(v)) continue;
    hi = std::max(hi, v);
    lo = std::min(lo, v);
  }
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(rows, cols);
  if (!std::isfinite(hi) || !(hi - lo > 1e-12 * std::max(1.0, std::abs(hi)))) return ones;
  Eigen::MatrixXd v = rms.unaryExpr([hi](double x) { return std::isfinite(x) ? x : hi; });
  const double mean = v.mean();
  const Eigen::MatrixXd normalized = (v.array() - lo) / (hi - lo);
  const Eigen::MatrixXd nr = resize_bilinear(normalized, rows, cols);
  const Eigen::MatrixXd vr = resize_bilinear(v, rows, cols);
  Eigen::MatrixXd mask(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      mask(r, c) = vr(r, c) < threshold * mean ? 0.0 : std::clamp(nr(r, c), 0.0, 1.0);
    }
  }
  if (!(mask.maxCoeff() > 0.0)) return ones;
  return mask;
}

Clearance min_clearance(const LensSystem<double>& system, int samples) {
  Clearance out;
  out.min_gap = std::numeric_limits<double>::infinity();
  const auto& ss = system.surfaces;
  for (std::size_t k = 0; k < ss.size(); ++k) {
    const bool sensor = k + 1 == ss.size();
    const double rmax = sensor ? ss[k].semi_diameter
                               : std::min(ss[k].semi_diameter, ss[k + 1].semi_diameter);
    for (auto [ux, uy] : detail::probe_directions(true)) {
      for (int i = 0; i < samples; ++i) {
        const double r = samples == 1 ? 0.0 : rmax * i / (samples - 1);
        double za = 0.0, zb = 0.0;
        if (!try_sag(ss[k], r * ux, r * uy, za)) continue;
        if (!sensor && !try_sag(ss[k + 1], r * ux, r * uy, zb)) continue;
        const double gap = (sensor ? system.sensor_z : ss[k + 1].z + zb) - (ss[k].z + za);
        if (gap < out.min_gap) {
          out.min_gap = gap;
          out.pair = static_cast<int>(k);
        }
      }
    }
  }
  return out;
}

Eigen::MatrixXd mirror_quadrant(const Eigen::MatrixXd& q) {
  const auto g = q.rows(), h = q.cols();
  Eigen::MatrixXd full(2 * g - 1, 2 * h - 1);
  for (Eigen::Index i = 0; i < full.rows(); ++i) {
    for (Eigen::Index j = 0; j < full.cols(); ++j) {
      full(i, j) = q(std::abs(i - (g - 1)), std::abs(j - (h - 1)));
    }
  }
  return full;
}

double masked_mse(const Image& a, const Image& b, const Eigen::MatrixXd& mask, Image* grad_a) {
  if (!a.same_shape(b)) throw std::invalid_argument("image shapes differ");
  const bool masked = mask.size() != 0;
  if (masked && (mask.rows() != a.rows() || mask.cols() != a.cols())) {
    throw std::invalid_argument("mask shape differs from image shape");
  }
  const double n = static_cast<double>(a.channel_count()) * a.rows() * a.cols();
  if (grad_a) *grad_a = Image(a.channel_count(), a.rows(), a.cols());
  double sum = 0.0;
  for (int ch = 0; ch < a.channel_count(); ++ch) {
    for (int r = 0; r < a.rows(); ++r) {
      for (int c = 0; c < a.cols(); ++c) {
        const double m = masked ? mask(r, c) : 1.0;
        const double d = a.channels[static_cast<std::size_t>(ch)](r, c) -
                         b.channels[static_cast<std::size_t>(ch)](r, c);
        sum += m * m * d * d;
        if (grad_a) grad_a->channels[static_cast<std::size_t>(ch)](r, c) = 2.0 * m * m * d / n;
      }
    }
  }
  return sum / n;
}

double mse(const Image& a, const Image& b, Image* grad_a) {
  return masked_mse(a, b, Eigen::MatrixXd(), grad_a);
}

}  // namespace lensforge
