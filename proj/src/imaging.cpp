#include "lensforge/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

#include <unsupported/Eigen/FFT>

#include "lensforge/losses.hpp"

namespace lensforge {

namespace {

using Complex = std::complex<double>;
using CMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

int reflect101(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n - 2;
  i %= period;
  if (i < 0) i += period;
  return i >= n ? period - i : i;
}

/// Bilinear site interpolation along one image axis.
struct SiteAxis {
  std::vector<int> lo;
  std::vector<double> frac;

  SiteAxis(int pixels, int grid) : lo(static_cast<std::size_t>(pixels)), frac(lo.size()) {
    for (int p = 0; p < pixels; ++p) {
      const double g = (p + 0.5) / pixels * (grid - 1);
      const int i = std::min(static_cast<int>(std::floor(g)), grid - 2);
      lo[static_cast<std::size_t>(p)] = i;
      frac[static_cast<std::size_t>(p)] = g - i;
    }
  }
};

/// The (site, weight) pairs of one pixel.
struct SiteBlend {
  int site[4];
  double weight[4];
};

SiteBlend blend_at(const SiteAxis& ax, const SiteAxis& ay, int grid, int r, int c) {
  const auto rr = static_cast<std::size_t>(r), cc = static_cast<std::size_t>(c);
  const int x0 = ax.lo[cc], y0 = ay.lo[rr];
  const double fx = ax.frac[cc], fy = ay.frac[rr];
  SiteBlend b{};
  b.site[0] = y0 * grid + x0;
  b.site[1] = y0 * grid + x0 + 1;
  b.site[2] = (y0 + 1) * grid + x0;
  b.site[3] = (y0 + 1) * grid + x0 + 1;
  b.weight[0] = (1.0 - fy) * (1.0 - fx);
  b.weight[1] = (1.0 - fy) * fx;
  b.weight[2] = fy * (1.0 - fx);
  b.weight[3] = fy * fx;
  return b;
}

Plane pad_reflect(const Plane& p, int pad) {
  const int h = static_cast<int>(p.rows()), w = static_cast<int>(p.cols());
  Plane out(h + 2 * pad, w + 2 * pad);
  for (int r = 0; r < out.rows(); ++r) {
    const int sr = reflect101(r - pad, h);
    for (int c = 0; c < out.cols(); ++c) out(r, c) = p(sr, reflect101(c - pad, w));
  }
  return out;
}

void check_kernels(const Image& img, const PsfGrid& k) {
  if (img.channel_count() != k.wavelengths) {
    throw std::invalid_argument("image has " + std::to_string(img.channel_count()) +
                                " channels, PSF grid has " + std::to_string(k.wavelengths) +
                                " wavelengths");
  }
  if (k.grid < 2 || k.kernel % 2 == 0) throw std::invalid_argument("malformed PSF grid");
}

int fast_size(int n) {
  for (int m = n;; ++m) {
    int v = m;
    for (int f : {2, 3, 5}) {
      while (v % f == 0) v /= f;
    }
    if (v == 1) return m;
  }
}

void fft2(CMatrix& m, bool inverse) {
  static thread_local Eigen::FFT<double> fft;
  std::vector<Complex> in, out;
  in.resize(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) in[static_cast<std::size_t>(c)] = m(r, c);
    inverse ? fft.inv(out, in) : fft.fwd(out, in);
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = out[static_cast<std::size_t>(c)];
  }
  in.resize(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) in[static_cast<std::size_t>(r)] = m(r, c);
    inverse ? fft.inv(out, in) : fft.fwd(out, in);
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = out[static_cast<std::size_t>(r)];
  }
}

/// Circular-convolution embedding of a centered kernel into an nr x nc grid.
CMatrix kernel_spectrum(const std::vector<double>& taps, int k, int nr, int nc) {
  CMatrix m = CMatrix::Zero(nr, nc);
  const int h = k / 2;
  for (int ty = 0; ty < k; ++ty) {
    for (int tx = 0; tx < k; ++tx) {
      const int r = ((ty - h) % nr + nr) % nr, c = ((tx - h) % nc + nc) % nc;
      m(r, c) += taps[static_cast<std::size_t>(ty * k + tx)];
    }
  }
  fft2(m, false);
  return m;
}

/// Shared geometry of the Wiener passes.
struct WienerFrame {
  int rows, cols, pad, nr, nc;

  WienerFrame(int h, int w, int k)
      : rows(h), cols(w), pad(k), nr(fast_size(h + 2 * k)), nc(fast_size(w + 2 * k)) {}

  CMatrix padded(const Plane& p) const {
    CMatrix m(nr, nc);
    for (int r = 0; r < nr; ++r) {
      const int sr = reflect101(r - pad, rows);
      for (int c = 0; c < nc; ++c) m(r, c) = p(sr, reflect101(c - pad, cols));
    }
    return m;
  }

  /// Transpose of padded(): folds every padded sample back onto its source.
  Plane fold(const CMatrix& m) const {
    Plane p = Plane::Zero(rows, cols);
    for (int r = 0; r < nr; ++r) {
      const int sr = reflect101(r - pad, rows);
      for (int c = 0; c < nc; ++c) p(sr, reflect101(c - pad, cols)) += m(r, c).real();
    }
    return p;
  }
};

CMatrix wiener_filter(const CMatrix& h, double nsr) {
  CMatrix w(h.rows(), h.cols());
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    const Complex v = h.data()[i];
    w.data()[i] = std::conj(v) / (std::norm(v) + nsr);
  }
  return w;
}

}  // namespace

Vec2<double> site_position(const LensSystem<double>& system, int grid, int site) {
  const double hw = system.sensor_half_width(), hh = system.sensor_half_height();
  const int i = site % grid, j = site / grid;
  return {-hw + 2.0 * hw * i / (grid - 1), -hh + 2.0 * hh * j / (grid - 1)};
}

double resolve_scale(const LensSystem<double>& system, const PsfGridSpec& spec) {
  if (spec.scale != 0.0) return spec.scale;
  return paraxial_image_scale(system, system.primary_wavelength());
}

std::vector<Ray<double>> site_rays(const LensSystem<double>& system, const PsfGridSpec& spec,
                                   double scale, int site, int w) {
  const Vec2<double> pos = site_position(system, spec.grid, site);
  Field f;
  f.tan_x = pos.x() / scale;
  f.tan_y = pos.y() / scale;
  f.depth = spec.depth;
  return sample_rays(system, f, system.wavelengths[static_cast<std::size_t>(w)], spec.spp,
                     spec.pattern, spec.seed);
}

PsfGrid build_psf_grid(const LensSystem<double>& system, const PsfGridSpec& spec) {
  return build_kernels<double>(system, system, spec);
}

Image simulate(const Image& object, const PsfGrid& kernels) {
  check_kernels(object, kernels);
  const int h = object.rows(), w = object.cols(), k = kernels.kernel, half = k / 2;
  const SiteAxis ax(w, kernels.grid), ay(h, kernels.grid);
  Image out(object.channel_count(), h, w);
  out.depth = object.depth;
  for (int ch = 0; ch < object.channel_count(); ++ch) {
    const Plane src = pad_reflect(object.channels[static_cast<std::size_t>(ch)], half);
    Plane& dst = out.channels[static_cast<std::size_t>(ch)];
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const SiteBlend b = blend_at(ax, ay, kernels.grid, r, c);
        double acc = 0.0;
        for (int q = 0; q < 4; ++q) {
          if (b.weight[q] == 0.0) continue;
          const double* taps = kernels.at(b.site[q], ch).data();
          double s = 0.0;
          // I(p - d) with d = t - half lives at padded (r + 2 half - ty, ...).
          for (int ty = 0; ty < k; ++ty) {
            const double* row = &src(r + 2 * half - ty, 0);
            for (int tx = 0; tx < k; ++tx) s += taps[ty * k + tx] * row[c + 2 * half - tx];
          }
          acc += b.weight[q] * s;
        }
        dst(r, c) = acc;
      }
    }
  }
  return out;
}

Image simulate(const LensSystem<double>& system, const Image& object, const PsfGridSpec& spec) {
  if (object.rows() != system.sensor_height || object.cols() != system.sensor_width) {
    throw std::invalid_argument("object resolution does not match the sensor");
  }
  Image out = simulate(object, build_psf_grid(system, spec));
  out.depth = spec.depth;
  return out;
}

std::vector<int> sites_touching(int rows, int cols, int grid, int row0, int row1, int col0,
                                int col1) {
  const SiteAxis ax(cols, grid), ay(rows, grid);
  std::vector<char> hit(static_cast<std::size_t>(grid * grid), 0);
  for (int r = row0; r < row1; ++r) {
    for (int c = col0; c < col1; ++c) {
      const SiteBlend b = blend_at(ax, ay, grid, r, c);
      for (int q = 0; q < 4; ++q) {
        if (b.weight[q] != 0.0) hit[static_cast<std::size_t>(b.site[q])] = 1;
      }
    }
  }
  std::vector<int> out;
  for (int s = 0; s < grid * grid; ++s) {
    if (hit[static_cast<std::size_t>(s)]) out.push_back(s);
  }
  return out;
}

PsfGrid simulate_kernel_vjp(const Image& object, const PsfGrid& shape, const Image& out_adjoint) {
  check_kernels(object, shape);
  if (!object.same_shape(out_adjoint)) throw std::invalid_argument("adjoint shape mismatch");
  const int h = object.rows(), w = object.cols(), k = shape.kernel, half = k / 2;
  const SiteAxis ax(w, shape.grid), ay(h, shape.grid);
  PsfGrid grad;
  grad.resize(shape.grid, k, shape.wavelengths);
  for (int ch = 0; ch < object.channel_count(); ++ch) {
    const Plane src = pad_reflect(object.channels[static_cast<std::size_t>(ch)], half);
    const Plane& adj = out_adjoint.channels[static_cast<std::size_t>(ch)];
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const double g = adj(r, c);
        if (g == 0.0) continue;
        const SiteBlend b = blend_at(ax, ay, shape.grid, r, c);
        for (int q = 0; q < 4; ++q) {
          if (b.weight[q] == 0.0) continue;
          double* taps = grad.at(b.site[q], ch).data();
          const double s = b.weight[q] * g;
          for (int ty = 0; ty < k; ++ty) {
            const double* row = &src(r + 2 * half - ty, 0);
            for (int tx = 0; tx < k; ++tx) taps[ty * k + tx] += s * row[c + 2 * half - tx];
          }
        }
      }
    }
  }
  return grad;
}

std::vector<DiffScalar> simulate_recorded(const Image& object, const KernelSet<DiffScalar>& kernels,
                                          int row0, int row1, int col0, int col1) {
  if (object.channel_count() != kernels.wavelengths) {
    throw std::invalid_argument("image channels do not match the PSF grid");
  }
  const int h = object.rows(), w = object.cols(), k = kernels.kernel, half = k / 2;
  if (row0 < 0 || col0 < 0 || row1 > h || col1 > w || row0 > row1 || col0 > col1) {
    throw std::invalid_argument("patch outside the image");
  }
  const SiteAxis ax(w, kernels.grid), ay(h, kernels.grid);
  GradientTape* tape = GradientTape::active();
  std::vector<DiffScalar> out;
  out.reserve(static_cast<std::size_t>(object.channel_count() * (row1 - row0) * (col1 - col0)));
  std::vector<DiffScalar> inputs;
  std::vector<double> partials;
  for (int ch = 0; ch < object.channel_count(); ++ch) {
    const Plane src = pad_reflect(object.channels[static_cast<std::size_t>(ch)], half);
    for (int r = row0; r < row1; ++r) {
      for (int c = col0; c < col1; ++c) {
        const SiteBlend b = blend_at(ax, ay, kernels.grid, r, c);
        inputs.clear();
        partials.clear();
        double acc = 0.0;
        for (int q = 0; q < 4; ++q) {
          if (b.weight[q] == 0.0) continue;
          const auto& taps = kernels.at(b.site[q], ch);
          for (int ty = 0; ty < k; ++ty) {
            for (int tx = 0; tx < k; ++tx) {
              const DiffScalar& t = taps[static_cast<std::size_t>(ty * k + tx)];
              const double p = b.weight[q] * src(r + 2 * half - ty, c + 2 * half - tx);
              acc += p * t.value();
              if (t.is_constant() || p == 0.0) continue;
              inputs.push_back(t);
              partials.push_back(p);
            }
          }
        }
        out.push_back(tape != nullptr && !inputs.empty()
                          ? tape->record(OpKind::kCustom, inputs, acc, partials)
                          : DiffScalar(acc));
      }
    }
  }
  return out;
}

Image wiener_reconstruct(const Image& raw, const PsfGrid& kernels, double nsr) {
  check_kernels(raw, kernels);
  if (!(nsr > 0.0)) throw std::invalid_argument("noise-to-signal ratio must be positive");
  const int h = raw.rows(), w = raw.cols();
  const WienerFrame fr(h, w, kernels.kernel);
  const SiteAxis ax(w, kernels.grid), ay(h, kernels.grid);
  Image out(raw.channel_count(), h, w);
  out.depth = raw.depth;
  for (int ch = 0; ch < raw.channel_count(); ++ch) {
    CMatrix y = fr.padded(raw.channels[static_cast<std::size_t>(ch)]);
    fft2(y, false);
    Plane& dst = out.channels[static_cast<std::size_t>(ch)];
    for (int s = 0; s < kernels.sites(); ++s) {
      const CMatrix wf = wiener_filter(
          kernel_spectrum(kernels.at(s, ch), kernels.kernel, fr.nr, fr.nc), nsr);
      CMatrix x = wf.cwiseProduct(y);
      fft2(x, true);
      for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
          const SiteBlend b = blend_at(ax, ay, kernels.grid, r, c);
          for (int q = 0; q < 4; ++q) {
            if (b.site[q] == s) dst(r, c) += b.weight[q] * x(r + fr.pad, c + fr.pad).real();
          }
        }
      }
    }
  }
  return out;
}

void wiener_vjp(const Image& raw, const PsfGrid& kernels, double nsr, const Image& out_adjoint,
                Image* raw_adjoint, PsfGrid* kernel_adjoint) {
  check_kernels(raw, kernels);
  if (!raw.same_shape(out_adjoint)) throw std::invalid_argument("adjoint shape mismatch");
  if (!(nsr > 0.0)) throw std::invalid_argument("noise-to-signal ratio must be positive");
  const int h = raw.rows(), w = raw.cols(), k = kernels.kernel, half = k / 2;
  const WienerFrame fr(h, w, k);
  const SiteAxis ax(w, kernels.grid), ay(h, kernels.grid);
  const double inv_n = 1.0 / (static_cast<double>(fr.nr) * fr.nc);
  if (raw_adjoint != nullptr) *raw_adjoint = Image(raw.channel_count(), h, w);
  if (kernel_adjoint != nullptr) kernel_adjoint->resize(kernels.grid, k, kernels.wavelengths);
  for (int ch = 0; ch < raw.channel_count(); ++ch) {
    CMatrix y = fr.padded(raw.channels[static_cast<std::size_t>(ch)]);
    fft2(y, false);
    const Plane& adj = out_adjoint.channels[static_cast<std::size_t>(ch)];
    CMatrix raw_spec = CMatrix::Zero(fr.nr, fr.nc);
    for (int s = 0; s < kernels.sites(); ++s) {
      // Adjoint of the site output on the padded grid: blend weight times the
      // output adjoint inside the crop window, zero elsewhere.
      CMatrix g = CMatrix::Zero(fr.nr, fr.nc);
      bool any = false;
      for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
          const SiteBlend b = blend_at(ax, ay, kernels.grid, r, c);
          for (int q = 0; q < 4; ++q) {
            if (b.site[q] != s || b.weight[q] == 0.0) continue;
            g(r + fr.pad, c + fr.pad) += b.weight[q] * adj(r, c);
            any = true;
          }
        }
      }
      if (!any) continue;
      fft2(g, false);
      const CMatrix hs = kernel_spectrum(kernels.at(s, ch), k, fr.nr, fr.nc);
      if (raw_adjoint != nullptr) raw_spec += wiener_filter(hs, nsr).conjugate().cwiseProduct(g);
      if (kernel_adjoint == nullptr) continue;
      CMatrix hbar(fr.nr, fr.nc);
      for (Eigen::Index i = 0; i < hs.size(); ++i) {
        const double a = hs.data()[i].real(), bi = hs.data()[i].imag();
        const double d = a * a + bi * bi + nsr;
        const Complex num(a, -bi);
        const Complex dwa = 1.0 / d - num * (2.0 * a / (d * d));
        const Complex dwb = Complex(0.0, -1.0 / d) - num * (2.0 * bi / (d * d));
        const Complex acoef = inv_n * std::conj(g.data()[i]) * y.data()[i];
        const double abar = (dwa * acoef).real(), bbar = (dwb * acoef).real();
        hbar.data()[i] = Complex(abar, -bbar);
      }
      fft2(hbar, false);
      auto& taps = kernel_adjoint->at(s, ch);
      for (int ty = 0; ty < k; ++ty) {
        for (int tx = 0; tx < k; ++tx) {
          const int r = ((ty - half) % fr.nr + fr.nr) % fr.nr;
          const int c = ((tx - half) % fr.nc + fr.nc) % fr.nc;
          taps[static_cast<std::size_t>(ty * k + tx)] += hbar(r, c).real();
        }
      }
    }
    if (raw_adjoint != nullptr) {
      fft2(raw_spec, true);
      raw_adjoint->channels[static_cast<std::size_t>(ch)] = fr.fold(raw_spec);
    }
  }
}

Image prewarp(const Image& object, const DistortionFit& fit, double pixel_pitch_mm) {
  if (!fit.monotone()) throw DistortionError("prewarp: distortion fit is not monotone");
  if (!(pixel_pitch_mm > 0.0)) throw std::invalid_argument("prewarp: pixel pitch must be positive");
  const int h = object.rows(), w = object.cols();
  Image out(object.channel_count(), h, w);
  out.depth = object.depth;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double x = (c + 0.5 - 0.5 * w) * pixel_pitch_mm;
      const double y = (r + 0.5 - 0.5 * h) * pixel_pitch_mm;
      const double rad = std::hypot(x, y);
      const double scale = rad > 0.0 ? fit.forward(rad) / rad : fit.slope(0.0);
      const double u = x * scale / pixel_pitch_mm + 0.5 * w - 0.5;
      const double v = y * scale / pixel_pitch_mm + 0.5 * h - 0.5;
      const double fu = std::floor(u), fv = std::floor(v);
      const int c0 = static_cast<int>(fu), r0 = static_cast<int>(fv);
      const double au = u - fu, av = v - fv;
      for (int ch = 0; ch < object.channel_count(); ++ch) {
        const Plane& src = object.channels[static_cast<std::size_t>(ch)];
        double acc = 0.0;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const int rr = std::clamp(r0 + dy, 0, h - 1), cc = std::clamp(c0 + dx, 0, w - 1);
            acc += (dx ? au : 1.0 - au) * (dy ? av : 1.0 - av) * src(rr, cc);
          }
        }
        // Outside the object's footprint (beyond half a pixel) is empty.
        const bool inside = u > -0.5 && v > -0.5 && u < w - 0.5 && v < h - 0.5;
        out.channels[static_cast<std::size_t>(ch)](r, c) = inside ? acc : 0.0;
      }
    }
  }
  return out;
}

double psnr(const Image& a, const Image& b) {
  const double m = mse(a, b);
  if (!(m > 0.0)) return 99.0;
  return std::min(99.0, 10.0 * std::log10(1.0 / m));
}

double ssim(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("ssim: shape mismatch");
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5, c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  if (a.rows() < kWin || a.cols() < kWin) throw std::invalid_argument("ssim: image smaller than window");
  Eigen::VectorXd g(kWin);
  for (int i = 0; i < kWin; ++i) g[i] = std::exp(-0.5 * std::pow((i - kWin / 2) / kSigma, 2));
  g /= g.sum();
  // Separable valid-mode Gaussian filtering.
  auto blur = [&](const Plane& p) {
    const Eigen::Index h = p.rows(), w = p.cols();
    Plane tmp(h, w - kWin + 1), out(h - kWin + 1, w - kWin + 1);
    for (Eigen::Index r = 0; r < h; ++r)
      for (Eigen::Index c = 0; c < tmp.cols(); ++c) tmp(r, c) = p.row(r).segment(c, kWin).dot(g.transpose());
    for (Eigen::Index r = 0; r < out.rows(); ++r)
      for (Eigen::Index c = 0; c < out.cols(); ++c) out(r, c) = tmp.col(c).segment(r, kWin).dot(g);
    return out;
  };
  double total = 0.0;
  for (int ch = 0; ch < a.channel_count(); ++ch) {
    const Plane& x = a.channels[static_cast<std::size_t>(ch)];
    const Plane& y = b.channels[static_cast<std::size_t>(ch)];
    const Plane mx = blur(x), my = blur(y);
    const Plane sxx = blur(x.cwiseProduct(x)) - mx.cwiseProduct(mx);
    const Plane syy = blur(y.cwiseProduct(y)) - my.cwiseProduct(my);
    const Plane sxy = blur(x.cwiseProduct(y)) - mx.cwiseProduct(my);
    const auto num = (2.0 * mx.cwiseProduct(my).array() + c1) * (2.0 * sxy.array() + c2);
    const auto den = (mx.cwiseProduct(mx).array() + my.cwiseProduct(my).array() + c1) *
                     (sxx.array() + syy.array() + c2);
    total += (num / den).mean();
  }
  return total / a.channel_count();
}

}  // namespace lensforge
