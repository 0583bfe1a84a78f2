// Sensor image formation with a spatially varying PSF grid, its adjoints,
// distortion pre-warping, Wiener reconstruction and image-quality scores.
#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lensforge/image.hpp"
#include "lensforge/metrics.hpp"

namespace lensforge {

class PsfError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PsfGridSpec {
  int grid = 8;     // sites per axis, spanning the full sensor corner to corner
  int kernel = 15;  // taps per axis, odd
  int spp = 64;
  PupilPattern pattern = PupilPattern::kGrid;
  std::uint64_t seed = 0;
  double depth = std::numeric_limits<double>::infinity();
  /// Image height per unit field tangent; 0 = paraxial value of the system.
  double scale = 0.0;
  /// Shift every kernel so its centroid sits on the ideal image point. This
  /// drops distortion and lateral color from the simulation and keeps only
  /// the blur shape.
  bool centroid_centered = false;
};

/// Kernels of every (site, wavelength), each kernel x kernel row-major
/// (row = y). Sites are row-major over the grid.
template <typename S>
struct KernelSet {
  int grid = 0;
  int kernel = 0;
  int wavelengths = 0;
  std::vector<std::vector<S>> taps;

  int sites() const { return grid * grid; }
  std::vector<S>& at(int site, int w) { return taps[static_cast<std::size_t>(site * wavelengths + w)]; }
  const std::vector<S>& at(int site, int w) const {
    return taps[static_cast<std::size_t>(site * wavelengths + w)];
  }
  void resize(int g, int k, int wl) {
    grid = g;
    kernel = k;
    wavelengths = wl;
    taps.assign(static_cast<std::size_t>(g * g * wl),
                std::vector<S>(static_cast<std::size_t>(k * k), S(0.0)));
  }
};

using PsfGrid = KernelSet<double>;

/// Sensor position (mm) of a grid site.
Vec2<double> site_position(const LensSystem<double>& system, int grid, int site);

/// Resolved image scale for a spec (mm of image height per unit tangent).
double resolve_scale(const LensSystem<double>& system, const PsfGridSpec& spec);

/// Rays of one site at wavelength index w. Depends only on the plain system.
std::vector<Ray<double>> site_rays(const LensSystem<double>& system, const PsfGridSpec& spec,
                                   double scale, int site, int w);

/// Traces the rays of one site and splats them into a kernel centered on the
/// ideal image point. Throws PsfError if no ray lands.
template <typename S>
void trace_site_kernel(const LensSystem<S>& system, const LensSystem<double>& plain,
                       const PsfGridSpec& spec, double scale, int site, int w,
                       std::vector<S>& out) {
  const auto rays = site_rays(plain, spec, scale, site, w);
  std::vector<Vec2<S>> hits;
  hits.reserve(rays.size());
  for (const auto& r : rays) {
    TracedRay<S> t = trace(system, plain, r.template cast<S>());
    if (t.valid()) hits.push_back(t.sensor);
  }
  const Vec2<double> center = site_position(plain, spec.grid, site);
  if (spec.centroid_centered && !hits.empty()) {
    Vec2<S> mean(S(0.0), S(0.0));
    for (const auto& h : hits) mean += h;
    mean *= 1.0 / static_cast<double>(hits.size());
    const Vec2<S> shift = center.template cast<S>() - mean;
    for (auto& h : hits) h += shift;
  }
  if (hits.empty() ||
      !splat_kernel<S>(hits, center, spec.kernel, plain.pixel_pitch(), out)) {
    throw PsfError("PSF failed at field (" + std::to_string(center.x()) + ", " +
                   std::to_string(center.y()) + ") mm, depth " + std::to_string(spec.depth) +
                   " mm, wavelength " + std::to_string(plain.wavelengths[static_cast<std::size_t>(w)]) +
                   " um");
  }
}

template <typename S>
KernelSet<S> build_kernels(const LensSystem<S>& system, const LensSystem<double>& plain,
                           const PsfGridSpec& spec) {
  if (spec.kernel < 1 || spec.kernel % 2 == 0) throw std::invalid_argument("kernel size must be odd");
  if (spec.grid < 2) throw std::invalid_argument("PSF grid needs >= 2 sites per axis");
  const double scale = resolve_scale(plain, spec);
  KernelSet<S> set;
  const int nw = static_cast<int>(plain.wavelengths.size());
  set.resize(spec.grid, spec.kernel, nw);
  for (int s = 0; s < set.sites(); ++s) {
    for (int w = 0; w < nw; ++w) trace_site_kernel(system, plain, spec, scale, s, w, set.at(s, w));
  }
  return set;
}

PsfGrid build_psf_grid(const LensSystem<double>& system, const PsfGridSpec& spec);

/// Spatially varying convolution: every output pixel gathers with the
/// bilinear blend of its four nearest site kernels. Reflect padding at the
/// borders. Channel c uses wavelength c.
Image simulate(const Image& object, const PsfGrid& kernels);

/// Convenience: build the grid at the spec's depth and simulate.
Image simulate(const LensSystem<double>& system, const Image& object, const PsfGridSpec& spec);

/// Sites whose blend weight is nonzero somewhere in the pixel window
/// [row0, row1) x [col0, col1) of a rows x cols image.
std::vector<int> sites_touching(int rows, int cols, int grid, int row0, int row1, int col0,
                                int col1);

/// Adjoint of simulate() with respect to the kernel taps.
PsfGrid simulate_kernel_vjp(const Image& object, const PsfGrid& shape, const Image& out_adjoint);

/// Recorded simulation of the pixels in [row0, row1) x [col0, col1): each
/// output pixel becomes one tape node whose inputs are the kernel taps.
/// Returns values channel-major, then row-major within the patch.
std::vector<DiffScalar> simulate_recorded(const Image& object, const KernelSet<DiffScalar>& kernels,
                                          int row0, int row1, int col0, int col1);

/// Per-region Wiener deconvolution (each site's kernel applied to the whole
/// image, results blended with the bilinear site weights).
Image wiener_reconstruct(const Image& raw, const PsfGrid& kernels, double nsr);

/// Adjoint of wiener_reconstruct() with respect to the raw image and the
/// kernels. Either output may be null.
void wiener_vjp(const Image& raw, const PsfGrid& kernels, double nsr, const Image& out_adjoint,
                Image* raw_adjoint, PsfGrid* kernel_adjoint);

/// Pre-distorts an object so that imaging through a lens with distortion map
/// `fit` lands features at their ideal positions: J(q) = I(D(q)). Bilinear
/// resampling, zero outside the object. Throws DistortionError if the fit is
/// not monotone.
Image prewarp(const Image& object, const DistortionFit& fit, double pixel_pitch_mm);

/// PSNR in dB for images in [0, 1], capped at 99 dB.
double psnr(const Image& a, const Image& b);

/// Mean SSIM with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
/// averaged over channels.
double ssim(const Image& a, const Image& b);

}  // namespace lensforge
