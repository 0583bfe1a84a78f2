#include "lensforge/recompute.hpp"

#include <algorithm>
#include <cmath>

#include "lensforge/losses.hpp"

namespace lensforge {

namespace {

std::vector<DiffScalar> register_params(GradientTape& tape, const std::vector<double>& v) {
  std::vector<DiffScalar> p;
  p.reserve(v.size());
  for (double x : v) p.push_back(tape.parameter(x));
  return p;
}

LensSystem<double> render_system(const RenderRecipe& r) {
  if (r.object.cols() != r.base.sensor_width || r.object.rows() != r.base.sensor_height) {
    throw std::invalid_argument("object resolution must match the sensor resolution");
  }
  return apply(r.layout, r.base, r.params);
}

double mask_at(const Eigen::MatrixXd& mask, int r, int c) {
  return mask.size() == 0 ? 1.0 : mask(r, c);
}

}  // namespace

ReplayMismatch::ReplayMismatch(int patch, double difference)
    : std::runtime_error("replay of patch " + std::to_string(patch) + " differs from the first pass by " +
                         std::to_string(difference)),
      patch_(patch) {}

RenderGradient backward_direct(const RenderRecipe& recipe) {
  const LensSystem<double> plain0 = render_system(recipe);
  const double scale = resolve_scale(plain0, recipe.psf);
  PsfGridSpec spec = recipe.psf;
  spec.scale = scale;
  GradientTape tape;
  TapeScope scope(tape);
  const auto p = register_params(tape, recipe.params);
  LensSystem<DiffScalar> sys = recipe.layout.unpack<DiffScalar>(recipe.base, p);
  const LensSystem<double> plain = values_of(sys);
  const KernelSet<DiffScalar> kernels = build_kernels<DiffScalar>(sys, plain, spec);
  const int h = recipe.object.rows(), w = recipe.object.cols();
  const auto pixels = simulate_recorded(recipe.object, kernels, 0, h, 0, w);
  const double n = static_cast<double>(recipe.object.channel_count()) * h * w;
  DiffScalar loss(0.0);
  std::size_t i = 0;
  for (int ch = 0; ch < recipe.object.channel_count(); ++ch) {
    const Plane& ref = recipe.object.channels[static_cast<std::size_t>(ch)];
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const double m = mask_at(recipe.mask, r, c);
        const DiffScalar d = (pixels[i++] - ref(r, c)) * m;
        loss += d * d;
      }
    }
  }
  loss = loss * (1.0 / n);
  RenderGradient out;
  out.loss = loss.value();
  out.gradient = tape.backward(loss);
  out.peak_nodes = tape.size();
  return out;
}

RenderGradient backward_with_recompute(const RenderRecipe& recipe, int patches_per_axis) {
  if (patches_per_axis < 1) throw std::invalid_argument("need at least one patch per axis");
  const LensSystem<double> plain0 = render_system(recipe);
  PsfGridSpec spec = recipe.psf;
  spec.scale = resolve_scale(plain0, recipe.psf);

  // First pass: plain values only.
  const PsfGrid kernels = build_psf_grid(plain0, spec);
  const Image sim = simulate(recipe.object, kernels);
  Image adjoint;
  RenderGradient out;
  out.loss = masked_mse(sim, recipe.object, recipe.mask, &adjoint);
  out.gradient.assign(recipe.params.size(), 0.0);

  const int h = recipe.object.rows(), w = recipe.object.cols();
  const int nw = static_cast<int>(plain0.wavelengths.size());
  GradientTape tape;
  int patch = 0;
  for (int py = 0; py < patches_per_axis; ++py) {
    for (int px = 0; px < patches_per_axis; ++px, ++patch) {
      const int r0 = h * py / patches_per_axis, r1 = h * (py + 1) / patches_per_axis;
      const int c0 = w * px / patches_per_axis, c1 = w * (px + 1) / patches_per_axis;
      if (r0 == r1 || c0 == c1) continue;
      tape.clear();
      TapeScope scope(tape);
      const auto p = register_params(tape, recipe.params);
      LensSystem<DiffScalar> sys = recipe.layout.unpack<DiffScalar>(recipe.base, p);
      const LensSystem<double> plain = values_of(sys);
      KernelSet<DiffScalar> ks;
      ks.resize(spec.grid, spec.kernel, nw);
      for (int s : sites_touching(h, w, spec.grid, r0, r1, c0, c1)) {
        for (int wl = 0; wl < nw; ++wl) trace_site_kernel(sys, plain, spec, spec.scale, s, wl, ks.at(s, wl));
      }
      const auto pixels = simulate_recorded(recipe.object, ks, r0, r1, c0, c1);
      std::vector<double> seeds;
      seeds.reserve(pixels.size());
      std::size_t i = 0;
      double worst = 0.0;
      for (int ch = 0; ch < nw; ++ch) {
        for (int r = r0; r < r1; ++r) {
          for (int c = c0; c < c1; ++c) {
            worst = std::max(worst, std::abs(pixels[i++].value() - sim.channels[static_cast<std::size_t>(ch)](r, c)));
            seeds.push_back(adjoint.channels[static_cast<std::size_t>(ch)](r, c));
          }
        }
      }
      if (!(worst <= 1e-12)) throw ReplayMismatch(patch, worst);
      const auto g = tape.backward_seeded(pixels, seeds);
      for (std::size_t k = 0; k < g.size(); ++k) out.gradient[k] += g[k];
      out.peak_nodes = std::max(out.peak_nodes, tape.size());
    }
  }
  return out;
}

}  // namespace lensforge
