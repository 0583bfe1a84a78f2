#include "lensforge/edof.hpp"

#include <cmath>
#include <stdexcept>

#include "lensforge/curriculum.hpp"

namespace lensforge {

LensSystem<double> make_hybrid(const LensSystem<double>& system, int surface, int odd_terms) {
  if (odd_terms < 1) throw std::invalid_argument("hybrid surface needs at least one odd term");
  int k = surface;
  if (k < 0) {
    for (std::size_t i = 0; i < system.surfaces.size(); ++i) {
      if (!system.surfaces[i].is_stop) {
        k = static_cast<int>(i);
        break;
      }
    }
  }
  if (k < 0 || k >= static_cast<int>(system.surfaces.size())) {
    throw std::out_of_range("hybrid surface " + std::to_string(surface) + " out of range [0, " +
                            std::to_string(system.surfaces.size()) + ")");
  }
  LensSystem<double> out = system;
  Surface<double>& s = out.surfaces[static_cast<std::size_t>(k)];
  if (s.is_stop) throw std::out_of_range("surface " + std::to_string(k) + " is the aperture stop");
  s.type = SurfaceType::kHybrid;
  const auto n = static_cast<std::size_t>(odd_terms);
  if (s.odd_x.size() < n) s.odd_x.resize(n, 0.0);
  if (s.odd_y.size() < n) s.odd_y.resize(n, 0.0);
  return out;
}

double paraxial_image_distance(const LensSystem<double>& system, double depth, double wavelength) {
  if (!std::isfinite(depth)) return paraxial_solve(system, wavelength).bfd;
  if (!(depth > 0.0)) throw std::invalid_argument("object depth must be positive");
  // Marginal ray from the axial object point with unit slope.
  double y = depth, nu = 1.0, n = 1.0;
  const auto& surfaces = system.surfaces;
  for (std::size_t k = 0; k < surfaces.size(); ++k) {
    const auto& s = surfaces[k];
    const double n2 = s.type == SurfaceType::kStop ? n : s.material.index(wavelength);
    if (n2 != n) nu -= y * (n2 - n) * paraxial_curvature(s);
    n = n2;
    if (k + 1 < surfaces.size()) y += (surfaces[k + 1].z - s.z) * nu / n;
  }
  const double u = nu / n;
  if (!(u < 0.0)) throw ParaxialError("object at " + std::to_string(depth) + " mm has no real image");
  return -y / u;
}

LensSystem<double> refocus(const LensSystem<double>& system, double depth) {
  LensSystem<double> out = system;
  const double d = paraxial_image_distance(system, depth, system.primary_wavelength());
  if (!(d > 0.0)) throw ParaxialError("image of " + std::to_string(depth) + " mm falls inside the lens");
  out.sensor_z = out.surfaces.back().z + d;
  return out;
}

std::vector<PsfGrid> depth_kernels(const LensSystem<double>& system, const PsfGridSpec& spec,
                                   const std::vector<double>& depths) {
  std::vector<PsfGrid> out;
  for (double d : depths) {
    PsfGridSpec s = spec;
    s.depth = d;
    out.push_back(build_psf_grid(system, s));
  }
  return out;
}

std::vector<DepthQuality> depth_quality(const std::vector<PsfGrid>& kernels,
                                        const std::vector<double>& depths, const Image& chart,
                                        double nsr) {
  if (kernels.empty() || kernels.size() != depths.size()) {
    throw std::invalid_argument("depth_quality: one kernel grid per depth required");
  }
  PsfGrid mean = kernels[0];
  for (std::size_t d = 1; d < kernels.size(); ++d) {
    for (std::size_t i = 0; i < mean.taps.size(); ++i)
      for (std::size_t j = 0; j < mean.taps[i].size(); ++j) mean.taps[i][j] += kernels[d].taps[i][j];
  }
  for (auto& t : mean.taps)
    for (auto& v : t) v /= static_cast<double>(kernels.size());
  std::vector<DepthQuality> out;
  for (std::size_t d = 0; d < kernels.size(); ++d) {
    const Image raw = simulate(chart, kernels[d]);
    DepthQuality q;
    q.depth = depths[d];
    q.psnr_raw = psnr(raw, chart);
    q.psnr_recon = psnr(wiener_reconstruct(raw, mean, nsr), chart);
    out.push_back(q);
  }
  return out;
}

namespace {

LensSystem<double> start_sensor(const LensSystem<double>& system, int resolution) {
  LensSystem<double> out = system;
  out.sensor_width = resolution;
  out.sensor_height = resolution;
  return out;
}

}  // namespace

EdofResult edof_design(const EdofConfig& config, const LensSystem<double>& start) {
  if (config.depths.size() < 2) throw std::invalid_argument("EDoF design needs at least two depths");
  LensSystem<double> base = start;
  base.sensor_width = config.resolution;
  base.sensor_height = config.resolution;
  int hybrid = -1;
  for (std::size_t k = 0; k < base.surfaces.size(); ++k) {
    if (base.surfaces[k].type == SurfaceType::kHybrid) hybrid = static_cast<int>(k);
  }
  if (hybrid < 0) throw std::invalid_argument("EDoF design needs a hybrid surface");
  Surface<double>& hs = base.surfaces[static_cast<std::size_t>(hybrid)];
  if (!hs.odd_x.empty() && hs.odd_x[0] == 0.0) hs.odd_x[0] = config.initial_cubic;
  if (!hs.odd_y.empty() && hs.odd_y[0] == 0.0) hs.odd_y[0] = config.initial_cubic;

  const ParamLayout layout(base, LayoutOptions{config.refine_lens, false, 0, config.refine_lens, true, true});
  std::vector<double> params = layout.pack(base);
  AdamConfig adam;
  adam.lr[static_cast<std::size_t>(ParamGroup::kOddPoly)] = config.lr;
  const std::vector<double> rates =
      learning_rates(layout, adam, base.surfaces[static_cast<std::size_t>(hybrid)].semi_diameter);
  AdamState state;
  state.reset(params.size());

  PsfGridSpec spec = config.psf;
  spec.seed = config.seed;
  const Image chart = test_chart(config.resolution, config.resolution,
                                 static_cast<int>(base.wavelengths.size()), config.chart_period);

  EdofResult out;
  out.kernels_before = depth_kernels(start_sensor(start, config.resolution), spec, config.depths);
  out.variance_before = depth_variance(out.kernels_before);
  out.quality_before = depth_quality(out.kernels_before, config.depths, chart, config.weights.nsr);

  GradientTape tape;
  std::vector<double> prev_params = params;
  AdamState prev_state = state;
  int consecutive = 0;
  for (int e = 0; e < config.epochs; ++e) {
    EdofEpoch row;
    row.epoch = e;
    std::vector<double> grad;
    bool ok = true;
    tape.clear();
    {
      TapeScope scope(tape);
      try {
        std::vector<DiffScalar> p;
        for (double v : params) p.push_back(tape.parameter(v));
        const LensSystem<DiffScalar> sys = layout.unpack<DiffScalar>(base, p);
        const LensSystem<double> plain = values_of(sys);
        std::vector<KernelSet<DiffScalar>> sets;
        std::vector<PsfGrid> values;
        for (double d : config.depths) {
          PsfGridSpec s = spec;
          s.depth = d;
          sets.push_back(build_kernels<DiffScalar>(sys, plain, s));
          values.push_back(kernel_values(sets.back()));
        }
        const KernelLoss kl = edof_loss(chart, values, config.weights);
        std::vector<const KernelSet<DiffScalar>*> ptrs;
        for (const auto& s : sets) ptrs.push_back(&s);
        const DiffScalar loss = attach_kernel_loss(kl, ptrs);
        row.loss = loss.value();
        row.depth_variance = depth_variance(values);
        ok = std::isfinite(row.loss);
        if (ok) grad = tape.backward(loss);
      } catch (const PsfError&) {
        ok = false;
      } catch (const NonFiniteError&) {
        ok = false;
      } catch (const std::domain_error&) {
        ok = false;
      }
    }
    if (ok) {
      consecutive = 0;
      prev_params = params;
      prev_state = state;
      step_parameters(params, grad, rates, adam, state);
    } else {
      if (++consecutive >= config.max_rollbacks) {
        out.aborted = true;
        out.abort_reason = "EDoF loss failed " + std::to_string(consecutive) + " times in a row at epoch " +
                           std::to_string(e);
        params = prev_params;
        break;
      }
      const double scale = state.lr_scale * 0.5;
      params = prev_params;
      state = prev_state;
      state.lr_scale = scale;
      row.rolled_back = true;
      row.loss = std::numeric_limits<double>::quiet_NaN();
    }
    out.log.push_back(row);
  }
  // The last update was never evaluated; keep the last evaluated point if it fails.
  try {
    out.system = apply(layout, base, params);
    out.kernels_after = depth_kernels(out.system, spec, config.depths);
  } catch (const std::exception&) {
    out.system = apply(layout, base, prev_params);
    out.kernels_after = depth_kernels(out.system, spec, config.depths);
  }
  out.variance_after = depth_variance(out.kernels_after);
  out.quality_after = depth_quality(out.kernels_after, config.depths, chart, config.weights.nsr);
  return out;
}

}  // namespace lensforge
