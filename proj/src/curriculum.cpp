#include "lensforge/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

namespace lensforge {

namespace {

constexpr double kOpenRadius = 1e3;  // training semi-diameter of refracting surfaces
constexpr double kDegree = std::numbers::pi / 180.0;

double radial_rho(int j, int count) {
  return count == 1 ? 0.0 : std::sqrt(static_cast<double>(j) / (count - 1));
}

/// Sensor-quadrant cells (G x G, axis at (0, 0)) and their linear weights onto
/// the radial training fields.
struct RadialMap {
  int grid = 0;
  std::vector<std::array<int, 2>> field;  // per cell: lower and upper field index
  std::vector<double> upper_weight;

  RadialMap(int g, int fields, double hw, double hh) : grid(g) {
    const double hd = std::hypot(hw, hh);
    for (int j = 0; j < g; ++j) {
      for (int i = 0; i < g; ++i) {
        const double rho = std::hypot(hw * i / (g - 1), hh * j / (g - 1)) / hd;
        int k = 0;
        while (k + 2 < fields && radial_rho(k + 1, fields) < rho) ++k;
        const double a = radial_rho(k, fields), b = radial_rho(k + 1, fields);
        field.push_back({k, k + 1});
        upper_weight.push_back(std::clamp((rho - a) / (b - a), 0.0, 1.0));
      }
    }
  }

  Eigen::MatrixXd interpolate(const std::vector<double>& rms) const {
    Eigen::MatrixXd out(grid, grid);
    for (int c = 0; c < grid * grid; ++c) {
      const auto [lo, hi] = field[static_cast<std::size_t>(c)];
      const double w = upper_weight[static_cast<std::size_t>(c)];
      const double a = rms[static_cast<std::size_t>(lo)], b = rms[static_cast<std::size_t>(hi)];
      double v = (1.0 - w) * a + w * b;
      if (!std::isfinite(a) && w < 1.0) v = a;
      if (!std::isfinite(b) && w > 0.0) v = b;
      out(c / grid, c % grid) = v;
    }
    return out;
  }

  /// Total mask mass each radial field receives.
  std::vector<double> field_weights(const Eigen::MatrixXd& mask, int fields) const {
    std::vector<double> w(static_cast<std::size_t>(fields), 0.0);
    for (int c = 0; c < grid * grid; ++c) {
      const double m = mask(c / grid, c % grid);
      const auto [lo, hi] = field[static_cast<std::size_t>(c)];
      const double u = upper_weight[static_cast<std::size_t>(c)];
      w[static_cast<std::size_t>(lo)] += m * (1.0 - u);
      w[static_cast<std::size_t>(hi)] += m * u;
    }
    return w;
  }
};

struct SpotEval {
  std::vector<DiffScalar> rms;  // per radial field, mean over wavelengths (mm or mm^2)
  std::vector<double> rms_value;  // mm; NaN where every wavelength failed
  DiffScalar obliquity_sum{0.0};
  int valid = 0;
  int total = 0;
  ApertureProbe probe;
};

SpotEval trace_fields(const LensSystem<DiffScalar>& sys, const LensSystem<double>& plain,
                      const DesignTarget& target, const SpotLossConfig& cfg, std::uint64_t seed) {
  SpotEval ev;
  ev.probe.max_radius.assign(plain.surfaces.size(), 0.0);
  const double tmax = std::tan(0.5 * target.fov_deg * kDegree);
  for (int j = 0; j < cfg.radial_fields; ++j) {
    Field f;
    f.tan_y = radial_rho(j, cfg.radial_fields) * tmax;
    DiffScalar acc(0.0);
    int used = 0;
    for (double wl : plain.wavelengths) {
      const auto rays = sample_rays(plain, f, wl, cfg.spp, cfg.pattern, seed);
      const BundleStats<DiffScalar> st = trace_bundle(sys, plain, std::span(rays), &ev.probe);
      ev.valid += st.valid;
      ev.total += st.total;
      ev.obliquity_sum += st.obliquity_sum;
      if (st.valid < 2) continue;
      acc += cfg.squared ? st.mean_square_radius : bundle_rms(st);
      ++used;
    }
    if (used == 0) {
      ev.rms.emplace_back(0.0);
      ev.rms_value.push_back(std::numeric_limits<double>::quiet_NaN());
    } else {
      ev.rms.push_back(acc * (1.0 / used));
      const double v = ev.rms.back().value();
      ev.rms_value.push_back(cfg.squared ? std::sqrt(v) : v);
    }
  }
  return ev;
}

LensSystem<double> opened(const LensSystem<double>& system) {
  LensSystem<double> out = system;
  for (auto& s : out.surfaces) {
    if (!s.is_stop) s.semi_diameter = kOpenRadius;
  }
  return out;
}

template <typename S>
LensSystem<S> radii_applied(const LensSystem<S>& system, const std::vector<double>& radii) {
  LensSystem<S> out = system;
  for (std::size_t k = 0; k < out.surfaces.size(); ++k) {
    if (!out.surfaces[k].is_stop) out.surfaces[k].semi_diameter = radii[k];
  }
  return out;
}

class Runner {
 public:
  Runner(const DesignConfig& cfg, const LensSystem<double>& start)
      : cfg_(cfg), base_(start), layout_(start, cfg.layout) {
    params_ = layout_.pack(start);
    double rref = 0.0;
    for (const auto& s : start.surfaces) {
      if (!s.is_stop) rref = std::max(rref, std::min(s.semi_diameter, 0.5 * start.sensor_diagonal));
    }
    rates_ = learning_rates(layout_, cfg.adam, std::max(rref, 1.0));
    adam_.reset(params_.size());
  }

  DesignResult run() {
    DesignResult out;
    const CurriculumSchedule& sc = cfg_.schedule;
    const int steps = cfg_.use_curriculum ? sc.steps : 1;
    const int epochs = cfg_.use_curriculum ? sc.epochs_per_step : sc.steps * sc.epochs_per_step;
    try {
      radii_ = clear_radii(current(), sc.end, cfg_.spot);
      for (int i = 1; i <= steps; ++i) {
        const DesignTarget t = cfg_.use_curriculum ? schedule(sc, i) : sc.end;
        begin_step(t);
        for (int e = 0; e < epochs; ++e) epoch(out, i, t, -1.0);
        out.steps.push_back(with_radii(current(), radii_));
      }
      for (int e = 0; e < sc.finetune_epochs; ++e) {
        const double a = sc.finetune_epochs == 1
                             ? sc.alpha_end
                             : sc.alpha_start + (sc.alpha_end - sc.alpha_start) * e /
                                                    (sc.finetune_epochs - 1);
        epoch(out, steps + 1, sc.end, a);
      }
    } catch (const DesignAbort& e) {
      out.aborted = true;
      out.abort_reason = e.what();
    }
    LensSystem<double> final_sys = current();
    try {
      radii_ = clear_radii(final_sys, sc.end, cfg_.spot);
    } catch (const std::exception&) {
      // keep the last radii from training
    }
    out.system = with_radii(final_sys, radii_);
    out.clearance = min_clearance(out.system);
    out.skipped_updates = static_cast<int>(adam_.skipped);
    SpotGridOptions rep = cfg_.report;
    rep.seed = cfg_.seed;
    try {
      out.report = spot_grid(out.system, rep);
    } catch (const std::exception& e) {
      if (!out.aborted) out.abort_reason = std::string("final evaluation failed: ") + e.what();
      out.aborted = true;
    }
    out.success = !out.aborted && !out.clearance.self_intersecting() &&
                  out.report.excluded < static_cast<int>(out.report.fields.size());
    return out;
  }

 private:
  LensSystem<double> current() const { return apply(layout_, base_, params_); }

  void begin_step(const DesignTarget& t) {
    base_ = current();
    set_stop_for_fnumber(base_, t.focal_length, t.f_number);
    base_.sensor_diagonal = cfg_.schedule.end.diagonal();
  }

  struct Loss {
    DiffScalar total;
    EpochLog log;
    ApertureProbe probe;
  };

  Loss evaluate(const DesignTarget& t, double alpha, DesignResult& out) {
    Loss L;
    std::vector<DiffScalar> p;
    p.reserve(params_.size());
    for (double v : params_) p.push_back(tape_.parameter(v));
    const LensSystem<double> train_base = opened(base_);
    const LensSystem<DiffScalar> sys = layout_.unpack<DiffScalar>(train_base, p);
    const LensSystem<double> plain = values_of(sys);

    SpotEval ev = trace_fields(sys, plain, t, cfg_.spot, cfg_.seed);
    if (ev.valid == 0) throw DesignAbort("every training ray failed");
    const int nf = cfg_.spot.radial_fields;
    const RadialMap map(cfg_.spot.mask_grid, nf, plain.sensor_half_width(), plain.sensor_half_height());
    const Eigen::MatrixXd grid = map.interpolate(ev.rms_value);
    const Eigen::MatrixXd mask = cfg_.use_mask
                                     ? build_mask(grid, map.grid, map.grid, cfg_.mask_threshold)
                                     : Eigen::MatrixXd::Ones(map.grid, map.grid);

    DiffScalar image_term(0.0);
    if (alpha < 0.0 || cfg_.image.keep_spot) {
      const std::vector<double> w = map.field_weights(mask, nf);
      double wsum = 0.0;
      for (int j = 0; j < nf; ++j) {
        if (!std::isfinite(ev.rms_value[static_cast<std::size_t>(j)])) continue;
        image_term += w[static_cast<std::size_t>(j)] * ev.rms[static_cast<std::size_t>(j)];
        wsum += w[static_cast<std::size_t>(j)];
      }
      if (wsum > 0.0) image_term = image_term * (1.0 / wsum);
    }
    if (alpha >= 0.0) image_term = image_term + render_term(sys, plain, alpha, grid, out);

    // Penalize relative power rather than focal length: smooth through zero power.
    const DiffScalar efl = paraxial_solve(sys, plain.primary_wavelength()).efl;
    const DiffScalar rel = t.focal_length / efl - 1.0;
    const DiffScalar focal = cfg_.spot.focal_weight * rel * rel;

    const LensSystem<DiffScalar> reg_sys = radii_applied(sys, radii_);
    Regularizers<DiffScalar> regs;
    regs.angle = ev.valid > 0 ? loss_angle(ev.obliquity_sum, ev.valid, cfg_.regularizers.eps_angle)
                              : DiffScalar(0.0);
    const DistLoss<DiffScalar> dl = loss_dist(reg_sys, cfg_.regularizers);
    regs.dist = dl.value;
    regs.shape = loss_shape(reg_sys, cfg_.regularizers);

    L.total = image_term + focal;
    if (cfg_.use_regularizers) L.total = L.total + regs.weighted(cfg_.regularizers);

    EpochLog& g = L.log;
    g.fov_deg = t.fov_deg;
    g.f_number = t.f_number;
    g.alpha = alpha < 0.0 ? 1.0 : alpha;
    g.loss = L.total.value();
    g.image_loss = image_term.value();
    g.focal_loss = focal.value();
    g.angle_loss = regs.angle.value();
    g.dist_loss = regs.dist.value();
    g.shape_loss = regs.shape.value();
    double s = 0.0;
    int n = 0;
    for (double v : ev.rms_value) {
      if (std::isfinite(v)) {
        s += v;
        ++n;
      }
    }
    g.avg_rms_um = n > 0 ? 1e3 * s / n : std::numeric_limits<double>::quiet_NaN();
    g.efl = efl.value();
    g.failure_fraction = ev.total ? 1.0 - static_cast<double>(ev.valid) / ev.total : 1.0;
    g.self_intersecting = dl.self_intersecting;
    L.probe = std::move(ev.probe);
    return L;
  }

  DiffScalar render_term(const LensSystem<DiffScalar>& sys, const LensSystem<double>& plain,
                         double alpha, const Eigen::MatrixXd& rms_grid, DesignResult& out) {
    const int res = cfg_.image.resolution;
    LensSystem<DiffScalar> rsys = sys;
    LensSystem<double> rplain = plain;
    rplain.sensor_width = res;
    rplain.sensor_height = res;
    rsys.sensor_width = res;
    rsys.sensor_height = res;
    PsfGridSpec spec = cfg_.image.psf;
    spec.seed = cfg_.seed;
    const KernelSet<DiffScalar> kernels = build_kernels<DiffScalar>(rsys, rplain, spec);
    std::optional<DistortionFit> fit;
    if (alpha < 1.0) {
      try {
        fit = fit_distortion(rplain, 9, rplain.primary_wavelength());
      } catch (const std::exception&) {
        fit.reset();
      }
    }
    const Eigen::MatrixXd mask =
        cfg_.use_mask ? build_mask(mirror_quadrant(rms_grid), res, res, cfg_.mask_threshold)
                      : Eigen::MatrixXd();
    const Image object = test_chart(res, res, static_cast<int>(plain.wavelengths.size()));
    const KernelLoss kl = relaxed_distortion_loss(object, kernel_values(kernels),
                                                  fit ? &*fit : nullptr, rplain.pixel_pitch(),
                                                  alpha, mask);
    if (kl.fell_back) ++out.fit_fallbacks;
    const KernelSet<DiffScalar>* sets[] = {&kernels};
    return attach_kernel_loss(kl, sets);
  }

  void epoch(DesignResult& out, int step, const DesignTarget& t, double alpha) {
    for (;;) {
      tape_.clear();
      bool ok = true;
      Loss L;
      std::vector<double> grad;
      {
        TapeScope scope(tape_);
        try {
          L = evaluate(t, alpha, out);
          ok = std::isfinite(L.total.value());
          if (ok) grad = tape_.backward(L.total);
        } catch (const DesignAbort&) {
          ok = false;
        } catch (const NonFiniteError&) {
          ok = false;
        } catch (const std::domain_error&) {  // paraxial or surface domain failures
          ok = false;
        } catch (const PsfError&) {
          ok = false;
        }
      }
      if (ok) {
        consecutive_ = 0;
        prev_ = RunState{step, epoch_, params_, adam_, radii_};
        prev_grad_ = grad;
        for (std::size_t k = 0; k < radii_.size(); ++k) {
          if (!base_.surfaces[k].is_stop && L.probe.max_radius[k] > 0.0) {
            radii_[k] = 1.05 * L.probe.max_radius[k];
          }
        }
        step_parameters(params_, grad, rates_, cfg_.adam, adam_);
        L.log.step = step;
        L.log.epoch = epoch_++;
        L.log.lr_scale = adam_.lr_scale;
        out.log.push_back(L.log);
        return;
      }
      ++out.rollbacks;
      if (++consecutive_ >= cfg_.max_rollbacks) {
        throw DesignAbort("loss diverged " + std::to_string(consecutive_) +
                          " times in a row at epoch " + std::to_string(epoch_));
      }
      // Back to the last good point, then redo its update with half the step.
      const double scale = adam_.lr_scale * 0.5;
      if (!prev_grad_.empty()) {
        params_ = prev_.params;
        adam_ = prev_.adam;
        radii_ = prev_.clear_radius;
      }
      adam_.lr_scale = scale;
      if (!prev_grad_.empty()) step_parameters(params_, prev_grad_, rates_, cfg_.adam, adam_);
      EpochLog g;
      g.step = step;
      g.epoch = epoch_;
      g.rolled_back = true;
      g.lr_scale = adam_.lr_scale;
      g.loss = std::numeric_limits<double>::quiet_NaN();
      out.log.push_back(g);
    }
  }

  const DesignConfig& cfg_;
  LensSystem<double> base_;
  ParamLayout layout_;
  std::vector<double> params_;
  std::vector<double> rates_;
  std::vector<double> radii_;
  AdamState adam_;
  GradientTape tape_;
  int epoch_ = 0;
  int consecutive_ = 0;
  RunState prev_;
  std::vector<double> prev_grad_;
};

}  // namespace

double DesignTarget::diagonal() const {
  if (sensor_diagonal > 0.0) return sensor_diagonal;
  return 2.0 * focal_length * std::tan(0.5 * fov_deg * kDegree);
}

void DesignTarget::validate() const {
  if (!(fov_deg > 0.0 && fov_deg < 180.0)) throw std::invalid_argument("field of view must lie in (0, 180) degrees");
  if (!(f_number > 0.0)) throw std::invalid_argument("F-number must be positive");
  if (!(focal_length > 0.0)) throw std::invalid_argument("focal length must be positive");
  if (sensor_diagonal < 0.0) throw std::invalid_argument("sensor diagonal must be non-negative");
}

CurriculumSchedule CurriculumSchedule::toward(const DesignTarget& end, int steps, int epochs_per_step) {
  CurriculumSchedule s;
  s.end = end;
  s.start = end;
  s.start.fov_deg = 0.6 * end.fov_deg;
  s.start.f_number = 1.4 * end.f_number;
  s.steps = steps;
  s.epochs_per_step = epochs_per_step;
  return s;
}

void CurriculumSchedule::validate() const {
  start.validate();
  end.validate();
  if (steps < 1) throw std::invalid_argument("curriculum needs at least one step");
  if (epochs_per_step < 0 || finetune_epochs < 0) throw std::invalid_argument("epoch counts must be non-negative");
  if (start.fov_deg > end.fov_deg) throw std::invalid_argument("curriculum start field of view exceeds the end");
  if (start.f_number < end.f_number) throw std::invalid_argument("curriculum start F-number is faster than the end");
  if (!(alpha_start >= 0.0 && alpha_start <= 1.0 && alpha_end >= 0.0 && alpha_end <= 1.0)) {
    throw std::invalid_argument("alpha ramp must lie in [0, 1]");
  }
}

DesignTarget schedule(const CurriculumSchedule& s, int i) {
  if (i < 0 || i > s.steps) {
    throw std::out_of_range("curriculum step " + std::to_string(i) + " outside [0, " +
                            std::to_string(s.steps) + "]");
  }
  DesignTarget t = s.end;
  if (i == s.steps) return t;
  const double w = std::sin(i * std::numbers::pi / (2.0 * s.steps));
  t.fov_deg = s.start.fov_deg + (s.end.fov_deg - s.start.fov_deg) * w;
  t.f_number = s.start.f_number + (s.end.f_number - s.start.f_number) * w;
  return t;
}

LensSystem<double> random_init(const InitConfig& config, const DesignTarget& target,
                               std::uint64_t seed) {
  target.validate();
  if (config.elements < 1) throw std::invalid_argument("random_init: need at least one element");
  const double track = config.stop_gap + config.elements * config.thickness +
                       (config.elements - 1) * config.air_gap;
  if (config.track_limit > 0.0 && track > config.track_limit) {
    throw std::invalid_argument("random_init: " + std::to_string(config.elements) +
                                " elements need " + std::to_string(track) +
                                " mm, track limit is " + std::to_string(config.track_limit) + " mm");
  }
  const MaterialCatalog catalog;
  std::vector<Material> glasses = config.glasses;
  if (glasses.empty()) glasses = {*catalog.find("crown"), *catalog.find("flint")};
  Rng rng(seed);
  LensSystem<double> sys;
  sys.sensor_diagonal = target.diagonal();
  const double open = 0.5 * sys.sensor_diagonal + target.focal_length / target.f_number;
  Surface<double> stop;
  stop.type = SurfaceType::kStop;
  stop.is_stop = true;
  stop.semi_diameter = target.focal_length / (2.0 * target.f_number);
  sys.surfaces.push_back(stop);
  double z = config.stop_gap;
  for (int e = 0; e < config.elements; ++e) {
    for (int side = 0; side < 2; ++side) {
      Surface<double> s;
      s.curvature = rng.uniform(-config.curvature_range, config.curvature_range);
      s.even.assign(static_cast<std::size_t>(config.even_terms), 0.0);
      s.z = z;
      s.semi_diameter = open;
      s.material = side == 0 ? glasses[static_cast<std::size_t>(e) % glasses.size()] : air();
      sys.surfaces.push_back(s);
      z += side == 0 ? config.thickness : config.air_gap;
    }
  }
  sys.renumber();
  const double last = sys.surfaces.back().z;
  sys.sensor_z = last + target.focal_length;
  try {
    const double bfd = paraxial_solve(sys, sys.primary_wavelength()).bfd;
    if (bfd >= 0.5 * target.focal_length && bfd <= 2.0 * target.focal_length) sys.sensor_z = last + bfd;
  } catch (const ParaxialError&) {
  }
  validate(sys);
  return sys;
}

std::vector<double> clear_radii(const LensSystem<double>& system, const DesignTarget& target,
                                const SpotLossConfig& spot, double margin) {
  const LensSystem<double> open = opened(system);
  const LensSystem<DiffScalar> sys = open.cast<DiffScalar>();
  const SpotEval ev = trace_fields(sys, open, target, spot, 0);
  std::vector<double> out(system.surfaces.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = system.surfaces[k].is_stop || !(ev.probe.max_radius[k] > 0.0)
                 ? system.surfaces[k].semi_diameter
                 : margin * ev.probe.max_radius[k];
  }
  return out;
}

LensSystem<double> with_radii(const LensSystem<double>& system, const std::vector<double>& radii) {
  return radii_applied(system, radii);
}

Image test_chart(int rows, int cols, int channels, int period_px) {
  Image img(channels, rows, cols);
  const double period = period_px > 0 ? period_px : std::max(4.0, rows / 8.0);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double x = c + 0.5 - 0.5 * cols, y = r + 0.5 - 0.5 * rows;
      const double grating = std::cos(2.0 * std::numbers::pi * x / period) *
                             std::cos(2.0 * std::numbers::pi * y / period);
      const double ring = std::cos(2.0 * std::numbers::pi * std::hypot(x, y) / (1.5 * period));
      const double v = 0.5 + 0.25 * grating + 0.15 * ring;
      for (auto& ch : img.channels) ch(r, c) = v;
    }
  }
  return img;
}

DesignResult design(const DesignConfig& config) {
  config.schedule.validate();
  return design_from(config, random_init(config.init, config.schedule.end, config.seed));
}

DesignResult design_from(const DesignConfig& config, const LensSystem<double>& start) {
  config.schedule.validate();
  Runner runner(config, start);
  return runner.run();
}

}  // namespace lensforge
