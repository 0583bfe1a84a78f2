// Command-line front end: design, evaluate, edof, render and ablate.
#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "lensforge/ablation.hpp"
#include "lensforge/config.hpp"
#include "lensforge/edof.hpp"
#include "lensforge/io.hpp"
#include "lensforge/losses.hpp"

using namespace lensforge;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kUsage = 1, kNumerical = 2, kInvariant = 3 };

// Errors raised by the commands themselves, with their exit code.
struct CommandError : std::runtime_error {
  CommandError(int code, const std::string& message) : std::runtime_error(message), code(code) {}
  int code;
};

struct Common {
  std::string config_path;
  std::string catalog_path;
  std::string out_dir;
  long long seed = -1;
  bool no_curriculum = false;
  bool no_reg = false;
  bool no_mask = false;
};

MaterialCatalog load_catalog(const Common& c) {
  MaterialCatalog cat;
  if (!c.catalog_path.empty()) read_catalog_file(c.catalog_path, cat);
  return cat;
}

RunConfig load_config(const Common& c, const MaterialCatalog& cat) {
  RunConfig cfg = c.config_path.empty() ? parse_config("", cat) : read_config_file(c.config_path, cat);
  if (c.seed >= 0) cfg.design.seed = static_cast<std::uint64_t>(c.seed);
  if (c.no_curriculum) cfg.design.use_curriculum = false;
  if (c.no_reg) cfg.design.use_regularizers = false;
  if (c.no_mask) cfg.design.use_mask = false;
  if (!c.out_dir.empty()) cfg.out_dir = c.out_dir;
  cfg.resolve();
  return cfg;
}

Provenance provenance(const RunConfig& cfg, const std::string& command) {
  return {{"seed", std::to_string(cfg.design.seed)},
          {"config_hash", config_hash(cfg)},
          {"command", command},
          {"version", kVersion}};
}

std::string provenance_line(const Provenance& p) {
  std::string s;
  for (const auto& [k, v] : p) s += (s.empty() ? "" : " ") + k + "=" + v;
  return s;
}

fs::path prepare_out(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  body(out);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

// Image and CSV exports of a finished lens at its own sensor resolution.
void export_images(const fs::path& out, const LensSystem<double>& system, const PsfGridSpec& spec,
                   const std::string& prefix) {
  write_pnm((out / (prefix + "psf_mosaic.ppm")).string(), psf_mosaic(build_psf_grid(system, spec)));
  write_pnm((out / (prefix + "spots.ppm")).string(), spot_diagram(system, 5, 64, 96, 0.05));
}

int cmd_design(const Common& common) {
  const MaterialCatalog cat = load_catalog(common);
  const RunConfig cfg = load_config(common, cat);
  std::string command = "design";
  if (common.no_curriculum) command += "+no-curriculum";
  if (common.no_reg) command += "+no-reg";
  if (common.no_mask) command += "+no-mask";
  const Provenance prov = provenance(cfg, command);

  const fs::path out = prepare_out(cfg.out_dir);
  write_file(out / "config.ini", [&](std::ostream& o) { o << dump_config(cfg); });
  const DesignResult r = design(cfg.design);

  for (std::size_t i = 0; i < r.steps.size(); ++i) {
    write_lens_file((out / ("step_" + std::to_string(i + 1) + ".lens")).string(), r.steps[i], prov);
  }
  write_file(out / "log.csv", [&](std::ostream& o) { write_log_csv(o, r.log); });
  if (!r.aborted) {
    write_lens_file((out / "final.lens").string(), r.system, prov);
    write_file(out / "spots.csv", [&](std::ostream& o) { write_spot_csv(o, r.report); });
    try {
      export_images(out, r.system, cfg.design.image.psf, "");
    } catch (const std::exception& e) {
      std::cerr << "warning: image export skipped: " << e.what() << '\n';
    }
  }
  std::ostringstream summary;
  summary << "provenance " << provenance_line(prov) << '\n'
          << "success " << (r.success ? "true" : "false") << '\n'
          << "aborted " << (r.aborted ? "true" : "false") << '\n';
  if (r.aborted) summary << "abort_reason " << r.abort_reason << '\n';
  summary << "self_intersecting " << (r.clearance.self_intersecting() ? "true" : "false") << '\n'
          << "min_gap_mm " << format_double(r.clearance.min_gap) << '\n'
          << "avg_rms_um " << format_double(r.report.avg_rms_um) << '\n'
          << "min_rms_um " << format_double(r.report.min_rms_um) << '\n'
          << "max_failure_fraction " << format_double(r.report.max_failure_fraction) << '\n'
          << "excluded_fields " << r.report.excluded << '\n'
          << "rollbacks " << r.rollbacks << '\n'
          << "skipped_updates " << r.skipped_updates << '\n';
  write_file(out / "summary.txt", [&](std::ostream& o) { o << summary.str(); });
  std::cout << summary.str();
  if (r.aborted) return kNumerical;
  if (!r.success) return kInvariant;
  return kOk;
}

struct EvaluateOptions {
  std::string lens;
  std::string mode = "spots";
  int fields = 256;
  int spp = 64;
  int grid = 5;
  int kernel = 31;
  double depth = std::numeric_limits<double>::infinity();
  int samples = 33;
};

int cmd_evaluate(const Common& common, const EvaluateOptions& opt) {
  const MaterialCatalog cat = load_catalog(common);
  const LensFile lf = read_lens_file(opt.lens, cat);
  const LensSystem<double>& sys = lf.system;
  const fs::path out = prepare_out(common.out_dir.empty() ? "out" : common.out_dir);
  if (opt.mode == "spots") {
    SpotGridOptions so;
    so.field_count = opt.fields;
    so.spp = opt.spp;
    const SpotReport rep = spot_grid(sys, so);
    write_file(out / "spots.csv", [&](std::ostream& o) { write_spot_csv(o, rep); });
    std::cout << "avg_rms_um " << format_double(rep.avg_rms_um) << "\nmin_rms_um " << format_double(rep.min_rms_um)
              << "\nmax_failure_fraction " << format_double(rep.max_failure_fraction) << "\nexcluded_fields "
              << rep.excluded << '\n';
    if (rep.excluded > 0) std::cerr << rep.excluded << " field(s) had every ray fail; see spots.csv\n";
  } else if (opt.mode == "psf") {
    PsfGridSpec spec;
    spec.grid = opt.grid;
    spec.kernel = opt.kernel;
    spec.spp = opt.spp;
    spec.depth = opt.depth;
    const PsfGrid g = build_psf_grid(sys, spec);
    write_pnm((out / "psf_mosaic.ppm").string(), psf_mosaic(g));
    write_pnm((out / "spots.ppm").string(), spot_diagram(sys, 5, opt.spp, 96, 0.05));
    std::cout << "psf grid " << opt.grid << "x" << opt.grid << ", kernel " << opt.kernel << " px written\n";
  } else if (opt.mode == "mtf") {
    const double pitch_um = sys.pixel_pitch() * 1e3;
    const double wl = sys.primary_wavelength();
    write_file(out / "mtf.csv", [&](std::ostream& o) {
      o << "field,axis,frequency_lpmm,contrast\n";
      const double corner = 0.5 * sys.sensor_diagonal / paraxial_image_scale(sys, wl) / std::sqrt(2.0);
      for (int f = 0; f < 3; ++f) {
        const double t = corner * 0.5 * f;
        const PsfKernel k = psf(sys, Field{t, t, opt.depth}, wl, opt.kernel, pitch_um, 64 * opt.spp, 0,
                                PupilPattern::kGrid);
        for (MtfAxis axis : {MtfAxis::kX, MtfAxis::kY}) {
          const MtfCurve c = geometric_mtf(k, axis, 4);
          for (std::size_t i = 0; i < c.frequency.size(); ++i) {
            o << format_double(0.5 * f) << ',' << (axis == MtfAxis::kX ? 'x' : 'y') << ','
              << format_double(c.frequency[i]) << ',' << format_double(c.contrast[i]) << '\n';
          }
        }
      }
    });
    std::cout << "mtf.csv written (fields 0, 0.5, 1 of the corner)\n";
  } else if (opt.mode == "distortion") {
    const DistortionFit fit = fit_distortion(sys, opt.samples, sys.primary_wavelength());
    write_file(out / "distortion.csv", [&](std::ostream& o) {
      o << "ideal_mm,real_mm,distortion_percent\n";
      for (int i = 1; i <= opt.samples; ++i) {
        const double h = fit.h_max * i / opt.samples;
        const double real = fit.forward(h);
        o << format_double(h) << ',' << format_double(real) << ',' << format_double(100.0 * (real - h) / h) << '\n';
      }
    });
    std::cout << "coefficients " << format_double(fit.coeffs[0]) << ' ' << format_double(fit.coeffs[1]) << ' '
              << format_double(fit.coeffs[2]) << ' ' << format_double(fit.coeffs[3]) << "\nefl_mm "
              << format_double(fit.efl) << "\nmax_distortion_percent " << format_double(fit.max_distortion_percent())
              << "\nmax_residual_mm " << format_double(fit.max_residual_mm) << '\n';
  } else {
    throw CommandError(kUsage, "unknown evaluate mode '" + opt.mode + "' (spots, psf, mtf, distortion)");
  }
  return kOk;
}

std::string depth_tag(double d) { return format_double(d) + "mm"; }

int cmd_edof(const Common& common, const std::string& lens_path) {
  const MaterialCatalog cat = load_catalog(common);
  const RunConfig cfg = load_config(common, cat);
  const LensFile lf = read_lens_file(lens_path, cat);
  LensSystem<double> start = refocus(lf.system, cfg.edof_focus_depth);
  try {
    start = make_hybrid(start, cfg.edof.surface, cfg.edof.odd_terms);
  } catch (const std::out_of_range& e) {
    throw CommandError(kUsage, e.what());
  }
  const Provenance prov = provenance(cfg, "edof");
  const fs::path out = prepare_out(cfg.out_dir);
  write_file(out / "config.ini", [&](std::ostream& o) { o << dump_config(cfg); });
  write_lens_file((out / "before.lens").string(), start, prov);

  const EdofResult r = edof_design(cfg.edof, start);
  write_lens_file((out / "after.lens").string(), r.system, prov);
  write_file(out / "edof_log.csv", [&](std::ostream& o) { write_edof_log_csv(o, r.log); });
  write_file(out / "depth_quality.csv",
             [&](std::ostream& o) { write_depth_quality_csv(o, r.quality_before, r.quality_after); });
  LensSystem<double> sized = start;
  sized.sensor_width = sized.sensor_height = cfg.edof.resolution;
  const double pitch = sized.pixel_pitch();
  const int wl = static_cast<int>(start.wavelengths.size()) / 2;
  write_file(out / "mtf_vs_depth_before.csv",
             [&](std::ostream& o) { write_mtf_depth_csv(o, r.kernels_before, cfg.edof.depths, pitch, wl); });
  write_file(out / "mtf_vs_depth_after.csv",
             [&](std::ostream& o) { write_mtf_depth_csv(o, r.kernels_after, cfg.edof.depths, pitch, wl); });
  for (std::size_t d = 0; d < cfg.edof.depths.size(); ++d) {
    const std::string tag = depth_tag(cfg.edof.depths[d]);
    write_pnm((out / ("psf_before_" + tag + ".ppm")).string(), psf_mosaic(r.kernels_before[d]));
    write_pnm((out / ("psf_after_" + tag + ".ppm")).string(), psf_mosaic(r.kernels_after[d]));
  }
  double worst_before = INFINITY, worst_after = INFINITY;
  for (const auto& q : r.quality_before) worst_before = std::min(worst_before, q.psnr_recon);
  for (const auto& q : r.quality_after) worst_after = std::min(worst_after, q.psnr_recon);
  std::ostringstream summary;
  summary << "provenance " << provenance_line(prov) << '\n'
          << "depth_variance_before " << format_double(r.variance_before) << '\n'
          << "depth_variance_after " << format_double(r.variance_after) << '\n'
          << "variance_reduction_percent " << format_double(100.0 * (1.0 - r.variance_after / r.variance_before))
          << '\n'
          << "worst_recon_psnr_before_db " << format_double(worst_before) << '\n'
          << "worst_recon_psnr_after_db " << format_double(worst_after) << '\n'
          << "aborted " << (r.aborted ? "true" : "false") << '\n';
  if (r.aborted) summary << "abort_reason " << r.abort_reason << '\n';
  write_file(out / "summary.txt", [&](std::ostream& o) { o << summary.str(); });
  std::cout << summary.str();
  return r.aborted ? kNumerical : kOk;
}

struct RenderOptions {
  std::string lens;
  std::string input;
  double depth = std::numeric_limits<double>::infinity();
  int resolution = 256;
  int grid = 8;
  int kernel = 15;
  int spp = 64;
  double nsr = 0.0;
};

int cmd_render(const Common& common, const RenderOptions& opt) {
  const MaterialCatalog cat = load_catalog(common);
  LensSystem<double> sys = read_lens_file(opt.lens, cat).system;
  const int nw = static_cast<int>(sys.wavelengths.size());
  Image object;
  if (opt.input.empty()) {
    object = test_chart(opt.resolution, opt.resolution, nw);
  } else {
    const Image in = read_pnm(opt.input);
    object = Image(nw, in.rows(), in.cols());
    for (int c = 0; c < nw; ++c) {
      object.channels[static_cast<std::size_t>(c)] =
          in.channel_count() == nw ? in.channels[static_cast<std::size_t>(c)] : in.channels[0];
    }
  }
  sys.sensor_width = object.cols();
  sys.sensor_height = object.rows();
  PsfGridSpec spec;
  spec.grid = opt.grid;
  spec.kernel = opt.kernel;
  spec.spp = opt.spp;
  spec.depth = opt.depth;
  const PsfGrid kernels = build_psf_grid(sys, spec);
  const Image sim = simulate(object, kernels);
  const fs::path out = prepare_out(common.out_dir.empty() ? "out" : common.out_dir);
  write_pnm((out / "object.ppm").string(), object);
  write_pnm((out / "simulated.ppm").string(), sim);
  std::cout << "psnr_db " << format_double(psnr(sim, object)) << "\nssim " << format_double(ssim(sim, object)) << '\n';
  if (opt.nsr > 0.0) {
    const Image rec = wiener_reconstruct(sim, kernels, opt.nsr);
    write_pnm((out / "reconstructed.ppm").string(), rec);
    std::cout << "recon_psnr_db " << format_double(psnr(rec, object)) << '\n';
  }
  return kOk;
}

int cmd_ablate(const Common& common, int seeds, const std::vector<std::string>& arm_names) {
  const MaterialCatalog cat = load_catalog(common);
  const RunConfig cfg = load_config(common, cat);
  std::vector<AblationArm> arms;
  for (const auto& n : arm_names) {
    bool found = false;
    for (AblationArm a : all_arms()) {
      if (n == arm_name(a)) {
        arms.push_back(a);
        found = true;
      }
    }
    if (!found) throw CommandError(kUsage, "unknown arm '" + n + "'");
  }
  if (arms.empty()) arms = all_arms();
  std::vector<std::uint64_t> seed_list;
  for (int s = 0; s < seeds; ++s) seed_list.push_back(cfg.design.seed + static_cast<std::uint64_t>(s));
  const fs::path out = prepare_out(cfg.out_dir);
  write_file(out / "config.ini", [&](std::ostream& o) { o << dump_config(cfg); });
  const auto runs = run_ablation(cfg.design, arms, seed_list, [](const AblationRun& r) {
    std::printf("%-16s seed %3llu  success %d  avg %.2f um  min %.2f um  max fail %.3f  %.1f s\n", arm_name(r.arm),
                static_cast<unsigned long long>(r.seed), r.success ? 1 : 0, r.avg_rms_um, r.min_rms_um,
                r.max_failure_fraction, r.seconds);
    std::fflush(stdout);
  });
  const auto summary = summarize(runs);
  write_file(out / "ablation_runs.csv", [&](std::ostream& o) { write_ablation_runs_csv(o, runs); });
  write_file(out / "ablation_summary.csv", [&](std::ostream& o) { write_ablation_summary_csv(o, summary); });
  std::printf("\n%-16s %8s %12s %12s\n", "arm", "success", "avg_rms_um", "min_rms_um");
  for (const auto& s : summary) {
    std::printf("%-16s %7.0f%% %12.2f %12.2f\n", arm_name(s.arm), 100.0 * s.success_rate, s.avg_rms_um,
                s.min_rms_um);
  }
  return kOk;
}

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const CommandError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const InvariantError& e) {
    std::cerr << "invariant violated: " << e.what() << '\n';
    return kInvariant;
  } catch (const PsfError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const AllRaysFailedError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const DistortionError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const NonFiniteError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::domain_error& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lensforge: differentiable lens design"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub, bool design_flags) {
    sub->add_option("--config", common.config_path, "run configuration file")->check(CLI::ExistingFile);
    sub->add_option("--catalog", common.catalog_path, "extra glass catalog")->check(CLI::ExistingFile);
    sub->add_option("--out", common.out_dir, "output directory (overrides run.out)");
    sub->add_option("--seed", common.seed, "seed (overrides run.seed)")->check(CLI::NonNegativeNumber);
    if (design_flags) {
      sub->add_flag("--no-curriculum", common.no_curriculum, "optimize the end target from the start");
      sub->add_flag("--no-reg", common.no_reg, "drop the regularizers");
      sub->add_flag("--no-mask", common.no_mask, "drop the field reweighting mask");
    }
  };

  auto* design_cmd = app.add_subcommand("design", "design a lens from a random flat start");
  add_common(design_cmd, true);

  EvaluateOptions eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "spot, PSF, MTF or distortion analysis of a lens file");
  add_common(eval_cmd, false);
  eval_cmd->add_option("lens", eval.lens, "lens file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--mode", eval.mode, "spots, psf, mtf or distortion")
      ->check(CLI::IsMember({"spots", "psf", "mtf", "distortion"}));
  eval_cmd->add_option("--fields", eval.fields, "spot fields (perfect square)");
  eval_cmd->add_option("--spp", eval.spp, "rays per field and wavelength");
  eval_cmd->add_option("--grid", eval.grid, "PSF sites per axis");
  eval_cmd->add_option("--kernel", eval.kernel, "PSF taps per axis (odd)");
  eval_cmd->add_option("--depth", eval.depth, "object depth in mm (default infinity)");
  eval_cmd->add_option("--samples", eval.samples, "distortion fit samples");

  std::string edof_lens;
  auto* edof_cmd = app.add_subcommand("edof", "extended depth of field from a classical lens");
  add_common(edof_cmd, false);
  edof_cmd->add_option("lens", edof_lens, "starting lens file")->required()->check(CLI::ExistingFile);

  RenderOptions render;
  auto* render_cmd = app.add_subcommand("render", "simulate the image of a chart or PGM/PPM file");
  add_common(render_cmd, false);
  render_cmd->add_option("lens", render.lens, "lens file")->required()->check(CLI::ExistingFile);
  render_cmd->add_option("--input", render.input, "binary PGM or PPM object")->check(CLI::ExistingFile);
  render_cmd->add_option("--depth", render.depth, "object depth in mm (default infinity)");
  render_cmd->add_option("--resolution", render.resolution, "chart size when no input is given");
  render_cmd->add_option("--grid", render.grid, "PSF sites per axis");
  render_cmd->add_option("--kernel", render.kernel, "PSF taps per axis (odd)");
  render_cmd->add_option("--spp", render.spp, "rays per PSF site and wavelength");
  render_cmd->add_option("--wiener", render.nsr, "also reconstruct with this noise-to-signal ratio");

  int ablate_seeds = 10;
  std::vector<std::string> ablate_arms;
  auto* ablate_cmd = app.add_subcommand("ablate", "design over several seeds with parts switched off");
  add_common(ablate_cmd, false);
  ablate_cmd->add_option("--seeds", ablate_seeds, "number of seeds, counting up from --seed")
      ->check(CLI::PositiveNumber);
  ablate_cmd->add_option("--arms", ablate_arms,
                         "full, baseline, curriculum_only, reg_only, curriculum_reg (default all)");

  auto* reference_cmd = app.add_subcommand("config-reference", "print every config key with its default");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  if (*reference_cmd) {
    std::cout << config_reference();
    return kOk;
  }
  if (*design_cmd) return guarded([&] { return cmd_design(common); });
  if (*eval_cmd) return guarded([&] { return cmd_evaluate(common, eval); });
  if (*edof_cmd) return guarded([&] { return cmd_edof(common, edof_lens); });
  if (*render_cmd) return guarded([&] { return cmd_render(common, render); });
  if (*ablate_cmd) return guarded([&] { return cmd_ablate(common, ablate_seeds, ablate_arms); });
  return kUsage;
}
