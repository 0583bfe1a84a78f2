#include "lensforge/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace lensforge {

RunConfig::RunConfig() {
  design.schedule = CurriculumSchedule::toward(DesignTarget{}, 4, 200);
  edof.initial_cubic = 0.002;
  edof.chart_period = 8;
  edof.refine_lens = true;
  edof.epochs = 200;
  resolve();
}

void RunConfig::resolve() {
  CurriculumSchedule& s = design.schedule;
  s.start = s.end;
  s.start.fov_deg = start_fov_scale * s.end.fov_deg;
  s.start.f_number = start_f_number_scale * s.end.f_number;
  edof.seed = design.seed;
  edof.psf.seed = design.seed;
}

namespace {

struct Cursor {
  int line = 1;
  int column = 1;
};

[[noreturn]] void fail(const Cursor& at, const std::string& message) {
  throw ParseError(at.line, at.column, message);
}

double to_double(std::string_view s, const Cursor& at) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v)) {
    fail(at, "expected a number, got '" + std::string(s) + "'");
  }
  return v;
}

template <typename Int>
Int to_int(std::string_view s, const Cursor& at) {
  Int v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    fail(at, "expected an integer, got '" + std::string(s) + "'");
  }
  return v;
}

bool to_bool(std::string_view s, const Cursor& at) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  fail(at, "expected true or false, got '" + std::string(s) + "'");
}

std::vector<std::string_view> words(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == ',')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != ',') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

const char* pattern_name(PupilPattern p) {
  switch (p) {
    case PupilPattern::kGrid:
      return "grid";
    case PupilPattern::kFibonacci:
      return "fibonacci";
    case PupilPattern::kRandom:
      return "random";
  }
  return "grid";
}

PupilPattern to_pattern(std::string_view s, const Cursor& at) {
  if (s == "grid") return PupilPattern::kGrid;
  if (s == "fibonacci") return PupilPattern::kFibonacci;
  if (s == "random") return PupilPattern::kRandom;
  fail(at, "expected grid, fibonacci or random, got '" + std::string(s) + "'");
}

struct Entry {
  ConfigKey key;
  std::function<void(RunConfig&, std::string_view, const Cursor&, const MaterialCatalog&)> set;
  std::function<std::string(const RunConfig&)> get;
};

using DoubleRef = std::function<double&(RunConfig&)>;
using IntRef = std::function<int&(RunConfig&)>;
using BoolRef = std::function<bool&(RunConfig&)>;

// The getters take a const config; the accessors are written once for the
// mutable case and reused through const_cast.
Entry real(const char* section, const char* name, const char* doc, DoubleRef ref) {
  return {{section, name, doc},
          [ref](RunConfig& c, std::string_view v, const Cursor& at, const MaterialCatalog&) {
            ref(c) = to_double(v, at);
          },
          [ref](const RunConfig& c) { return format_double(ref(const_cast<RunConfig&>(c))); }};
}

Entry integer(const char* section, const char* name, const char* doc, IntRef ref) {
  return {{section, name, doc},
          [ref](RunConfig& c, std::string_view v, const Cursor& at, const MaterialCatalog&) {
            ref(c) = to_int<int>(v, at);
          },
          [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); }};
}

Entry flag(const char* section, const char* name, const char* doc, BoolRef ref) {
  return {{section, name, doc},
          [ref](RunConfig& c, std::string_view v, const Cursor& at, const MaterialCatalog&) {
            ref(c) = to_bool(v, at);
          },
          [ref](const RunConfig& c) { return std::string(ref(const_cast<RunConfig&>(c)) ? "true" : "false"); }};
}

Entry pattern(const char* section, const char* name, const char* doc, std::function<PupilPattern&(RunConfig&)> ref) {
  return {{section, name, doc},
          [ref](RunConfig& c, std::string_view v, const Cursor& at, const MaterialCatalog&) {
            ref(c) = to_pattern(v, at);
          },
          [ref](const RunConfig& c) { return std::string(pattern_name(ref(const_cast<RunConfig&>(c)))); }};
}

Entry lr(const char* name, const char* doc, ParamGroup g) {
  return real("optimizer", name, doc,
              [g](RunConfig& c) -> double& { return c.design.adam.lr[static_cast<std::size_t>(g)]; });
}

std::vector<Entry> build_entries() {
  std::vector<Entry> e;
  // target
  e.push_back(real("target", "fov_deg", "full diagonal field of view (deg)",
                   [](RunConfig& c) -> double& { return c.design.schedule.end.fov_deg; }));
  e.push_back(real("target", "f_number", "F-number",
                   [](RunConfig& c) -> double& { return c.design.schedule.end.f_number; }));
  e.push_back(real("target", "focal_length", "effective focal length (mm)",
                   [](RunConfig& c) -> double& { return c.design.schedule.end.focal_length; }));
  e.push_back(real("target", "sensor_diagonal", "sensor diagonal (mm), 0 = 2 f tan(fov / 2)",
                   [](RunConfig& c) -> double& { return c.design.schedule.end.sensor_diagonal; }));
  // curriculum
  e.push_back(flag("curriculum", "enabled", "ramp the target from the start target; off = end target throughout",
                   [](RunConfig& c) -> bool& { return c.design.use_curriculum; }));
  e.push_back(integer("curriculum", "steps", "number of curriculum steps",
                      [](RunConfig& c) -> int& { return c.design.schedule.steps; }));
  e.push_back(integer("curriculum", "epochs_per_step", "epochs per step (without curriculum: steps x this, one stage)",
                      [](RunConfig& c) -> int& { return c.design.schedule.epochs_per_step; }));
  e.push_back(integer("curriculum", "finetune_epochs", "epochs of the rendering fine-tune stage",
                      [](RunConfig& c) -> int& { return c.design.schedule.finetune_epochs; }));
  e.push_back(real("curriculum", "start_fov_scale", "start field of view as a fraction of the target",
                   [](RunConfig& c) -> double& { return c.start_fov_scale; }));
  e.push_back(real("curriculum", "start_f_number_scale", "start F-number as a multiple of the target",
                   [](RunConfig& c) -> double& { return c.start_f_number_scale; }));
  e.push_back(real("curriculum", "alpha_start", "distortion weight at the start of the fine-tune",
                   [](RunConfig& c) -> double& { return c.design.schedule.alpha_start; }));
  e.push_back(real("curriculum", "alpha_end", "distortion weight at the end of the fine-tune (1 = distortion-free)",
                   [](RunConfig& c) -> double& { return c.design.schedule.alpha_end; }));
  e.push_back(integer("curriculum", "max_rollbacks", "consecutive failed epochs before the run aborts",
                      [](RunConfig& c) -> int& { return c.design.max_rollbacks; }));
  // init
  e.push_back(integer("init", "elements", "number of lens elements",
                      [](RunConfig& c) -> int& { return c.design.init.elements; }));
  e.push_back({{"init", "glasses", "element glasses, cycled (names from the catalog)"},
               [](RunConfig& c, std::string_view v, const Cursor& at, const MaterialCatalog& cat) {
                 std::vector<Material> g;
                 for (auto w : words(v)) {
                   auto m = cat.find(std::string(w));
                   if (!m) fail(at, "unknown glass '" + std::string(w) + "'");
                   g.push_back(*m);
                 }
                 if (g.empty()) fail(at, "no glasses given");
                 c.design.init.glasses = g;
               },
               [](const RunConfig& c) {
                 if (c.design.init.glasses.empty()) return std::string("crown flint");
                 std::string s;
                 for (const auto& m : c.design.init.glasses) s += (s.empty() ? "" : " ") + m.name;
                 return s;
               }});
  e.push_back(real("init", "curvature_range", "random curvatures in +- this (1/mm)",
                   [](RunConfig& c) -> double& { return c.design.init.curvature_range; }));
  e.push_back(real("init", "thickness", "element centre thickness (mm)",
                   [](RunConfig& c) -> double& { return c.design.init.thickness; }));
  e.push_back(real("init", "air_gap", "gap between elements (mm)",
                   [](RunConfig& c) -> double& { return c.design.init.air_gap; }));
  e.push_back(real("init", "stop_gap", "stop to first element (mm)",
                   [](RunConfig& c) -> double& { return c.design.init.stop_gap; }));
  e.push_back(real("init", "track_limit", "maximum stack length (mm), 0 = unlimited",
                   [](RunConfig& c) -> double& { return c.design.init.track_limit; }));
  e.push_back(integer("init", "even_terms", "even coefficient slots per surface (r^2 .. r^(2n))",
                      [](RunConfig& c) -> int& { return c.design.init.even_terms; }));
  // regularizers
  e.push_back(flag("regularizers", "enabled", "add the angle, distance and shape penalties",
                   [](RunConfig& c) -> bool& { return c.design.use_regularizers; }));
  e.push_back(real("regularizers", "eps_angle", "obliquity clamp",
                   [](RunConfig& c) -> double& { return c.design.regularizers.eps_angle; }));
  e.push_back(real("regularizers", "eps_dist_glass", "minimum glass thickness (mm)",
                   [](RunConfig& c) -> double& { return c.design.regularizers.eps_dist_glass; }));
  e.push_back(real("regularizers", "eps_dist_air", "minimum air gap (mm)",
                   [](RunConfig& c) -> double& { return c.design.regularizers.eps_dist_air; }));
  e.push_back(real("regularizers", "eps_shape", "sag slope clamp",
                   [](RunConfig& c) -> double& { return c.design.regularizers.eps_shape; }));
  e.push_back(real("regularizers", "w_angle", "angle penalty weight",
                   [](RunConfig& c) -> double& { return c.design.regularizers.w_angle; }));
  e.push_back(real("regularizers", "w_dist", "distance penalty weight",
                   [](RunConfig& c) -> double& { return c.design.regularizers.w_dist; }));
  e.push_back(real("regularizers", "w_shape", "shape penalty weight",
                   [](RunConfig& c) -> double& { return c.design.regularizers.w_shape; }));
  e.push_back(integer("regularizers", "radial_samples", "radial samples for the distance and shape penalties",
                      [](RunConfig& c) -> int& { return c.design.regularizers.radial_samples; }));
  // mask
  e.push_back(flag("mask", "enabled", "reweight fields whose spot is worse than the threshold",
                   [](RunConfig& c) -> bool& { return c.design.use_mask; }));
  e.push_back(real("mask", "threshold", "fields with RMS below this times the mean RMS get zero weight",
                   [](RunConfig& c) -> double& { return c.design.mask_threshold; }));
  e.push_back(integer("mask", "grid", "mask resolution per axis for the spot loss",
                      [](RunConfig& c) -> int& { return c.design.spot.mask_grid; }));
  // optimizer
  e.push_back(lr("lr_curvature", "Adam step for curvatures (1/mm)", ParamGroup::kCurvature));
  e.push_back(lr("lr_spacing", "Adam step for gaps (mm)", ParamGroup::kSpacing));
  e.push_back(lr("lr_conic", "Adam step for conic constants", ParamGroup::kConic));
  e.push_back(lr("lr_even", "Adam sag step (mm) of even terms at the clear radius", ParamGroup::kEven));
  e.push_back(lr("lr_odd", "Adam sag step (mm) of odd terms at the clear radius", ParamGroup::kOddPoly));
  e.push_back(real("optimizer", "beta1", "first-moment decay",
                   [](RunConfig& c) -> double& { return c.design.adam.beta1; }));
  e.push_back(real("optimizer", "beta2", "second-moment decay",
                   [](RunConfig& c) -> double& { return c.design.adam.beta2; }));
  e.push_back(real("optimizer", "eps", "denominator guard",
                   [](RunConfig& c) -> double& { return c.design.adam.eps; }));
  e.push_back(flag("optimizer", "conic", "optimize conic constants",
                   [](RunConfig& c) -> bool& { return c.design.layout.conic; }));
  e.push_back(integer("optimizer", "even_terms", "optimized even terms per surface, from r^4 up",
                      [](RunConfig& c) -> int& { return c.design.layout.even_terms; }));
  // loss
  e.push_back(integer("loss", "radial_fields", "training fields along the half-diagonal",
                      [](RunConfig& c) -> int& { return c.design.spot.radial_fields; }));
  e.push_back(integer("loss", "spp", "rays per field and wavelength",
                      [](RunConfig& c) -> int& { return c.design.spot.spp; }));
  e.push_back(flag("loss", "squared", "mean square spot radius instead of RMS radius",
                   [](RunConfig& c) -> bool& { return c.design.spot.squared; }));
  e.push_back(pattern("loss", "pattern", "pupil sampling: grid, fibonacci or random",
                      [](RunConfig& c) -> PupilPattern& { return c.design.spot.pattern; }));
  e.push_back(real("loss", "focal_weight", "weight of (f / EFL - 1)^2",
                   [](RunConfig& c) -> double& { return c.design.spot.focal_weight; }));
  e.push_back(flag("loss", "finetune_keep_spot", "fine-tune adds the spot term to the rendering term",
                   [](RunConfig& c) -> bool& { return c.design.image.keep_spot; }));
  // image
  e.push_back(integer("image", "resolution", "square sensor pixel count per axis for rendering",
                      [](RunConfig& c) -> int& { return c.design.image.resolution; }));
  e.push_back(integer("image", "psf_grid", "PSF sites per axis",
                      [](RunConfig& c) -> int& { return c.design.image.psf.grid; }));
  e.push_back(integer("image", "psf_kernel", "PSF taps per axis (odd)",
                      [](RunConfig& c) -> int& { return c.design.image.psf.kernel; }));
  e.push_back(integer("image", "psf_spp", "rays per PSF site and wavelength",
                      [](RunConfig& c) -> int& { return c.design.image.psf.spp; }));
  // report
  e.push_back(integer("report", "fields", "spot report fields (perfect square)",
                      [](RunConfig& c) -> int& { return c.design.report.field_count; }));
  e.push_back(integer("report", "spp", "spot report rays per field and wavelength",
                      [](RunConfig& c) -> int& { return c.design.report.spp; }));
  e.push_back(pattern("report", "pattern", "spot report pupil sampling",
                      [](RunConfig& c) -> PupilPattern& { return c.design.report.pattern; }));
  // edof
  e.push_back({{"edof", "depths", "object depths (mm), at least two"},
               [](RunConfig& c, std::string_view v, const Cursor& at, const MaterialCatalog&) {
                 std::vector<double> d;
                 for (auto w : words(v)) {
                   const double x = to_double(w, at);
                   if (!(x > 0.0)) fail(at, "depths must be positive");
                   d.push_back(x);
                 }
                 c.edof.depths = d;
               },
               [](const RunConfig& c) {
                 std::string s;
                 for (double d : c.edof.depths) s += (s.empty() ? "" : " ") + format_double(d);
                 return s;
               }});
  e.push_back(real("edof", "focus_depth", "depth (mm) the classical lens is refocused to first",
                   [](RunConfig& c) -> double& { return c.edof_focus_depth; }));
  e.push_back(integer("edof", "surface", "surface made hybrid, -1 = first refracting surface",
                      [](RunConfig& c) -> int& { return c.edof.surface; }));
  e.push_back(integer("edof", "odd_terms", "odd terms per axis (x^3, x^5, ...)",
                      [](RunConfig& c) -> int& { return c.edof.odd_terms; }));
  e.push_back(integer("edof", "resolution", "square render size (pixels)",
                      [](RunConfig& c) -> int& { return c.edof.resolution; }));
  e.push_back(integer("edof", "psf_grid", "PSF sites per axis",
                      [](RunConfig& c) -> int& { return c.edof.psf.grid; }));
  e.push_back(integer("edof", "psf_kernel", "PSF taps per axis (odd)",
                      [](RunConfig& c) -> int& { return c.edof.psf.kernel; }));
  e.push_back(integer("edof", "psf_spp", "rays per PSF site and wavelength",
                      [](RunConfig& c) -> int& { return c.edof.psf.spp; }));
  e.push_back(flag("edof", "centroid_centered", "center each kernel on its centroid (blur shape only)",
                   [](RunConfig& c) -> bool& { return c.edof.psf.centroid_centered; }));
  e.push_back(real("edof", "w_sim", "weight of the simulated-image error",
                   [](RunConfig& c) -> double& { return c.edof.weights.w_sim; }));
  e.push_back(real("edof", "w_recon", "weight of the reconstruction error",
                   [](RunConfig& c) -> double& { return c.edof.weights.w_recon; }));
  e.push_back(real("edof", "nsr", "Wiener noise-to-signal ratio",
                   [](RunConfig& c) -> double& { return c.edof.weights.nsr; }));
  e.push_back(integer("edof", "epochs", "optimization epochs, 0 = evaluate only",
                      [](RunConfig& c) -> int& { return c.edof.epochs; }));
  e.push_back(real("edof", "lr", "Adam sag step (mm) of odd terms at the clear radius",
                   [](RunConfig& c) -> double& { return c.edof.lr; }));
  e.push_back(real("edof", "initial_cubic", "start value of zero cubic terms (1/mm^2)",
                   [](RunConfig& c) -> double& { return c.edof.initial_cubic; }));
  e.push_back(integer("edof", "chart_period", "grating period of the training chart (pixels), 0 = automatic",
                      [](RunConfig& c) -> int& { return c.edof.chart_period; }));
  e.push_back(flag("edof", "refine_lens", "also optimize curvatures and gaps",
                   [](RunConfig& c) -> bool& { return c.edof.refine_lens; }));
  e.push_back(integer("edof", "max_rollbacks", "consecutive failed epochs before the run aborts",
                      [](RunConfig& c) -> int& { return c.edof.max_rollbacks; }));
  // run
  e.push_back({{"run", "seed", "seed of the initialization and all ray sampling"},
               [](RunConfig& c, std::string_view v, const Cursor& at, const MaterialCatalog&) {
                 c.design.seed = to_int<std::uint64_t>(v, at);
               },
               [](const RunConfig& c) { return std::to_string(c.design.seed); }});
  e.push_back({{"run", "out", "output directory"},
               [](RunConfig& c, std::string_view v, const Cursor& at, const MaterialCatalog&) {
                 if (v.empty()) fail(at, "empty output directory");
                 c.out_dir = std::string(v);
               },
               [](const RunConfig& c) { return c.out_dir; }});
  return e;
}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> e = build_entries();
  return e;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

void check(const RunConfig& c) {
  c.design.schedule.validate();
  auto positive = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
  };
  positive(c.design.init.elements >= 1, "init.elements must be >= 1");
  positive(c.design.init.even_terms >= 0, "init.even_terms must be >= 0");
  positive(c.design.layout.even_terms >= 0 && c.design.layout.even_terms < std::max(1, c.design.init.even_terms),
           "optimizer.even_terms must be below init.even_terms");
  positive(c.design.spot.radial_fields >= 2 && c.design.spot.spp >= 1, "loss.radial_fields >= 2 and loss.spp >= 1");
  positive(c.design.mask_threshold >= 0.0, "mask.threshold must be >= 0");
  positive(c.design.max_rollbacks >= 1 && c.edof.max_rollbacks >= 1, "max_rollbacks must be >= 1");
  const int f = c.design.report.field_count;
  const int root = static_cast<int>(std::lround(std::sqrt(std::max(f, 0))));
  positive(f >= 1 && root * root == f, "report.fields must be a perfect square");
  positive(c.design.image.psf.kernel % 2 == 1 && c.edof.psf.kernel % 2 == 1, "PSF kernel sizes must be odd");
  positive(c.design.image.psf.grid >= 2 && c.edof.psf.grid >= 2, "PSF grids need >= 2 sites per axis");
  positive(c.edof.depths.size() >= 2, "edof.depths needs at least two depths");
  positive(c.edof.odd_terms >= 1, "edof.odd_terms must be >= 1");
  positive(c.edof.weights.nsr > 0.0, "edof.nsr must be positive");
  positive(c.edof_focus_depth > 0.0, "edof.focus_depth must be positive");
  positive(c.start_fov_scale > 0.0 && c.start_fov_scale <= 1.0, "curriculum.start_fov_scale must be in (0, 1]");
  positive(c.start_f_number_scale >= 1.0, "curriculum.start_f_number_scale must be >= 1");
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const auto& e : entries()) k.push_back(e.key);
    return k;
  }();
  return keys;
}

RunConfig parse_config(std::string_view text, const MaterialCatalog& catalog) {
  RunConfig c;
  std::set<std::string> sections, seen;
  for (const auto& e : entries()) sections.insert(e.key.section);
  std::string section;
  int ln = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view raw = text.substr(start, end - start);
    ++ln;
    start = end + 1;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string_view body = trim(line);
    if (body.empty()) {
      if (end == text.size()) break;
      continue;
    }
    const int col = static_cast<int>(body.data() - raw.data()) + 1;
    if (body.front() == '[') {
      if (body.back() != ']') fail({ln, col}, "unterminated section header");
      section = std::string(trim(body.substr(1, body.size() - 2)));
      if (!sections.count(section)) fail({ln, col + 1}, "unknown section [" + section + "]");
    } else {
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) fail({ln, col}, "expected key = value");
      const std::string key(trim(body.substr(0, eq)));
      const std::string_view value = trim(body.substr(eq + 1));
      const int value_col = static_cast<int>(value.data() - raw.data()) + 1;
      if (section.empty()) fail({ln, col}, "key '" + key + "' outside a section");
      const Entry* found = nullptr;
      for (const auto& e : entries()) {
        if (e.key.section == section && e.key.name == key) found = &e;
      }
      if (!found) fail({ln, col}, "unknown key '" + key + "' in [" + section + "]");
      if (!seen.insert(section + "." + key).second) fail({ln, col}, "repeated key '" + key + "' in [" + section + "]");
      found->set(c, value, {ln, value_col}, catalog);
    }
    if (end == text.size()) break;
  }
  c.resolve();
  try {
    check(c);
  } catch (const std::invalid_argument& e) {
    throw ParseError(ln, 1, e.what());
  }
  return c;
}

RunConfig read_config_file(const std::string& path, const MaterialCatalog& catalog) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), catalog);
}

std::string dump_config(const RunConfig& config) {
  std::ostringstream out;
  std::string section;
  for (const auto& e : entries()) {
    if (e.key.section != section) {
      if (!section.empty()) out << '\n';
      section = e.key.section;
      out << '[' << section << "]\n";
    }
    out << e.key.name << " = " << e.get(config) << '\n';
  }
  return out.str();
}

std::string config_hash(const RunConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : dump_config(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_reference() {
  const RunConfig defaults;
  std::ostringstream out;
  std::string section;
  for (const auto& e : entries()) {
    if (e.key.section != section) {
      if (!section.empty()) out << '\n';
      section = e.key.section;
      out << '[' << section << "]\n";
    }
    out << "# " << e.key.doc << '\n' << e.key.name << " = " << e.get(defaults) << '\n';
  }
  return out.str();
}

}  // namespace lensforge
