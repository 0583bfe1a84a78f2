#include "lensforge/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "lensforge/raytrace.hpp"

namespace lensforge {

ParseError::ParseError(int line, int column, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
                         message),
      line_(line),
      column_(column) {}

std::string format_double(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, r.ptr);
}

namespace {

struct Token {
  std::string_view text;
  int column = 1;  // 1-based
};

std::vector<Token> tokenize(std::string_view line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size() || line[i] == '#') break;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    out.push_back({line.substr(start, i - start), static_cast<int>(start) + 1});
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

double parse_number(std::string_view s, int line, int column) {
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && s.front() == '+') ++first;
  const auto r = std::from_chars(first, s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ParseError(line, column, "expected a finite number, got '" + std::string(s) + "'");
  }
  return v;
}

int parse_int(std::string_view s, int line, int column) {
  int v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw ParseError(line, column, "expected an integer, got '" + std::string(s) + "'");
  }
  return v;
}

struct KeyValue {
  std::string_view key;
  std::string_view value;
  int column = 1;
  int value_column = 1;
};

KeyValue split_kv(const Token& t, int line) {
  const std::size_t eq = t.text.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ParseError(line, t.column, "expected key=value, got '" + std::string(t.text) + "'");
  }
  return {t.text.substr(0, eq), t.text.substr(eq + 1), t.column, t.column + static_cast<int>(eq) + 1};
}

// Polynomial slot keys: a2, a4, ... for even terms, x3, x5, ... and y3, y5, ... for odd terms.
bool poly_slot(std::string_view key, char prefix, int first, std::size_t& slot) {
  if (key.size() < 2 || key[0] != prefix) return false;
  int power = 0;
  const auto r = std::from_chars(key.data() + 1, key.data() + key.size(), power);
  if (r.ec != std::errc() || r.ptr != key.data() + key.size()) return false;
  if (power < first || (power - first) % 2 != 0) return false;
  slot = static_cast<std::size_t>((power - first) / 2);
  return true;
}

void put_slot(std::vector<double>& v, std::size_t slot, double x) {
  if (v.size() <= slot) v.resize(slot + 1, 0.0);
  v[slot] = x;
}

}  // namespace

std::string serialize_lens(const LensSystem<double>& system, const Provenance& provenance) {
  std::ostringstream out;
  out << "lensforge-lens v1\n";
  if (!provenance.empty()) {
    out << "provenance";
    for (const auto& [k, v] : provenance) out << ' ' << k << '=' << v;
    out << '\n';
  }
  out << "wavelengths";
  for (double w : system.wavelengths) out << ' ' << format_double(w);
  out << '\n';
  std::set<std::string> written;
  for (const auto& s : system.surfaces) {
    if (s.material.is_air() && s.material.name == "air") continue;
    if (!written.insert(s.material.name).second) continue;
    out << "material " << s.material.name << " A=" << format_double(s.material.a)
        << " B=" << format_double(s.material.b) << '\n';
  }
  for (const auto& s : system.surfaces) {
    out << "surf " << surface_type_name(s.type) << " c=" << format_double(s.curvature)
        << " k=" << format_double(s.conic);
    for (std::size_t j = 0; j < s.even.size(); ++j) out << " a" << 2 * j + 2 << '=' << format_double(s.even[j]);
    for (std::size_t i = 0; i < s.odd_x.size(); ++i) out << " x" << 2 * i + 3 << '=' << format_double(s.odd_x[i]);
    for (std::size_t i = 0; i < s.odd_y.size(); ++i) out << " y" << 2 * i + 3 << '=' << format_double(s.odd_y[i]);
    out << " z=" << format_double(s.z) << " sd=" << format_double(s.semi_diameter) << " mat=" << s.material.name;
    if (s.is_stop) out << " stop";
    out << '\n';
  }
  out << "sensor z=" << format_double(system.sensor_z) << " diag=" << format_double(system.sensor_diagonal)
      << " res=" << system.sensor_width << 'x' << system.sensor_height << '\n';
  return out.str();
}

LensFile parse_lens(std::string_view text, const MaterialCatalog& catalog) {
  LensFile out;
  LensSystem<double>& sys = out.system;
  std::map<std::string, Material> local;
  bool header = false, sensor = false;
  int stop_line = 0;
  int last_line = 0;
  const auto lines = split_lines(text);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const int ln = static_cast<int>(li) + 1;
    last_line = ln;
    const auto tokens = tokenize(lines[li]);
    if (tokens.empty()) continue;
    const std::string_view head = tokens[0].text;
    if (!header) {
      if (head != "lensforge-lens") throw ParseError(ln, tokens[0].column, "missing 'lensforge-lens' header");
      if (tokens.size() != 2 || tokens[1].text != "v1") {
        const int col = tokens.size() > 1 ? tokens[1].column : tokens[0].column;
        throw ParseError(ln, col, "unsupported lens file version");
      }
      header = true;
      continue;
    }
    if (sensor) throw ParseError(ln, tokens[0].column, "content after the sensor line");
    if (head == "provenance") {
      for (std::size_t i = 1; i < tokens.size(); ++i) {
        const KeyValue kv = split_kv(tokens[i], ln);
        out.provenance[std::string(kv.key)] = std::string(kv.value);
      }
    } else if (head == "wavelengths") {
      if (tokens.size() < 2) throw ParseError(ln, tokens[0].column, "no wavelengths given");
      sys.wavelengths.clear();
      for (std::size_t i = 1; i < tokens.size(); ++i) {
        const double w = parse_number(tokens[i].text, ln, tokens[i].column);
        if (!(w > 0.0)) throw ParseError(ln, tokens[i].column, "wavelength must be positive");
        sys.wavelengths.push_back(w);
      }
    } else if (head == "material") {
      if (tokens.size() != 4) throw ParseError(ln, tokens[0].column, "expected: material <name> A=<a> B=<b>");
      Material m;
      m.name = std::string(tokens[1].text);
      bool has_a = false, has_b = false;
      for (std::size_t i = 2; i < 4; ++i) {
        const KeyValue kv = split_kv(tokens[i], ln);
        const double v = parse_number(kv.value, ln, kv.value_column);
        if (kv.key == "A") {
          m.a = v;
          has_a = true;
        } else if (kv.key == "B") {
          m.b = v;
          has_b = true;
        } else {
          throw ParseError(ln, kv.column, "unknown material key '" + std::string(kv.key) + "'");
        }
      }
      if (!has_a || !has_b) throw ParseError(ln, tokens[0].column, "material needs A= and B=");
      local[m.name] = m;
    } else if (head == "surf") {
      if (tokens.size() < 2) throw ParseError(ln, tokens[0].column, "missing surface type");
      Surface<double> s;
      const std::string_view type = tokens[1].text;
      if (type == "aspheric") {
        s.type = SurfaceType::kAspheric;
      } else if (type == "hybrid") {
        s.type = SurfaceType::kHybrid;
      } else if (type == "stop") {
        s.type = SurfaceType::kStop;
      } else {
        throw ParseError(ln, tokens[1].column, "unknown surface type '" + std::string(type) + "'");
      }
      bool has_z = false, has_sd = false;
      std::string mat = "air";
      int mat_column = tokens[0].column;
      for (std::size_t i = 2; i < tokens.size(); ++i) {
        if (tokens[i].text == "stop") {
          s.is_stop = true;
          continue;
        }
        const KeyValue kv = split_kv(tokens[i], ln);
        std::size_t slot = 0;
        if (kv.key == "mat") {
          mat = std::string(kv.value);
          mat_column = kv.value_column;
          continue;
        }
        const double v = parse_number(kv.value, ln, kv.value_column);
        if (kv.key == "c") {
          s.curvature = v;
        } else if (kv.key == "k") {
          s.conic = v;
        } else if (kv.key == "z") {
          s.z = v;
          has_z = true;
        } else if (kv.key == "sd") {
          s.semi_diameter = v;
          has_sd = true;
        } else if (poly_slot(kv.key, 'a', 2, slot)) {
          put_slot(s.even, slot, v);
        } else if (poly_slot(kv.key, 'x', 3, slot)) {
          put_slot(s.odd_x, slot, v);
        } else if (poly_slot(kv.key, 'y', 3, slot)) {
          put_slot(s.odd_y, slot, v);
        } else {
          throw ParseError(ln, kv.column, "unknown surface key '" + std::string(kv.key) + "'");
        }
      }
      if (!has_z) throw ParseError(ln, tokens[0].column, "surface without z=");
      if (!has_sd) throw ParseError(ln, tokens[0].column, "surface without sd=");
      if (s.type != SurfaceType::kHybrid && s.has_odd_terms()) {
        throw ParseError(ln, tokens[1].column, "odd terms require a hybrid surface");
      }
      if (s.type == SurfaceType::kStop) s.is_stop = true;
      if (auto it = local.find(mat); it != local.end()) {
        s.material = it->second;
      } else if (auto m = catalog.find(mat)) {
        s.material = *m;
      } else {
        throw ParseError(ln, mat_column, "unknown material '" + mat + "'");
      }
      if (s.is_stop) {
        if (stop_line != 0) {
          throw ParseError(ln, tokens[0].column,
                           "second aperture stop (first on line " + std::to_string(stop_line) + ")");
        }
        stop_line = ln;
      }
      if (!sys.surfaces.empty() && !(s.z > sys.surfaces.back().z)) {
        throw ParseError(ln, tokens[0].column, "surface positions must increase");
      }
      sys.surfaces.push_back(std::move(s));
    } else if (head == "sensor") {
      bool has_z = false, has_diag = false, has_res = false;
      for (std::size_t i = 1; i < tokens.size(); ++i) {
        const KeyValue kv = split_kv(tokens[i], ln);
        if (kv.key == "z") {
          sys.sensor_z = parse_number(kv.value, ln, kv.value_column);
          has_z = true;
        } else if (kv.key == "diag") {
          sys.sensor_diagonal = parse_number(kv.value, ln, kv.value_column);
          has_diag = true;
        } else if (kv.key == "res") {
          const std::size_t x = kv.value.find('x');
          if (x == std::string_view::npos) throw ParseError(ln, kv.value_column, "expected res=<w>x<h>");
          sys.sensor_width = parse_int(kv.value.substr(0, x), ln, kv.value_column);
          sys.sensor_height = parse_int(kv.value.substr(x + 1), ln, kv.value_column + static_cast<int>(x) + 1);
          if (sys.sensor_width < 1 || sys.sensor_height < 1) {
            throw ParseError(ln, kv.value_column, "resolution must be positive");
          }
          has_res = true;
        } else {
          throw ParseError(ln, kv.column, "unknown sensor key '" + std::string(kv.key) + "'");
        }
      }
      if (!has_z || !has_diag || !has_res) throw ParseError(ln, tokens[0].column, "sensor needs z=, diag= and res=");
      if (!sys.surfaces.empty() && !(sys.sensor_z > sys.surfaces.back().z)) {
        throw ParseError(ln, tokens[0].column, "sensor must lie behind the last surface");
      }
      sensor = true;
    } else {
      throw ParseError(ln, tokens[0].column, "unknown record '" + std::string(head) + "'");
    }
  }
  if (!header) throw ParseError(1, 1, "empty lens file");
  if (!sensor) throw ParseError(last_line + 1, 1, "missing sensor line");
  sys.renumber();
  try {
    validate(sys);
  } catch (const InvariantError& e) {
    throw ParseError(last_line, 1, e.what());
  }
  return out;
}

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace

LensFile read_lens_file(const std::string& path, const MaterialCatalog& catalog) {
  return parse_lens(read_text(path), catalog);
}

void write_lens_file(const std::string& path, const LensSystem<double>& system, const Provenance& provenance) {
  write_text(path, serialize_lens(system, provenance));
}

void parse_catalog(std::string_view text, MaterialCatalog& catalog) {
  const auto lines = split_lines(text);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const int ln = static_cast<int>(li) + 1;
    const auto tokens = tokenize(lines[li]);
    if (tokens.empty()) continue;
    if (tokens[0].text != "glass") throw ParseError(ln, tokens[0].column, "expected 'glass'");
    if (tokens.size() != 4) throw ParseError(ln, tokens[0].column, "expected: glass <name> A=<a> B=<b> or nd=<n> V=<v>");
    const std::string name(tokens[1].text);
    if (name == "air") throw ParseError(ln, tokens[1].column, "'air' cannot be redefined");
    std::map<std::string, double> kv;
    for (std::size_t i = 2; i < 4; ++i) {
      const KeyValue p = split_kv(tokens[i], ln);
      if (p.key != "A" && p.key != "B" && p.key != "nd" && p.key != "V") {
        throw ParseError(ln, p.column, "unknown glass key '" + std::string(p.key) + "'");
      }
      kv[std::string(p.key)] = parse_number(p.value, ln, p.value_column);
    }
    if (kv.count("A") && kv.count("B")) {
      catalog.add(Material{name, kv["A"], kv["B"]});
    } else if (kv.count("nd") && kv.count("V")) {
      if (!(kv["nd"] > 1.0) || !(kv["V"] > 0.0)) throw ParseError(ln, tokens[2].column, "need nd > 1 and V > 0");
      catalog.add(material_from_abbe(name, kv["nd"], kv["V"]));
    } else {
      throw ParseError(ln, tokens[2].column, "give either A= and B= or nd= and V=");
    }
  }
}

void read_catalog_file(const std::string& path, MaterialCatalog& catalog) {
  parse_catalog(read_text(path), catalog);
}

void write_pnm(const std::string& path, const Image& image, int bits) {
  if (bits != 8 && bits != 16) throw std::invalid_argument("PNM bit depth must be 8 or 16");
  if (image.channel_count() == 0) throw std::invalid_argument("empty image");
  const bool color = image.channel_count() == 3;
  const int h = image.rows(), w = image.cols();
  const int maxval = bits == 8 ? 255 : 65535;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << (color ? "P6" : "P5") << '\n' << w << ' ' << h << '\n' << maxval << '\n';
  std::string data;
  data.reserve(static_cast<std::size_t>(w) * h * (color ? 3 : 1) * (bits / 8));
  auto put = [&](double v) {
    if (!std::isfinite(v)) v = 0.0;
    const auto q = static_cast<unsigned>(std::lround(std::clamp(v, 0.0, 1.0) * maxval));
    if (bits == 16) data.push_back(static_cast<char>(q >> 8));
    data.push_back(static_cast<char>(q & 0xff));
  };
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (color) {
        for (int ch = 0; ch < 3; ++ch) put(image.channels[static_cast<std::size_t>(ch)](r, c));
      } else {
        double s = 0.0;
        for (const auto& p : image.channels) s += p(r, c);
        put(s / image.channel_count());
      }
    }
  }
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

Image read_pnm(const std::string& path) {
  const std::string bytes = read_text(path);
  std::size_t pos = 0;
  auto next_token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return bytes.substr(start, pos - start);
  };
  const std::string magic = next_token();
  if (magic != "P5" && magic != "P6") throw std::runtime_error(path + ": not a binary PGM/PPM file");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_token());
    h = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw std::runtime_error(path + ": malformed PNM header");
  }
  if (w < 1 || h < 1 || maxval < 1 || maxval > 65535) throw std::runtime_error(path + ": bad PNM dimensions");
  ++pos;  // single whitespace byte after maxval
  const int nc = magic == "P6" ? 3 : 1;
  const int bpv = maxval > 255 ? 2 : 1;
  if (bytes.size() < pos + static_cast<std::size_t>(w) * h * nc * bpv) {
    throw std::runtime_error(path + ": truncated pixel data");
  }
  Image img(nc, h, w);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      for (int ch = 0; ch < nc; ++ch) {
        unsigned v = *p++;
        if (bpv == 2) v = (v << 8) | *p++;
        img.channels[static_cast<std::size_t>(ch)](r, c) = static_cast<double>(v) / maxval;
      }
    }
  }
  return img;
}

Image psf_mosaic(const PsfGrid& kernels) {
  const int g = kernels.grid, k = kernels.kernel, cell = k + 1;
  const int side = g * cell - 1;
  Image out(kernels.wavelengths, side, side);
  for (int s = 0; s < kernels.sites(); ++s) {
    const int r0 = (s / g) * cell, c0 = (s % g) * cell;
    for (int w = 0; w < kernels.wavelengths; ++w) {
      const auto& taps = kernels.at(s, w);
      const double peak = *std::max_element(taps.begin(), taps.end());
      if (!(peak > 0.0)) continue;
      for (int r = 0; r < k; ++r) {
        for (int c = 0; c < k; ++c) {
          out.channels[static_cast<std::size_t>(w)](r0 + r, c0 + c) =
              taps[static_cast<std::size_t>(r * k + c)] / peak;
        }
      }
    }
  }
  return out;
}

Image spot_diagram(const LensSystem<double>& system, int fields, int spp, int size, double span_mm) {
  if (fields < 1 || spp < 1 || size < 2 || !(span_mm > 0.0)) throw std::invalid_argument("bad spot diagram size");
  const int nw = static_cast<int>(system.wavelengths.size());
  Image out(nw, size, fields * size);
  const double scale = paraxial_image_scale(system, system.primary_wavelength());
  const double half_diag = 0.5 * system.sensor_diagonal;
  for (int f = 0; f < fields; ++f) {
    // Fields along the diagonal, on axis to 90% of the corner.
    const double frac = fields == 1 ? 0.0 : 0.9 * f / (fields - 1);
    const double t = frac * half_diag / scale / std::sqrt(2.0);
    const Field field{t, t};
    std::vector<std::vector<Vec2<double>>> hits(static_cast<std::size_t>(nw));
    Vec2<double> center = Vec2<double>::Zero();
    int count = 0;
    for (int w = 0; w < nw; ++w) {
      const double wl = system.wavelengths[static_cast<std::size_t>(w)];
      for (const auto& ray : sample_rays(system, field, wl, spp, PupilPattern::kGrid, 0)) {
        const auto tr = trace(system, system, ray);
        if (!tr.valid()) continue;
        hits[static_cast<std::size_t>(w)].push_back(tr.sensor);
        center += tr.sensor;
        ++count;
      }
    }
    if (count == 0) continue;
    center /= count;
    for (int w = 0; w < nw; ++w) {
      for (const auto& h : hits[static_cast<std::size_t>(w)]) {
        const int c = static_cast<int>(std::floor(((h.x() - center.x()) / span_mm + 0.5) * size));
        const int r = static_cast<int>(std::floor((0.5 - (h.y() - center.y()) / span_mm) * size));
        if (r < 0 || r >= size || c < 0 || c >= size) continue;
        out.channels[static_cast<std::size_t>(w)](r, f * size + c) = 1.0;
      }
    }
  }
  return out;
}

void write_log_csv(std::ostream& out, const std::vector<EpochLog>& log) {
  out << "step,epoch,fov_deg,f_number,alpha,loss,image_loss,focal_loss,angle_loss,dist_loss,shape_loss,"
         "avg_rms_um,efl_mm,failure_fraction,self_intersecting,lr_scale,rolled_back\n";
  for (const auto& e : log) {
    out << e.step << ',' << e.epoch << ',' << format_double(e.fov_deg) << ',' << format_double(e.f_number) << ','
        << format_double(e.alpha) << ',' << format_double(e.loss) << ',' << format_double(e.image_loss) << ','
        << format_double(e.focal_loss) << ',' << format_double(e.angle_loss) << ',' << format_double(e.dist_loss)
        << ',' << format_double(e.shape_loss) << ',' << format_double(e.avg_rms_um) << ','
        << format_double(e.efl) << ',' << format_double(e.failure_fraction) << ',' << (e.self_intersecting ? 1 : 0)
        << ',' << format_double(e.lr_scale) << ',' << (e.rolled_back ? 1 : 0) << '\n';
  }
}

void write_depth_quality_csv(std::ostream& out, const std::vector<DepthQuality>& before,
                             const std::vector<DepthQuality>& after) {
  if (before.size() != after.size()) throw std::invalid_argument("before/after depth lists differ");
  out << "depth_mm,psnr_raw_before_db,psnr_recon_before_db,psnr_raw_after_db,psnr_recon_after_db\n";
  for (std::size_t i = 0; i < before.size(); ++i) {
    out << format_double(before[i].depth) << ',' << format_double(before[i].psnr_raw) << ','
        << format_double(before[i].psnr_recon) << ',' << format_double(after[i].psnr_raw) << ','
        << format_double(after[i].psnr_recon) << '\n';
  }
}

void write_edof_log_csv(std::ostream& out, const std::vector<EdofEpoch>& log) {
  out << "epoch,loss,depth_variance,rolled_back\n";
  for (const auto& e : log) {
    out << e.epoch << ',' << format_double(e.loss) << ',' << format_double(e.depth_variance) << ','
        << (e.rolled_back ? 1 : 0) << '\n';
  }
}

void write_mtf_depth_csv(std::ostream& out, const std::vector<PsfGrid>& kernels, const std::vector<double>& depths,
                         double pitch_mm, int wavelength_index) {
  if (kernels.size() != depths.size()) throw std::invalid_argument("one kernel grid per depth required");
  if (kernels.empty()) return;
  const PsfGrid& first = kernels[0];
  if (wavelength_index < 0 || wavelength_index >= first.wavelengths) {
    throw std::out_of_range("wavelength index out of range");
  }
  // Fractions of the sensor Nyquist frequency.
  const double nyquist = 0.5 / pitch_mm;
  const std::vector<double> fractions{0.125, 0.25, 0.5, 0.75, 1.0};
  out << "depth_mm";
  for (double f : fractions) out << ",mtf_" << format_double(f * nyquist) << "_lpmm";
  out << '\n';
  // Site nearest the sensor center.
  const int g = first.grid;
  const int site = (g / 2) * g + g / 2;
  for (std::size_t d = 0; d < kernels.size(); ++d) {
    const auto& taps = kernels[d].at(site, wavelength_index);
    const int k = kernels[d].kernel;
    PsfKernel pk;
    pk.weights.resize(k, k);
    for (int r = 0; r < k; ++r)
      for (int c = 0; c < k; ++c) pk.weights(r, c) = taps[static_cast<std::size_t>(r * k + c)];
    pk.pitch_um = pitch_mm * 1e3;
    const MtfCurve curve = geometric_mtf(pk, MtfAxis::kX, 8);
    out << format_double(depths[d]);
    for (double f : fractions) {
      const double target = f * nyquist;
      double v = curve.contrast.empty() ? 0.0 : curve.contrast.back();
      for (std::size_t i = 1; i < curve.frequency.size(); ++i) {
        if (curve.frequency[i] >= target) {
          const double t = (target - curve.frequency[i - 1]) / (curve.frequency[i] - curve.frequency[i - 1]);
          v = curve.contrast[i - 1] + t * (curve.contrast[i] - curve.contrast[i - 1]);
          break;
        }
      }
      out << ',' << format_double(v);
    }
    out << '\n';
  }
}

}  // namespace lensforge
