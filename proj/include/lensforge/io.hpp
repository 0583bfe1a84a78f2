// Lens files, glass catalogs, portable pixmaps and CSV exports.
#pragma once

#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lensforge/curriculum.hpp"
#include "lensforge/edof.hpp"
#include "lensforge/image.hpp"
#include "lensforge/material.hpp"
#include "lensforge/metrics.hpp"

namespace lensforge {

inline constexpr const char* kVersion = "0.1.0";

/// Parse failure with a 1-based source position.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int column, const std::string& message);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// Key/value pairs recorded with a produced file (seed, config hash, ...).
using Provenance = std::map<std::string, std::string>;

struct LensFile {
  LensSystem<double> system;
  Provenance provenance;
};

/// Shortest decimal form that parses back to the same double.
std::string format_double(double x);

/// Text form, `lensforge-lens v1`. Every non-air material used is written
/// out with its Cauchy coefficients so the file is self-contained.
std::string serialize_lens(const LensSystem<double>& system, const Provenance& provenance = {});

/// Materials come from `catalog` unless the file defines them. Throws
/// ParseError for syntax errors, an unknown version, non-increasing
/// positions, unknown materials or a second stop surface.
LensFile parse_lens(std::string_view text, const MaterialCatalog& catalog = MaterialCatalog());

LensFile read_lens_file(const std::string& path, const MaterialCatalog& catalog = MaterialCatalog());
void write_lens_file(const std::string& path, const LensSystem<double>& system,
                     const Provenance& provenance = {});

/// Glass catalog text: `glass <name> A=<a> B=<b>` or `glass <name> nd=<n> V=<abbe>`
/// per line, `#` comments. Entries are added to `catalog`.
void parse_catalog(std::string_view text, MaterialCatalog& catalog);
void read_catalog_file(const std::string& path, MaterialCatalog& catalog);

/// Binary PGM (one channel) or PPM (three channels); other channel counts
/// write the mean as PGM. Values are clamped to [0, 1]; bits is 8 or 16.
void write_pnm(const std::string& path, const Image& image, int bits = 8);
Image read_pnm(const std::string& path);

/// Kernel grid as one image per wavelength channel: sites tiled row-major,
/// each kernel scaled to its own peak, one-pixel gaps.
Image psf_mosaic(const PsfGrid& kernels);

/// Sensor hits of a few fields drawn into an image of size x size pixels,
/// `span_mm` wide around each field's centroid, fields side by side.
Image spot_diagram(const LensSystem<double>& system, int fields, int spp, int size, double span_mm);

void write_log_csv(std::ostream& out, const std::vector<EpochLog>& log);
void write_depth_quality_csv(std::ostream& out, const std::vector<DepthQuality>& before,
                             const std::vector<DepthQuality>& after);
void write_edof_log_csv(std::ostream& out, const std::vector<EdofEpoch>& log);

/// Contrast at a few spatial frequencies for each depth (on-axis site,
/// primary wavelength): columns depth_mm then one column per frequency.
void write_mtf_depth_csv(std::ostream& out, const std::vector<PsfGrid>& kernels,
                         const std::vector<double>& depths, double pitch_mm, int wavelength_index);

}  // namespace lensforge
