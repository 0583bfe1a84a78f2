// Run configuration: INI-style sections of key = value lines.
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "lensforge/curriculum.hpp"
#include "lensforge/edof.hpp"
#include "lensforge/io.hpp"

namespace lensforge {

struct RunConfig {
  DesignConfig design;
  EdofConfig edof;
  // Curriculum start target relative to the end target.
  double start_fov_scale = 0.6;
  double start_f_number_scale = 1.4;
  double edof_focus_depth = 200.0;  // mm, classical lens refocused here before EDoF
  std::string out_dir = "out";

  RunConfig();

  /// Derives the curriculum start target and copies the seed to the EDoF
  /// stage. Called by parse_config.
  void resolve();
};

struct ConfigKey {
  std::string section;
  std::string name;
  std::string doc;
};

/// Every accepted key with its documentation, in canonical order.
const std::vector<ConfigKey>& config_keys();

/// Defaults overridden by `text`. Glass names resolve against `catalog`.
/// Unknown sections or keys, malformed values and repeated keys throw
/// ParseError; the resulting config is validated as a whole.
RunConfig parse_config(std::string_view text, const MaterialCatalog& catalog = MaterialCatalog());
RunConfig read_config_file(const std::string& path, const MaterialCatalog& catalog = MaterialCatalog());

/// Every key with its current value, one section after another. Parsing
/// the dump gives back the same config.
std::string dump_config(const RunConfig& config);

/// FNV-1a 64 of dump_config, as 16 hex digits.
std::string config_hash(const RunConfig& config);

/// Reference text listing every key, its default and its meaning.
std::string config_reference();

}  // namespace lensforge
