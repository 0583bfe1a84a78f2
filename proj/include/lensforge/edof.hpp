// Extended depth of field: turn one surface of a finished design into a
// hybrid surface and optimize its odd terms for depth-invariant blur.
#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "lensforge/image_losses.hpp"
#include "lensforge/optimizer.hpp"
#include "lensforge/params.hpp"

namespace lensforge {

/// Copy of `system` whose surface `surface` (-1 = first refracting surface)
/// is hybrid with `odd_terms` zero coefficients per axis. Existing odd
/// coefficients are kept. Throws std::out_of_range for a bad index or the stop.
LensSystem<double> make_hybrid(const LensSystem<double>& system, int surface, int odd_terms);

/// Paraxial distance from the last surface to the image of an axial point
/// `depth` mm in front of the first surface. Infinite depth gives the BFD.
double paraxial_image_distance(const LensSystem<double>& system, double depth,
                               double wavelength);

/// Sensor moved to the paraxial image of `depth` at the primary wavelength.
LensSystem<double> refocus(const LensSystem<double>& system, double depth);

/// One kernel grid per depth.
std::vector<PsfGrid> depth_kernels(const LensSystem<double>& system, const PsfGridSpec& spec,
                                   const std::vector<double>& depths);

struct DepthQuality {
  double depth = 0.0;       // mm
  double psnr_raw = 0.0;    // simulated capture against the chart
  double psnr_recon = 0.0;  // Wiener reconstruction against the chart
};

/// Capture and reconstruction quality per depth. Reconstruction uses the
/// depth-averaged kernels, as the depth is unknown at capture.
std::vector<DepthQuality> depth_quality(const std::vector<PsfGrid>& kernels,
                                        const std::vector<double>& depths, const Image& chart,
                                        double nsr);

struct EdofConfig {
  std::vector<double> depths{100.0, 150.0, 200.0, 300.0, 500.0, 1000.0, 3000.0, 10000.0};  // mm
  int surface = -1;
  int odd_terms = 2;    // cubic and quintic
  int resolution = 128;
  PsfGridSpec psf{4, 15, 64, PupilPattern::kGrid, 0, std::numeric_limits<double>::infinity(), 0.0,
                  true};
  EdofWeights weights;
  int epochs = 100;
  double lr = 2e-3;            // sag step (mm) at the hybrid surface's clear radius
  double initial_cubic = 0.0;  // 1/mm^2, start value of zero cubic terms (a = 0 is a saddle)
  int chart_period = 0;        // pixels, 0 = test_chart default
  bool refine_lens = false;    // also optimize curvatures and gaps
  std::uint64_t seed = 0;
  int max_rollbacks = 3;
};

struct EdofEpoch {
  int epoch = 0;
  double loss = 0.0;
  double depth_variance = 0.0;
  bool rolled_back = false;
};

struct EdofResult {
  LensSystem<double> system;
  std::vector<EdofEpoch> log;
  std::vector<PsfGrid> kernels_before;
  std::vector<PsfGrid> kernels_after;
  double variance_before = 0.0;
  double variance_after = 0.0;
  std::vector<DepthQuality> quality_before;
  std::vector<DepthQuality> quality_after;
  bool aborted = false;
  std::string abort_reason;
};

/// Optimizes the odd terms of the hybrid surface of `start` against
/// edof_loss. `start` must already contain a hybrid surface (make_hybrid);
/// its sensor resolution is replaced by config.resolution. Throws
/// std::invalid_argument for fewer than two depths.
EdofResult edof_design(const EdofConfig& config, const LensSystem<double>& start);

}  // namespace lensforge
