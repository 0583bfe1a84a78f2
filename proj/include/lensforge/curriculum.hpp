// Curriculum design: target schedule, random flat initialization and the
// staged optimization loop with rollback on divergence.
#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lensforge/image_losses.hpp"
#include "lensforge/losses.hpp"
#include "lensforge/material.hpp"
#include "lensforge/optimizer.hpp"

namespace lensforge {

struct DesignTarget {
  double fov_deg = 40.0;  // full diagonal field of view
  double f_number = 4.0;
  double focal_length = 10.0;    // mm
  double sensor_diagonal = 0.0;  // mm; 0 = 2 f tan(fov / 2)

  double diagonal() const;
  void validate() const;  // throws std::invalid_argument
};

struct CurriculumSchedule {
  DesignTarget start;
  DesignTarget end;
  int steps = 4;
  int epochs_per_step = 200;
  int finetune_epochs = 20;
  double alpha_start = 0.0;  // distortion relaxation ramp over the fine-tune stage
  double alpha_end = 1.0;

  /// Start target easier than `end`: 0.6x the field of view, 1.4x the F-number.
  static CurriculumSchedule toward(const DesignTarget& end, int steps, int epochs_per_step);
  void validate() const;
};

/// Target of step i in [0, steps]: every scheduled value follows
/// start + (end - start) sin(i pi / (2 steps)). Focal length and sensor
/// diagonal stay at the end target.
DesignTarget schedule(const CurriculumSchedule& s, int i);

struct InitConfig {
  int elements = 3;
  std::vector<Material> glasses;  // cycled per element; empty = crown, flint
  double curvature_range = 0.002;  // 1/mm
  double thickness = 1.0;          // mm, centre thickness of each element
  double air_gap = 0.5;            // mm, between elements
  double stop_gap = 0.3;           // mm, stop to first element
  double track_limit = 0.0;        // mm, 0 = unlimited
  int even_terms = 4;              // r^2 .. r^8 coefficient slots per surface
};

/// Aperture stop in front, then `elements` near-flat elements with random
/// curvatures in +-curvature_range and zero aspheric terms. The sensor is
/// placed at the paraxial back focus when that lies within [f/2, 2f] of the
/// last surface, otherwise at f behind it. Throws std::invalid_argument when
/// the stack does not fit the track limit.
LensSystem<double> random_init(const InitConfig& config, const DesignTarget& target,
                               std::uint64_t seed);

struct SpotLossConfig {
  int radial_fields = 7;  // fields at rho_j = sqrt(j / (R - 1)) of the target half-diagonal
  int spp = 36;
  bool squared = true;  // mean square radius (mm^2) instead of RMS radius (mm)
  PupilPattern pattern = PupilPattern::kGrid;
  int mask_grid = 8;
  double focal_weight = 10.0;  // on (f / EFL - 1)^2
};

struct ImageLossConfig {
  int resolution = 64;  // square render, sets the sensor pixel count
  bool keep_spot = true;  // fine-tune keeps the spot term next to the image term
  PsfGridSpec psf{4, 9, 16, PupilPattern::kGrid, 0,
                  std::numeric_limits<double>::infinity(), 0.0};
};

struct DesignConfig {
  CurriculumSchedule schedule;
  InitConfig init;
  RegularizerConfig regularizers;
  bool use_curriculum = true;
  bool use_regularizers = true;
  bool use_mask = true;
  double mask_threshold = 0.8;
  AdamConfig adam;
  LayoutOptions layout{true, false, 2, true, true, false};
  SpotLossConfig spot;
  ImageLossConfig image;
  SpotGridOptions report{256, 64, 0, PupilPattern::kGrid, 0.0};
  std::uint64_t seed = 0;
  int max_rollbacks = 3;
};

/// One row of the training log.
struct EpochLog {
  int step = 0;
  int epoch = 0;  // global epoch counter
  double fov_deg = 0.0;
  double f_number = 0.0;
  double alpha = 1.0;  // fine-tune only
  double loss = 0.0;
  double image_loss = 0.0;  // spot term (mm) or image term
  double focal_loss = 0.0;
  double angle_loss = 0.0;
  double dist_loss = 0.0;
  double shape_loss = 0.0;
  double avg_rms_um = 0.0;  // mean over training fields
  double efl = 0.0;
  double failure_fraction = 0.0;
  bool self_intersecting = false;
  double lr_scale = 1.0;
  bool rolled_back = false;
};

class DesignAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Snapshot of the optimizer at an epoch boundary.
struct RunState {
  int step = 0;
  int epoch = 0;
  std::vector<double> params;
  AdamState adam;
  std::vector<double> clear_radius;
};

struct DesignResult {
  LensSystem<double> system;               // semi-diameters sized to the traced beams
  std::vector<LensSystem<double>> steps;   // snapshot after each curriculum step
  std::vector<EpochLog> log;
  SpotReport report;
  Clearance clearance;
  bool success = false;  // finished without abort and without self-intersection
  bool aborted = false;
  std::string abort_reason;
  int rollbacks = 0;
  int skipped_updates = 0;
  int fit_fallbacks = 0;  // fine-tune epochs that had no usable distortion fit
};

/// Runs the staged design. Never throws for numerical trouble: divergence
/// that survives max_rollbacks ends the run with aborted = true.
DesignResult design(const DesignConfig& config);

/// Same loop starting from a given system (its stop, surfaces and spacing).
DesignResult design_from(const DesignConfig& config, const LensSystem<double>& start);

/// Per-surface clear semi-diameters covering every ray of the bundle used by
/// the spot loss at `target`, times `margin`. The stop keeps its own.
std::vector<double> clear_radii(const LensSystem<double>& system, const DesignTarget& target,
                                const SpotLossConfig& spot, double margin = 1.05);

/// Copy of `system` with every non-stop semi-diameter set to `radii`.
LensSystem<double> with_radii(const LensSystem<double>& system, const std::vector<double>& radii);

/// Chart used by the rendering losses: a smooth grating of the given period
/// (pixels; 0 = max(4, rows / 8)) plus concentric rings, one identical
/// channel per wavelength, values in [0.1, 0.9].
Image test_chart(int rows, int cols, int channels, int period = 0);

}  // namespace lensforge
