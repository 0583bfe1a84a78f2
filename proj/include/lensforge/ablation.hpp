// Ablation study over the design pipeline: the same target and seeds with
// curriculum, regularizers and mask switched on and off.
#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "lensforge/curriculum.hpp"

namespace lensforge {

enum class AblationArm : std::uint8_t {
  kFull,            // curriculum, regularizers and mask
  kBaseline,        // none of them
  kCurriculumOnly,
  kRegOnly,
  kCurriculumReg,   // curriculum and regularizers, no mask
};

const char* arm_name(AblationArm arm);
std::vector<AblationArm> all_arms();

/// `base` with the arm's switches applied.
DesignConfig arm_config(const DesignConfig& base, AblationArm arm);

struct AblationRun {
  AblationArm arm = AblationArm::kFull;
  std::uint64_t seed = 0;
  bool success = false;
  bool aborted = false;
  double avg_rms_um = 0.0;
  double min_rms_um = 0.0;
  double max_failure_fraction = 0.0;
  double seconds = 0.0;
};

struct ArmSummary {
  AblationArm arm = AblationArm::kFull;
  int runs = 0;
  int successes = 0;
  double success_rate = 0.0;
  double avg_rms_um = 0.0;  // mean over successful runs, NaN if none
  double min_rms_um = 0.0;  // best over successful runs, NaN if none
  double max_failure_fraction = 0.0;  // worst over successful runs
};

using AblationProgress = std::function<void(const AblationRun&)>;

/// One design per (arm, seed); base.seed is replaced by each seed.
std::vector<AblationRun> run_ablation(const DesignConfig& base, const std::vector<AblationArm>& arms,
                                      const std::vector<std::uint64_t>& seeds,
                                      const AblationProgress& progress = {});

std::vector<ArmSummary> summarize(const std::vector<AblationRun>& runs);

void write_ablation_runs_csv(std::ostream& out, const std::vector<AblationRun>& runs);
void write_ablation_summary_csv(std::ostream& out, const std::vector<ArmSummary>& summary);

}  // namespace lensforge
