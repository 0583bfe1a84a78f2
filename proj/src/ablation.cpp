#include "lensforge/ablation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

#include "lensforge/io.hpp"

namespace lensforge {

const char* arm_name(AblationArm arm) {
  switch (arm) {
    case AblationArm::kFull:
      return "full";
    case AblationArm::kBaseline:
      return "baseline";
    case AblationArm::kCurriculumOnly:
      return "curriculum_only";
    case AblationArm::kRegOnly:
      return "reg_only";
    case AblationArm::kCurriculumReg:
      return "curriculum_reg";
  }
  return "unknown";
}

std::vector<AblationArm> all_arms() {
  return {AblationArm::kFull, AblationArm::kBaseline, AblationArm::kCurriculumOnly, AblationArm::kRegOnly,
          AblationArm::kCurriculumReg};
}

DesignConfig arm_config(const DesignConfig& base, AblationArm arm) {
  DesignConfig c = base;
  c.use_curriculum = arm == AblationArm::kFull || arm == AblationArm::kCurriculumOnly ||
                     arm == AblationArm::kCurriculumReg;
  c.use_regularizers = arm == AblationArm::kFull || arm == AblationArm::kRegOnly ||
                       arm == AblationArm::kCurriculumReg;
  c.use_mask = arm == AblationArm::kFull;
  return c;
}

std::vector<AblationRun> run_ablation(const DesignConfig& base, const std::vector<AblationArm>& arms,
                                      const std::vector<std::uint64_t>& seeds, const AblationProgress& progress) {
  std::vector<AblationRun> out;
  for (AblationArm arm : arms) {
    for (std::uint64_t seed : seeds) {
      DesignConfig c = arm_config(base, arm);
      c.seed = seed;
      const auto t0 = std::chrono::steady_clock::now();
      const DesignResult r = design(c);
      AblationRun run;
      run.arm = arm;
      run.seed = seed;
      run.success = r.success;
      run.aborted = r.aborted;
      run.avg_rms_um = r.report.avg_rms_um;
      run.min_rms_um = r.report.min_rms_um;
      run.max_failure_fraction = r.report.max_failure_fraction;
      run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (progress) progress(run);
      out.push_back(run);
    }
  }
  return out;
}

std::vector<ArmSummary> summarize(const std::vector<AblationRun>& runs) {
  std::vector<ArmSummary> out;
  for (const auto& run : runs) {
    auto it = std::find_if(out.begin(), out.end(), [&](const ArmSummary& s) { return s.arm == run.arm; });
    if (it == out.end()) {
      out.push_back(ArmSummary{run.arm});
      it = out.end() - 1;
    }
    ++it->runs;
    if (!run.success) continue;
    ++it->successes;
    it->avg_rms_um += run.avg_rms_um;
    it->min_rms_um = it->successes == 1 ? run.min_rms_um : std::min(it->min_rms_um, run.min_rms_um);
    it->max_failure_fraction = std::max(it->max_failure_fraction, run.max_failure_fraction);
  }
  for (auto& s : out) {
    s.success_rate = s.runs > 0 ? static_cast<double>(s.successes) / s.runs : 0.0;
    if (s.successes > 0) {
      s.avg_rms_um /= s.successes;
    } else {
      s.avg_rms_um = s.min_rms_um = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return out;
}

void write_ablation_runs_csv(std::ostream& out, const std::vector<AblationRun>& runs) {
  out << "arm,seed,success,aborted,avg_rms_um,min_rms_um,max_failure_fraction,time_s\n";
  for (const auto& r : runs) {
    out << arm_name(r.arm) << ',' << r.seed << ',' << (r.success ? 1 : 0) << ',' << (r.aborted ? 1 : 0) << ','
        << format_double(r.avg_rms_um) << ',' << format_double(r.min_rms_um) << ','
        << format_double(r.max_failure_fraction) << ',' << format_double(r.seconds) << '\n';
  }
}

void write_ablation_summary_csv(std::ostream& out, const std::vector<ArmSummary>& summary) {
  out << "arm,runs,successes,success_rate,avg_rms_um,min_rms_um,max_failure_fraction\n";
  for (const auto& s : summary) {
    out << arm_name(s.arm) << ',' << s.runs << ',' << s.successes << ',' << format_double(s.success_rate) << ','
        << format_double(s.avg_rms_um) << ',' << format_double(s.min_rms_um) << ','
        << format_double(s.max_failure_fraction) << '\n';
  }
}

}  // namespace lensforge
