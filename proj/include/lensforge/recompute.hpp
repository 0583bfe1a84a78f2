// Gradients of a rendering loss either by recording the whole render on one
// tape, or patch by patch with the ray tracing re-run for each patch so that
// only one patch's graph is alive at a time.
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lensforge/imaging.hpp"
#include "lensforge/params.hpp"

namespace lensforge {

/// Masked mean squared error between the simulated image of `object` and the
/// object itself, as a function of the layout parameters. Deterministic: all
/// ray sets come from fixed-seed pupil patterns.
struct RenderRecipe {
  LensSystem<double> base;
  ParamLayout layout;
  std::vector<double> params;
  Image object;
  PsfGridSpec psf;
  Eigen::MatrixXd mask;  // empty = all ones
};

struct RenderGradient {
  double loss = 0.0;
  std::vector<double> gradient;
  std::size_t peak_nodes = 0;  // largest tape size reached
};

class ReplayMismatch : public std::runtime_error {
 public:
  ReplayMismatch(int patch, double difference);
  int patch() const { return patch_; }

 private:
  int patch_;
};

/// Single pass with everything recorded.
RenderGradient backward_direct(const RenderRecipe& recipe);

/// Forward pass without recording, then one recorded replay per patch of a
/// patches_per_axis x patches_per_axis split, seeded with the pixel adjoints
/// of the first pass. Throws ReplayMismatch if a replayed pixel differs from
/// the first pass by more than 1e-12.
RenderGradient backward_with_recompute(const RenderRecipe& recipe, int patches_per_axis);

}  // namespace lensforge
