// Rendering-based objectives. They are evaluated in double precision with
// hand-written adjoints and enter the tape as one node over the kernel taps.
#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "lensforge/imaging.hpp"

namespace lensforge {

struct KernelLoss {
  double value = 0.0;
  std::vector<PsfGrid> adjoints;  // d value / d taps, one per kernel set
  bool fell_back = false;         // distortion fit unavailable, alpha forced to 1
};

/// alpha * |sim(I) - I|^2 + (1 - alpha) * |sim(F(I)) - I|^2 as masked means,
/// with F the pre-warp through `fit`. A null fit falls back to alpha = 1.
KernelLoss relaxed_distortion_loss(const Image& object, const PsfGrid& kernels,
                                   const DistortionFit* fit, double pixel_pitch_mm, double alpha,
                                   const Eigen::MatrixXd& mask = {});

struct EdofWeights {
  double w_sim = 1.0;    // simulated image against the object
  double w_recon = 1.0;  // Wiener reconstruction against the object
  double nsr = 1e-3;
};

/// Depth-consistency objective over one kernel set per depth: the mean
/// squared difference of every unordered pair of simulated images, plus per
/// depth the weighted simulation and reconstruction errors. Reconstruction
/// uses the depth-averaged kernels, since the depth is unknown at capture.
/// Throws std::invalid_argument for fewer than two depths.
KernelLoss edof_loss(const Image& object, std::span<const PsfGrid> kernels,
                     const EdofWeights& weights);

/// One tape node with the kernel taps as inputs and the adjoints as partials.
DiffScalar attach_kernel_loss(const KernelLoss& loss,
                              std::span<const KernelSet<DiffScalar>* const> kernels);

/// Plain values of a recorded kernel set.
PsfGrid kernel_values(const KernelSet<DiffScalar>& kernels);

/// Mean over sites, wavelengths and unordered depth pairs of the L2 norm of
/// the kernel difference.
double depth_variance(std::span<const PsfGrid> kernels);

}  // namespace lensforge
