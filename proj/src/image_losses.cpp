#include "lensforge/image_losses.hpp"

#include <cmath>
#include <stdexcept>

#include "lensforge/losses.hpp"

namespace lensforge {

namespace {

void axpy(PsfGrid& acc, double a, const PsfGrid& x) {
  for (std::size_t i = 0; i < acc.taps.size(); ++i) {
    for (std::size_t j = 0; j < acc.taps[i].size(); ++j) acc.taps[i][j] += a * x.taps[i][j];
  }
}

void add(Image& acc, double a, const Image& x) {
  for (std::size_t c = 0; c < acc.channels.size(); ++c) acc.channels[c] += a * x.channels[c];
}

}  // namespace

KernelLoss relaxed_distortion_loss(const Image& object, const PsfGrid& kernels,
                                   const DistortionFit* fit, double pixel_pitch_mm, double alpha,
                                   const Eigen::MatrixXd& mask) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
  KernelLoss out;
  if (fit == nullptr || !fit->monotone()) {
    out.fell_back = alpha < 1.0;
    alpha = 1.0;
  }
  PsfGrid adj;
  adj.resize(kernels.grid, kernels.kernel, kernels.wavelengths);
  if (alpha > 0.0) {
    Image g;
    out.value += alpha * masked_mse(simulate(object, kernels), object, mask, &g);
    axpy(adj, alpha, simulate_kernel_vjp(object, kernels, g));
  }
  if (alpha < 1.0) {
    const Image warped = prewarp(object, *fit, pixel_pitch_mm);
    Image g;
    out.value += (1.0 - alpha) * masked_mse(simulate(warped, kernels), object, mask, &g);
    axpy(adj, 1.0 - alpha, simulate_kernel_vjp(warped, kernels, g));
  }
  out.adjoints.push_back(std::move(adj));
  return out;
}

KernelLoss edof_loss(const Image& object, std::span<const PsfGrid> kernels,
                     const EdofWeights& weights) {
  const std::size_t nd = kernels.size();
  if (nd < 2) throw std::invalid_argument("edof_loss needs at least two depths");
  std::vector<Image> sims;
  std::vector<Image> grads;
  for (const auto& k : kernels) {
    sims.push_back(simulate(object, k));
    grads.emplace_back(object.channel_count(), object.rows(), object.cols());
  }
  PsfGrid mean = kernels[0];
  for (std::size_t d = 1; d < nd; ++d) axpy(mean, 1.0, kernels[d]);
  for (auto& t : mean.taps)
    for (auto& v : t) v /= static_cast<double>(nd);

  KernelLoss out;
  for (std::size_t d = 0; d < nd; ++d) {
    for (std::size_t e = d + 1; e < nd; ++e) {
      Image g;
      out.value += mse(sims[d], sims[e], &g);
      add(grads[d], 1.0, g);
      add(grads[e], -1.0, g);
    }
  }
  PsfGrid mean_adj;
  mean_adj.resize(mean.grid, mean.kernel, mean.wavelengths);
  for (std::size_t d = 0; d < nd; ++d) {
    if (weights.w_sim != 0.0) {
      Image g;
      out.value += weights.w_sim * mse(sims[d], object, &g);
      add(grads[d], weights.w_sim, g);
    }
    if (weights.w_recon != 0.0) {
      const Image recon = wiener_reconstruct(sims[d], mean, weights.nsr);
      Image g;
      out.value += weights.w_recon * mse(recon, object, &g);
      for (auto& c : g.channels) c *= weights.w_recon;
      Image raw_adj;
      PsfGrid k_adj;
      wiener_vjp(sims[d], mean, weights.nsr, g, &raw_adj, &k_adj);
      add(grads[d], 1.0, raw_adj);
      axpy(mean_adj, 1.0, k_adj);
    }
  }
  for (std::size_t d = 0; d < nd; ++d) {
    PsfGrid adj = simulate_kernel_vjp(object, kernels[d], grads[d]);
    axpy(adj, 1.0 / static_cast<double>(nd), mean_adj);
    out.adjoints.push_back(std::move(adj));
  }
  return out;
}

DiffScalar attach_kernel_loss(const KernelLoss& loss,
                              std::span<const KernelSet<DiffScalar>* const> kernels) {
  if (kernels.size() != loss.adjoints.size()) {
    throw std::invalid_argument("attach_kernel_loss: kernel/adjoint count mismatch");
  }
  std::vector<DiffScalar> inputs;
  std::vector<double> partials;
  for (std::size_t k = 0; k < kernels.size(); ++k) {
    const auto& set = *kernels[k];
    const auto& adj = loss.adjoints[k];
    for (std::size_t i = 0; i < set.taps.size(); ++i) {
      for (std::size_t j = 0; j < set.taps[i].size(); ++j) {
        const DiffScalar& t = set.taps[i][j];
        const double p = adj.taps[i][j];
        if (t.is_constant() || p == 0.0) continue;
        inputs.push_back(t);
        partials.push_back(p);
      }
    }
  }
  GradientTape* tape = GradientTape::active();
  if (tape == nullptr || inputs.empty()) return DiffScalar(loss.value);
  return tape->record(OpKind::kCustom, inputs, loss.value, partials);
}

PsfGrid kernel_values(const KernelSet<DiffScalar>& kernels) {
  PsfGrid out;
  out.resize(kernels.grid, kernels.kernel, kernels.wavelengths);
  for (std::size_t i = 0; i < kernels.taps.size(); ++i) {
    for (std::size_t j = 0; j < kernels.taps[i].size(); ++j) out.taps[i][j] = kernels.taps[i][j].value();
  }
  return out;
}

double depth_variance(std::span<const PsfGrid> kernels) {
  if (kernels.size() < 2) throw std::invalid_argument("depth_variance needs at least two depths");
  double total = 0.0;
  long count = 0;
  for (std::size_t d = 0; d < kernels.size(); ++d) {
    for (std::size_t e = d + 1; e < kernels.size(); ++e) {
      for (std::size_t i = 0; i < kernels[d].taps.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < kernels[d].taps[i].size(); ++j) {
          const double diff = kernels[d].taps[i][j] - kernels[e].taps[i][j];
          s += diff * diff;
        }
        total += std::sqrt(s);
        ++count;
      }
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace lensforge
