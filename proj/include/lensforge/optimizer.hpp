// Adam with one learning rate per parameter group.
#pragma once

#include <array>
#include <span>
#include <vector>

#include "lensforge/params.hpp"

namespace lensforge {

struct AdamConfig {
  /// Indexed by ParamGroup: curvature (1/mm), spacing (mm), conic, even and
  /// odd polynomial coefficients. Polynomial rates are sag steps (mm) at the
  /// reference radius.
  std::array<double, kParamGroupCount> lr{1e-3, 1e-2, 1e-3, 1e-3, 1e-3};
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-12;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long steps = 0;
  long skipped = 0;
  double lr_scale = 1.0;  // halved on every rollback

  void reset(std::size_t n) {
    m.assign(n, 0.0);
    v.assign(n, 0.0);
    steps = 0;
  }
};

/// Per-entry learning rates. Polynomial coefficients of order p are scaled by
/// 1 / r_ref^p so that each step moves the sag at r_ref by a similar amount.
std::vector<double> learning_rates(const ParamLayout& layout, const AdamConfig& config,
                                   double reference_radius);

/// One Adam step. Returns false and leaves everything untouched when the
/// gradient has a non-finite entry.
bool step_parameters(std::vector<double>& params, std::span<const double> gradient,
                     std::span<const double> rates, const AdamConfig& config, AdamState& state);

}  // namespace lensforge
