#include "lensforge/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace lensforge {

std::vector<double> learning_rates(const ParamLayout& layout, const AdamConfig& config,
                                   double reference_radius) {
  if (!(reference_radius > 0.0)) throw std::invalid_argument("reference radius must be positive");
  std::vector<double> out;
  out.reserve(layout.size());
  for (const ParamEntry& e : layout.entries()) {
    double lr = config.lr[static_cast<std::size_t>(e.group())];
    if (e.kind == ParamKind::kEven) {
      lr /= std::pow(reference_radius, 2 * e.order + 2);
    } else if (e.kind == ParamKind::kOddX || e.kind == ParamKind::kOddY) {
      lr /= std::pow(reference_radius, 2 * e.order + 3);
    }
    out.push_back(lr);
  }
  return out;
}

bool step_parameters(std::vector<double>& params, std::span<const double> gradient,
                     std::span<const double> rates, const AdamConfig& config, AdamState& state) {
  if (gradient.size() != params.size() || rates.size() != params.size()) {
    throw std::invalid_argument("step_parameters: size mismatch");
  }
  for (double g : gradient) {
    if (!std::isfinite(g)) {
      ++state.skipped;
      return false;
    }
  }
  if (state.m.size() != params.size()) state.reset(params.size());
  ++state.steps;
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.steps));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.steps));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = gradient[i];
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
    const double mh = state.m[i] / c1, vh = state.v[i] / c2;
    params[i] -= state.lr_scale * rates[i] * mh / (std::sqrt(vh) + config.eps);
  }
  return true;
}

}  // namespace lensforge
