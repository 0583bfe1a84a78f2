// Flat view of the optimizable parameters of a LensSystem. Axial positions
// are parameterized by gaps so that moving one surface does not move the
// rest of the stack.
#pragma once

#include <string>
#include <vector>

#include "lensforge/system.hpp"

namespace lensforge {

enum class ParamKind : std::uint8_t { kCurvature, kConic, kEven, kOddX, kOddY, kGap };

/// Optimizer groups with separate learning rates.
enum class ParamGroup : std::uint8_t { kCurvature, kSpacing, kConic, kEven, kOddPoly };
inline constexpr int kParamGroupCount = 5;

struct ParamEntry {
  ParamKind kind;
  int surface;  // for kGap: gap in front of this surface; surfaces.size() = sensor
  int order;    // coefficient index for polynomial kinds
  ParamGroup group() const;
  std::string name() const;
};

struct LayoutOptions {
  bool curvature = true;
  bool conic = false;
  int even_terms = 0;   // optimize even[1 .. even_terms]: r^4, r^6, ...
  bool gaps = true;     // gaps between surfaces and to the sensor
  bool odd = true;      // odd coefficients already present on hybrid surfaces
  bool freeze_first_gap = false;
};

/// Which parameters of a system are free. Surface 0's position is fixed.
class ParamLayout {
 public:
  ParamLayout() = default;
  ParamLayout(const LensSystem<double>& system, const LayoutOptions& options);

  const std::vector<ParamEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::vector<double> pack(const LensSystem<double>& system) const;

  /// Writes `values` into a copy of `base` cast to Scalar. Positions are
  /// rebuilt from the first vertex and the gaps.
  template <typename Scalar, typename Value>
  LensSystem<Scalar> unpack(const LensSystem<double>& base,
                            const std::vector<Value>& values) const;

 private:
  std::vector<ParamEntry> entries_;
};

template <typename Scalar, typename Value>
LensSystem<Scalar> ParamLayout::unpack(const LensSystem<double>& base,
                                       const std::vector<Value>& values) const {
  LensSystem<Scalar> sys = base.template cast<Scalar>();
  const std::size_t n = sys.surfaces.size();
  std::vector<Scalar> gaps(n + 1);
  for (std::size_t k = 1; k < n; ++k) gaps[k] = Scalar(base.surfaces[k].z - base.surfaces[k - 1].z);
  gaps[n] = Scalar(value(base.sensor_z) - base.surfaces.back().z);
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const ParamEntry& e = entries_[i];
    const Scalar v = Scalar(values[i]);
    if (e.kind == ParamKind::kGap) {
      gaps[static_cast<std::size_t>(e.surface)] = v;
      continue;
    }
    Surface<Scalar>& s = sys.surfaces[static_cast<std::size_t>(e.surface)];
    const auto o = static_cast<std::size_t>(e.order);
    switch (e.kind) {
      case ParamKind::kCurvature: s.curvature = v; break;
      case ParamKind::kConic: s.conic = v; break;
      case ParamKind::kEven: s.even[o] = v; break;
      case ParamKind::kOddX: s.odd_x[o] = v; break;
      case ParamKind::kOddY: s.odd_y[o] = v; break;
      case ParamKind::kGap: break;
    }
  }
  for (std::size_t k = 1; k < n; ++k) sys.surfaces[k].z = sys.surfaces[k - 1].z + gaps[k];
  sys.sensor_z = sys.surfaces.back().z + gaps[n];
  return sys;
}

/// Writes double values back into a system (positions rebuilt from gaps).
LensSystem<double> apply(const ParamLayout& layout, const LensSystem<double>& base,
                         const std::vector<double>& values);

}  // namespace lensforge
