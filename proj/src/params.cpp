#include "lensforge/params.hpp"

namespace lensforge {

ParamGroup ParamEntry::group() const {
  switch (kind) {
    case ParamKind::kCurvature: return ParamGroup::kCurvature;
    case ParamKind::kConic: return ParamGroup::kConic;
    case ParamKind::kEven: return ParamGroup::kEven;
    case ParamKind::kOddX:
    case ParamKind::kOddY: return ParamGroup::kOddPoly;
    case ParamKind::kGap: return ParamGroup::kSpacing;
  }
  return ParamGroup::kCurvature;
}

std::string ParamEntry::name() const {
  const std::string s = std::to_string(surface);
  switch (kind) {
    case ParamKind::kCurvature: return "c[" + s + "]";
    case ParamKind::kConic: return "k[" + s + "]";
    case ParamKind::kEven: return "a" + std::to_string(2 * order + 2) + "[" + s + "]";
    case ParamKind::kOddX: return "x" + std::to_string(2 * order + 3) + "[" + s + "]";
    case ParamKind::kOddY: return "y" + std::to_string(2 * order + 3) + "[" + s + "]";
    case ParamKind::kGap: return "gap[" + s + "]";
  }
  return "?";
}

ParamLayout::ParamLayout(const LensSystem<double>& system, const LayoutOptions& options) {
  const int n = static_cast<int>(system.surfaces.size());
  for (int k = 0; k < n; ++k) {
    const auto& s = system.surfaces[static_cast<std::size_t>(k)];
    if (options.gaps && k > 0 && !(options.freeze_first_gap && k == 1)) {
      entries_.push_back({ParamKind::kGap, k, 0});
    }
    if (s.is_stop) continue;
    if (options.curvature) entries_.push_back({ParamKind::kCurvature, k, 0});
    if (options.conic) entries_.push_back({ParamKind::kConic, k, 0});
    for (int j = 1; j <= options.even_terms && j < static_cast<int>(s.even.size()); ++j) {
      entries_.push_back({ParamKind::kEven, k, j});
    }
    if (options.odd && s.type == SurfaceType::kHybrid) {
      for (int i = 0; i < static_cast<int>(s.odd_x.size()); ++i) {
        entries_.push_back({ParamKind::kOddX, k, i});
      }
      for (int i = 0; i < static_cast<int>(s.odd_y.size()); ++i) {
        entries_.push_back({ParamKind::kOddY, k, i});
      }
    }
  }
  if (options.gaps) entries_.push_back({ParamKind::kGap, n, 0});
}

std::vector<double> ParamLayout::pack(const LensSystem<double>& system) const {
  std::vector<double> out;
  out.reserve(entries_.size());
  const std::size_t n = system.surfaces.size();
  for (const ParamEntry& e : entries_) {
    const auto k = static_cast<std::size_t>(e.surface);
    const auto o = static_cast<std::size_t>(e.order);
    switch (e.kind) {
      case ParamKind::kCurvature: out.push_back(system.surfaces[k].curvature); break;
      case ParamKind::kConic: out.push_back(system.surfaces[k].conic); break;
      case ParamKind::kEven: out.push_back(system.surfaces[k].even[o]); break;
      case ParamKind::kOddX: out.push_back(system.surfaces[k].odd_x[o]); break;
      case ParamKind::kOddY: out.push_back(system.surfaces[k].odd_y[o]); break;
      case ParamKind::kGap:
        out.push_back(k == n ? system.sensor_z - system.surfaces.back().z
                             : system.surfaces[k].z - system.surfaces[k - 1].z);
        break;
    }
  }
  return out;
}

LensSystem<double> apply(const ParamLayout& layout, const LensSystem<double>& base,
                         const std::vector<double>& values) {
  return layout.unpack<double>(base, values);
}

}  // namespace lensforge
