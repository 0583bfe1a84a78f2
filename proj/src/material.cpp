#include "lensforge/material.hpp"

namespace lensforge {

Material material_from_abbe(const std::string& name, double nd, double abbe) {
  const double dispersion = (nd - 1.0) / abbe;  // nF - nC
  const double b = dispersion / (1.0 / (kWavelengthF * kWavelengthF) -
                                 1.0 / (kWavelengthC * kWavelengthC));
  const double a = nd - b / (kWavelengthD * kWavelengthD);
  return Material{name, a, b};
}

Material air() { return Material{}; }

MaterialCatalog::MaterialCatalog() {
  add(air());
  add(material_from_abbe("crown", 1.5168, 64.17));
  add(material_from_abbe("flint", 1.6200, 36.37));
  add(material_from_abbe("bk7", 1.5168, 64.17));
  add(material_from_abbe("f2", 1.6200, 36.37));
  add(material_from_abbe("sf5", 1.6727, 32.21));
  add(material_from_abbe("pmma", 1.4918, 57.44));
  add(material_from_abbe("pc", 1.5855, 29.91));
  for (const auto& [name, m] : materials_) builtin_[name] = true;
}

void MaterialCatalog::add(const Material& m) {
  materials_[m.name] = m;
  builtin_[m.name] = false;
}

std::optional<Material> MaterialCatalog::find(const std::string& name) const {
  auto it = materials_.find(name);
  if (it == materials_.end()) return std::nullopt;
  return it->second;
}

bool MaterialCatalog::is_builtin(const std::string& name) const {
  auto it = builtin_.find(name);
  return it != builtin_.end() && it->second;
}

std::vector<std::string> MaterialCatalog::names() const {
  std::vector<std::string> out;
  for (const auto& [name, m] : materials_) out.push_back(name);
  return out;
}

}  // namespace lensforge
