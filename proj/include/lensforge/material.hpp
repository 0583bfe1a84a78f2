#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lensforge {

/// Two-term Cauchy dispersion n(lambda) = A + B / lambda^2, lambda in um.
struct Material {
  std::string name = "air";
  double a = 1.0;
  double b = 0.0;

  double index(double wavelength_um) const {
    return a + b / (wavelength_um * wavelength_um);
  }
  bool is_air() const { return a == 1.0 && b == 0.0; }

  friend bool operator==(const Material&, const Material&) = default;
};

inline constexpr double kWavelengthF = 0.4861327;
inline constexpr double kWavelengthD = 0.5875618;
inline constexpr double kWavelengthC = 0.6562725;

/// Fits the Cauchy pair to a refractive index at the d line and an Abbe number.
Material material_from_abbe(const std::string& name, double nd, double abbe);

Material air();

/// Name-indexed glass set. Starts with a small built-in catalog.
class MaterialCatalog {
 public:
  MaterialCatalog();

  void add(const Material& m);
  std::optional<Material> find(const std::string& name) const;
  bool is_builtin(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, Material> materials_;
  std::map<std::string, bool> builtin_;
};

}  // namespace lensforge
