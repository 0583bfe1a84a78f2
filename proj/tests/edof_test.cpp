#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "lensforge/edof.hpp"

using namespace lensforge;
using namespace lensforge::testing;

namespace {

LensSystem<double> singlet() {
  LensSystem<double> sys = plano_convex(20.0, 1.5, 2.0, 1.0, 0.0);
  sys.sensor_z = 2.0 + paraxial_solve(sys, 0.587).bfd;
  sys.sensor_diagonal = 1.5;
  return sys;
}

}  // namespace

TEST_CASE("hybrid conversion") {
  const LensSystem<double> sys = singlet();
  const LensSystem<double> h = make_hybrid(sys, -1, 3);
  CHECK(h.surfaces[1].type == SurfaceType::kHybrid);
  CHECK(h.surfaces[1].odd_x == std::vector<double>(3, 0.0));
  CHECK(h.surfaces[1].odd_y == std::vector<double>(3, 0.0));
  CHECK(h.surfaces[2].type == SurfaceType::kAspheric);
  CHECK_THROWS_AS(make_hybrid(sys, 0, 2), std::out_of_range);
  CHECK_THROWS_AS(make_hybrid(sys, 3, 2), std::out_of_range);
  CHECK_THROWS_AS(make_hybrid(sys, 1, 0), std::invalid_argument);
}

TEST_CASE("paraxial image distance of a finite object") {
  // Thin lens R = 50 mm, n = 1.5: f = 100 mm, object at 2f images at 2f.
  LensSystem<double> sys;
  sys.surfaces.push_back(stop(-1e-3, 5.0));
  sys.surfaces.push_back(sphere(50.0, 0.0, 10.0, glass(1.5)));
  sys.surfaces.push_back(plane(1e-6, 10.0));
  sys.sensor_z = 100.0;
  sys.wavelengths = {0.587};
  sys.renumber();
  CHECK(paraxial_image_distance(sys, 200.0, 0.587) == doctest::Approx(200.0).epsilon(1e-5));
  CHECK(paraxial_image_distance(sys, INFINITY, 0.587) == doctest::Approx(100.0).epsilon(1e-6));
  CHECK(paraxial_image_distance(sys, 1e9, 0.587) == doctest::Approx(100.0).epsilon(1e-6));
  CHECK_THROWS_AS(paraxial_image_distance(sys, 50.0, 0.587), ParaxialError);
  const LensSystem<double> r = refocus(sys, 300.0);
  CHECK(r.sensor_z == doctest::Approx(150.0).epsilon(1e-5));
}

TEST_CASE("EDoF design without updates keeps the classical lens") {
  LensSystem<double> sys = make_hybrid(singlet(), -1, 2);
  EdofConfig cfg;
  cfg.depths = {200.0, 1000.0};
  cfg.resolution = 24;
  cfg.psf.grid = 2;
  cfg.psf.kernel = 7;
  cfg.psf.spp = 16;
  cfg.epochs = 0;
  const EdofResult r = edof_design(cfg, sys);
  CHECK(r.variance_after == r.variance_before);
  REQUIRE(r.quality_after.size() == 2);
  CHECK(r.quality_after[0].psnr_recon == r.quality_before[0].psnr_recon);

  cfg.depths = {200.0};
  CHECK_THROWS_AS(edof_design(cfg, sys), std::invalid_argument);
  cfg.depths = {200.0, 1000.0};
  CHECK_THROWS_AS(edof_design(cfg, singlet()), std::invalid_argument);
}

TEST_CASE("EDoF design updates the odd terms") {
  LensSystem<double> sys = make_hybrid(singlet(), -1, 1);
  EdofConfig cfg;
  cfg.depths = {150.0, 1000.0};
  cfg.resolution = 24;
  cfg.psf.grid = 2;
  cfg.psf.kernel = 7;
  cfg.psf.spp = 16;
  cfg.epochs = 3;
  cfg.initial_cubic = 1e-3;
  const EdofResult r = edof_design(cfg, sys);
  CHECK_FALSE(r.aborted);
  CHECK(r.log.size() == 3);
  CHECK(r.system.surfaces[1].odd_x[0] != 1e-3);
  CHECK(std::isfinite(r.variance_after));
}
