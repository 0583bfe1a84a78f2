#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "lensforge/curriculum.hpp"
#include "lensforge/recompute.hpp"

using namespace lensforge;
using namespace lensforge::testing;

namespace {

RenderRecipe singlet_recipe(int res) {
  LensSystem<double> sys = plano_convex(20.0, 1.5, 2.0, 1.0, 0.0);
  sys.sensor_z = 2.0 + paraxial_solve(sys, 0.587).bfd + 0.05;
  sys.sensor_width = res;
  sys.sensor_height = res;
  sys.sensor_diagonal = 1.5;
  RenderRecipe r;
  r.base = sys;
  r.layout = ParamLayout(sys, LayoutOptions{true, false, 0, true, false, false});
  r.params = r.layout.pack(sys);
  r.object = test_chart(res, res, 1);
  r.psf.grid = 4;
  r.psf.kernel = 7;
  r.psf.spp = 16;
  return r;
}

}  // namespace

TEST_CASE("patch recompute matches the single-pass gradient") {
  const RenderRecipe r = singlet_recipe(24);
  const RenderGradient direct = backward_direct(r);
  REQUIRE(direct.gradient.size() == r.params.size());
  double norm = 0.0;
  for (double g : direct.gradient) norm = std::max(norm, std::abs(g));
  REQUIRE(norm > 0.0);
  for (int patches : {1, 2, 3}) {
    CAPTURE(patches);
    const RenderGradient re = backward_with_recompute(r, patches);
    CHECK(re.loss == doctest::Approx(direct.loss).epsilon(1e-12));
    for (std::size_t k = 0; k < re.gradient.size(); ++k) {
      CHECK(std::abs(re.gradient[k] - direct.gradient[k]) <= 1e-12 * norm);
    }
    if (patches > 1) CHECK(re.peak_nodes < direct.peak_nodes);
  }
}

TEST_CASE("patch recompute with a mask") {
  RenderRecipe r = singlet_recipe(16);
  r.mask = Eigen::MatrixXd::Ones(16, 16);
  r.mask.block(0, 0, 8, 8).setZero();
  const RenderGradient direct = backward_direct(r);
  const RenderGradient re = backward_with_recompute(r, 2);
  for (std::size_t k = 0; k < re.gradient.size(); ++k) {
    CHECK(re.gradient[k] == doctest::Approx(direct.gradient[k]).epsilon(1e-9));
  }
}

TEST_CASE("patch recompute argument checks") {
  RenderRecipe r = singlet_recipe(16);
  CHECK_THROWS_AS(backward_with_recompute(r, 0), std::invalid_argument);
  r.object = test_chart(8, 8, 1);
  CHECK_THROWS_AS(backward_direct(r), std::invalid_argument);
  const ReplayMismatch e(5, 1e-9);
  CHECK(e.patch() == 5);
  CHECK(std::string(e.what()).find("patch 5") != std::string::npos);
}
