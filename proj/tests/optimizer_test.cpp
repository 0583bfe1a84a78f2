#include <doctest.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "lensforge/optimizer.hpp"

using namespace lensforge;
using namespace lensforge::testing;

namespace {

std::vector<double> ones(std::size_t n, double v) { return std::vector<double>(n, v); }

}  // namespace

TEST_CASE("Adam leaves parameters alone under a zero gradient") {
  AdamConfig cfg;
  AdamState st;
  st.reset(2);
  std::vector<double> p{1.0, -2.0};
  const auto rates = ones(2, 1e-2);
  REQUIRE(step_parameters(p, std::vector<double>{3.0, -1.0}, rates, cfg, st));
  const std::vector<double> m0 = st.m;
  const std::vector<double> v0 = st.v;
  REQUIRE(step_parameters(p, std::vector<double>{0.0, 0.0}, rates, cfg, st));
  for (int i = 0; i < 2; ++i) {
    CHECK(st.m[i] == doctest::Approx(cfg.beta1 * m0[i]));
    CHECK(st.v[i] == doctest::Approx(cfg.beta2 * v0[i]));
  }

  AdamState fresh;
  fresh.reset(2);
  std::vector<double> q{1.0, -2.0};
  for (int i = 0; i < 10; ++i) REQUIRE(step_parameters(q, std::vector<double>{0.0, 0.0}, rates, cfg, fresh));
  CHECK(q[0] == 1.0);
  CHECK(q[1] == -2.0);
}

TEST_CASE("Adam step size approaches the learning rate under a constant gradient") {
  AdamConfig cfg;
  AdamState st;
  st.reset(1);
  std::vector<double> p{0.0};
  const std::vector<double> rates{1e-3};
  double last = 0.0;
  for (int i = 0; i < 500; ++i) {
    const double before = p[0];
    REQUIRE(step_parameters(p, std::vector<double>{0.37}, rates, cfg, st));
    last = std::abs(p[0] - before);
  }
  CHECK(last == doctest::Approx(1e-3).epsilon(1e-6));
  CHECK(p[0] < 0.0);
}

TEST_CASE("Adam minimizes a scalar quadratic within 200 steps") {
  AdamConfig cfg;
  AdamState st;
  st.reset(1);
  std::vector<double> p{1.0};
  const std::vector<double> rates{5e-2};
  for (int i = 0; i < 200; ++i) {
    const double g = 2.0 * (p[0] - 3.0);
    REQUIRE(step_parameters(p, std::vector<double>{g}, rates, cfg, st));
  }
  CHECK(p[0] == doctest::Approx(3.0).epsilon(1e-2));
}

TEST_CASE("Adam skips non-finite gradients") {
  AdamConfig cfg;
  AdamState st;
  st.reset(2);
  std::vector<double> p{1.0, 2.0};
  const auto rates = ones(2, 1e-2);
  CHECK_FALSE(step_parameters(p, std::vector<double>{std::numeric_limits<double>::quiet_NaN(), 1.0},
                              rates, cfg, st));
  CHECK(p[0] == 1.0);
  CHECK(p[1] == 2.0);
  CHECK(st.skipped == 1);
  CHECK(st.steps == 0);
}

TEST_CASE("learning rates follow parameter groups and polynomial order") {
  LensSystem<double> sys = plano_convex(20.0, 1.5, 2.0, 1.0, 10.0);
  sys.surfaces[1].type = SurfaceType::kHybrid;
  sys.surfaces[1].even = {0.0, 0.0, 0.0};
  sys.surfaces[1].odd_x = {0.0};
  sys.surfaces[1].odd_y = {0.0};
  sys.renumber();
  const ParamLayout layout(sys, LayoutOptions{true, false, 2, true, true, false});
  AdamConfig cfg;
  const double r = 2.0;
  const auto rates = learning_rates(layout, cfg, r);
  REQUIRE(rates.size() == layout.size());
  for (std::size_t i = 0; i < rates.size(); ++i) {
    const ParamEntry& e = layout.entries()[i];
    CAPTURE(e.name());
    switch (e.kind) {
      case ParamKind::kCurvature: CHECK(rates[i] == cfg.lr[0]); break;
      case ParamKind::kGap: CHECK(rates[i] == cfg.lr[1]); break;
      case ParamKind::kEven: CHECK(rates[i] == doctest::Approx(cfg.lr[3] / std::pow(r, 2 * e.order + 2))); break;
      case ParamKind::kOddX:
      case ParamKind::kOddY: CHECK(rates[i] == doctest::Approx(cfg.lr[4] / std::pow(r, 2 * e.order + 3))); break;
      default: break;
    }
  }
}
