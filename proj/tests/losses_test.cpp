#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "lensforge/losses.hpp"

using namespace lensforge;
using namespace lensforge::testing;

namespace {

LensSystem<double> two_planes(double gap, Material between = air()) {
  LensSystem<double> sys;
  sys.surfaces.push_back(plane(0.0, 2.0, between));
  sys.surfaces.push_back(plane(gap, 2.0));
  sys.surfaces.back().is_stop = true;
  sys.surfaces.back().type = SurfaceType::kStop;
  sys.sensor_z = gap + 1.0;
  sys.renumber();
  return sys;
}

struct Recorded {
  double value;
  std::vector<double> grad;
};

// Evaluates f on a system whose listed z positions and curvatures are leaves.
template <typename F>
Recorded with_leaves(const LensSystem<double>& base, F f) {
  GradientTape tape;
  TapeScope scope(tape);
  LensSystem<DiffScalar> sys = base.cast<DiffScalar>();
  for (auto& s : sys.surfaces) {
    s.z = tape.parameter(s.z.value());
    s.curvature = tape.parameter(s.curvature.value());
  }
  DiffScalar v = f(sys);
  return {v.value(), tape.backward(v)};
}

}  // namespace

TEST_CASE("angle loss clamps at 0.7") {
  CHECK(loss_angle(10.0, 10, 0.7) == -0.7);
  GradientTape tape;
  TapeScope scope(tape);
  DiffScalar cos1 = tape.parameter(0.5);
  DiffScalar v = loss_angle(cos1, 1, 0.7);
  CHECK(v.value() == -0.5);
  CHECK(tape.backward(v)[0] == -1.0);  // descent raises the cosine

  DiffScalar a = tape.parameter(0.9), b = tape.parameter(0.8);
  DiffScalar clamped = loss_angle(a * b, 1, 0.7);
  CHECK(clamped.value() == -0.7);
  auto g = tape.backward(clamped);
  CHECK(g[1] == 0.0);
  CHECK(g[2] == 0.0);
  CHECK_THROWS_AS(loss_angle(0.0, 0, 0.7), std::invalid_argument);
}

TEST_CASE("distance loss") {
  RegularizerConfig cfg;
  auto far = with_leaves(two_planes(1.0), [&](auto& s) { return loss_dist(s, cfg).value; });
  CHECK(far.value == -0.2);
  for (double g : far.grad) CHECK(g == 0.0);

  auto near = with_leaves(two_planes(0.1), [&](auto& s) { return loss_dist(s, cfg).value; });
  CHECK(near.value == doctest::Approx(-0.1).epsilon(1e-15));
  CHECK(near.grad[2] < 0.0);  // d/dz of the rear surface: descent moves it back
  CHECK(near.grad[0] > 0.0);

  auto glass_gap = with_leaves(two_planes(0.5, glass(1.5)),
                               [&](auto& s) { return loss_dist(s, cfg).value; });
  CHECK(glass_gap.value == -0.4);
  for (double g : glass_gap.grad) CHECK(g == 0.0);
  auto thin_glass = with_leaves(two_planes(0.3, glass(1.5)),
                                [&](auto& s) { return loss_dist(s, cfg).value; });
  CHECK(thin_glass.value == doctest::Approx(-0.3).epsilon(1e-15));

  // Rear surface bends forward through the front plane at the rim.
  auto crossing = two_planes(0.05);
  const double s = -0.1, r = 2.0;
  crossing.surfaces[1].type = SurfaceType::kAspheric;
  crossing.surfaces[1].is_stop = false;
  crossing.surfaces[1].curvature = 2.0 * s / (r * r + s * s);
  auto d = loss_dist(crossing, cfg);
  CHECK(d.self_intersecting);
  CHECK(d.value == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(d.min_gap == doctest::Approx(-0.05).epsilon(1e-9));
  CHECK_FALSE(loss_dist(two_planes(0.1), cfg).self_intersecting);
}

TEST_CASE("shape loss") {
  RegularizerConfig cfg;
  LensSystem<double> flat = two_planes(1.0);
  flat.surfaces[1].is_stop = false;
  flat.surfaces[1].type = SurfaceType::kAspheric;
  auto f = with_leaves(flat, [&](auto& s) { return loss_shape(s, cfg); });
  CHECK(f.value == 1.0);
  for (double g : f.grad) CHECK(g == 0.0);

  auto steep = flat;
  const double sd = 2.0, cr = 0.8 / std::sqrt(1.64);
  steep.surfaces[0].curvature = cr / sd;
  auto st = with_leaves(steep, [&](auto& s) { return loss_shape(s, cfg); });
  CHECK(st.value == doctest::Approx(0.8 + 0.5).epsilon(1e-12));
  CHECK(st.grad[1] > 0.0);  // descent flattens

  auto tie = flat;
  const double ct = 0.5 / std::sqrt(1.25);
  tie.surfaces[0].curvature = ct / sd;
  auto t = with_leaves(tie, [&](auto& s) { return loss_shape(s, cfg); });
  CHECK(t.value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("mask construction") {
  Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(4, 4, 3.0);
  CHECK(build_mask(uniform, 8, 8).isOnes());

  Eigen::MatrixXd hot = Eigen::MatrixXd::Ones(4, 4);
  hot(3, 3) = 10.0;
  Eigen::MatrixXd m = build_mask(hot, 4, 4);
  CHECK(m(3, 3) == 1.0);
  CHECK(m.sum() == 1.0);
  Eigen::MatrixXd big = build_mask(hot, 31, 31);
  Eigen::Index r, c;
  big.maxCoeff(&r, &c);
  CHECK(r == 30);
  CHECK(c == 30);
  CHECK(big(0, 0) == 0.0);
  CHECK(big(30, 30) == 1.0);

  Eigen::MatrixXd half(2, 2);
  half << 1.0, 3.0, 1.0, 3.0;  // mean 2: the 1.0 fields sit at 0.5 x mean
  Eigen::MatrixXd hm = build_mask(half, 2, 2);
  CHECK(hm(0, 0) == 0.0);
  CHECK(hm(1, 0) == 0.0);
  CHECK(hm(0, 1) == 1.0);
  CHECK(hm(1, 1) == 1.0);
  CHECK(((hm.array() >= 0.0) && (hm.array() <= 1.0)).all());

  Eigen::MatrixXd q(2, 2);
  q << 1, 2, 3, 4;
  Eigen::MatrixXd full = mirror_quadrant(q);
  CHECK(full.rows() == 3);
  CHECK(full(0, 0) == 4);
  CHECK(full(1, 1) == 1);
  CHECK(full(2, 1) == 3);
}

TEST_CASE("masked image loss") {
  Image a(2, 3, 4, 0.25), b(2, 3, 4, 0.0);
  a.channels[1](2, 3) = 0.75;
  Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(3, 4);
  const double base = masked_mse(a, b, ones);
  CHECK(masked_mse(a, b, 2.0 * ones) == doctest::Approx(4.0 * base));
  CHECK(masked_mse(a, b, Eigen::MatrixXd::Zero(3, 4)) == 0.0);
  CHECK(mse(a, b) == base);

  Image grad;
  Eigen::MatrixXd mask = Eigen::MatrixXd::Random(3, 4).cwiseAbs();
  masked_mse(a, b, mask, &grad);
  const double h = 1e-6;
  Image ap = a, am = a;
  ap.channels[1](2, 3) += h;
  am.channels[1](2, 3) -= h;
  const double fd = (masked_mse(ap, b, mask) - masked_mse(am, b, mask)) / (2 * h);
  CHECK(grad.channels[1](2, 3) == doctest::Approx(fd).epsilon(1e-6));

  CHECK_THROWS_AS(mse(a, Image(2, 3, 3)), std::invalid_argument);
  CHECK_THROWS_AS(masked_mse(a, b, Eigen::MatrixXd::Ones(2, 2)), std::invalid_argument);
}

TEST_CASE("composite design loss") {
  RegularizerConfig cfg;
  LensSystem<double> sys = two_planes(1.0);
  sys.surfaces[1].is_stop = false;
  sys.surfaces[1].type = SurfaceType::kAspheric;
  Regularizers<double> regs;
  regs.angle = loss_angle(1.0, 1, cfg.eps_angle);
  regs.dist = loss_dist(sys, cfg).value;
  regs.shape = loss_shape(sys, cfg);
  Image img(1, 4, 4, 0.5);
  const double v = masked_design_loss(img, img, Eigen::MatrixXd::Ones(4, 4), regs, cfg);
  CHECK(v == doctest::Approx(0.02 * -0.7 + 0.02 * -0.2 + 0.02 * (2 * 0.5)).epsilon(1e-15));
}
