#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "lensforge/imaging.hpp"
#include "lensforge/losses.hpp"

using namespace lensforge;
using namespace lensforge::testing;

namespace {

PsfGrid uniform_grid(int grid, int k, int wl, const std::vector<double>& taps) {
  PsfGrid g;
  g.resize(grid, k, wl);
  for (auto& t : g.taps) t = taps;
  return g;
}

std::vector<double> delta(int k) {
  std::vector<double> t(static_cast<std::size_t>(k * k), 0.0);
  t[static_cast<std::size_t>((k / 2) * k + k / 2)] = 1.0;
  return t;
}

std::vector<double> gaussian(int k, double sigma, double sx = 0.0) {
  std::vector<double> t(static_cast<std::size_t>(k * k));
  double sum = 0.0;
  for (int y = 0; y < k; ++y) {
    for (int x = 0; x < k; ++x) {
      const double dx = x - k / 2 - sx, dy = y - k / 2;
      t[static_cast<std::size_t>(y * k + x)] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
      sum += t[static_cast<std::size_t>(y * k + x)];
    }
  }
  for (auto& v : t) v /= sum;
  return t;
}

Image random_image(int ch, int h, int w, unsigned seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(ch, h, w);
  for (auto& p : img.channels) {
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = u(gen);
  }
  return img;
}

Image chart(int h, int w) {
  Image img(1, h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) img.channels[0](r, c) = ((r / 4 + c / 4) % 2) ? 0.9 : 0.1;
  }
  return img;
}

int mirror(int i, int n) {
  while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
  return i;
}

// Dense oracle: every output pixel is the sum over all taps of the blended
// kernel times the mirrored input, with site weights recomputed from scratch.
double dense_pixel(const Image& img, const PsfGrid& g, int ch, int r, int c) {
  const int h = img.rows(), w = img.cols(), k = g.kernel;
  double out = 0.0;
  for (int sy = 0; sy < g.grid; ++sy) {
    for (int sx = 0; sx < g.grid; ++sx) {
      const double gx = (c + 0.5) / w * (g.grid - 1), gy = (r + 0.5) / h * (g.grid - 1);
      const double wx = std::max(0.0, 1.0 - std::abs(gx - sx));
      const double wy = std::max(0.0, 1.0 - std::abs(gy - sy));
      if (wx * wy == 0.0) continue;
      const auto& taps = g.at(sy * g.grid + sx, ch);
      for (int ty = 0; ty < k; ++ty) {
        for (int tx = 0; tx < k; ++tx) {
          const int rr = mirror(r - (ty - k / 2), h), cc = mirror(c - (tx - k / 2), w);
          out += wx * wy * taps[static_cast<std::size_t>(ty * k + tx)] * img.channels[static_cast<std::size_t>(ch)](rr, cc);
        }
      }
    }
  }
  return out;
}

double inner(const Image& a, const Image& b) {
  double s = 0.0;
  for (int ch = 0; ch < a.channel_count(); ++ch) {
    s += a.channels[static_cast<std::size_t>(ch)].cwiseProduct(b.channels[static_cast<std::size_t>(ch)]).sum();
  }
  return s;
}

}  // namespace

TEST_CASE("simulate with delta kernels is the identity") {
  const Image img = random_image(3, 20, 24, 1);
  const Image out = simulate(img, uniform_grid(4, 7, 3, delta(7)));
  for (int ch = 0; ch < 3; ++ch) {
    CHECK((out.channels[ch] - img.channels[ch]).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("simulate preserves a uniform image") {
  Image img(1, 16, 16, 0.37);
  PsfGrid g;
  g.resize(3, 5, 1);
  std::mt19937 gen(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& t : g.taps) {
    double s = 0.0;
    for (auto& v : t) s += (v = u(gen));
    for (auto& v : t) v /= s;
  }
  const Image out = simulate(img, g);
  CHECK((out.channels[0].array() - 0.37).abs().maxCoeff() < 1e-14);
}

TEST_CASE("simulate matches a dense convolution oracle") {
  const Image img = random_image(2, 18, 22, 2);
  SUBCASE("one Gaussian everywhere") {
    const PsfGrid g = uniform_grid(3, 9, 2, gaussian(9, 1.3));
    const Image out = simulate(img, g);
    for (int ch = 0; ch < 2; ++ch)
      for (int r = 0; r < 18; ++r)
        for (int c = 0; c < 22; ++c) CHECK(out.channels[ch](r, c) == doctest::Approx(dense_pixel(img, g, ch, r, c)).epsilon(1e-6));
  }
  SUBCASE("spatially varying shifted kernels") {
    PsfGrid g;
    g.resize(3, 7, 2);
    for (int s = 0; s < 9; ++s)
      for (int w = 0; w < 2; ++w) g.at(s, w) = gaussian(7, 0.6 + 0.2 * s, 0.3 * (s % 3) - 0.3);
    const Image out = simulate(img, g);
    double worst = 0.0;
    for (int ch = 0; ch < 2; ++ch)
      for (int r = 0; r < 18; ++r)
        for (int c = 0; c < 22; ++c) worst = std::max(worst, std::abs(out.channels[ch](r, c) - dense_pixel(img, g, ch, r, c)));
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("simulate kernel adjoint satisfies the dot-product test") {
  const Image img = random_image(2, 14, 12, 3);
  const Image adj = random_image(2, 14, 12, 4);
  PsfGrid dir;
  dir.resize(3, 5, 2);
  std::mt19937 gen(9);
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& t : dir.taps)
    for (auto& v : t) v = n(gen);
  const PsfGrid grad = simulate_kernel_vjp(img, dir, adj);
  // simulate is linear in the kernels, so <adj, simulate(dir)> = <grad, dir>.
  double rhs = 0.0;
  for (std::size_t i = 0; i < dir.taps.size(); ++i)
    for (std::size_t j = 0; j < dir.taps[i].size(); ++j) rhs += grad.taps[i][j] * dir.taps[i][j];
  CHECK(inner(adj, simulate(img, dir)) == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("recorded simulation reproduces values and kernel gradients") {
  const Image img = random_image(1, 10, 10, 5);
  const Image adj = random_image(1, 10, 10, 6);
  const PsfGrid g = uniform_grid(2, 3, 1, gaussian(3, 0.8));
  GradientTape tape;
  TapeScope scope(tape);
  KernelSet<DiffScalar> dk;
  dk.resize(2, 3, 1);
  for (std::size_t i = 0; i < g.taps.size(); ++i)
    for (std::size_t j = 0; j < g.taps[i].size(); ++j) dk.taps[i][j] = tape.parameter(g.taps[i][j]);
  const auto out = simulate_recorded(img, dk, 0, 10, 0, 10);
  const Image ref = simulate(img, g);
  std::vector<double> seeds;
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 10; ++c) {
      CHECK(out[static_cast<std::size_t>(r * 10 + c)].value() == doctest::Approx(ref.channels[0](r, c)).epsilon(1e-14));
      seeds.push_back(adj.channels[0](r, c));
    }
  const auto grad = tape.backward_seeded(out, seeds);
  const PsfGrid vjp = simulate_kernel_vjp(img, g, adj);
  std::size_t k = 0;
  for (const auto& t : vjp.taps)
    for (double v : t) CHECK(grad[k++] == doctest::Approx(v).epsilon(1e-12));
}

TEST_CASE("Wiener reconstruction limits") {
  const Image img = chart(32, 32);
  SUBCASE("delta PSF at tiny noise is the identity") {
    const Image out = wiener_reconstruct(img, uniform_grid(2, 7, 1, delta(7)), 1e-6);
    CHECK((out.channels[0] - img.channels[0]).cwiseAbs().maxCoeff() < 1e-3);
  }
  SUBCASE("huge noise drives the output to zero") {
    const Image out = wiener_reconstruct(img, uniform_grid(2, 7, 1, gaussian(7, 1.0)), 1e9);
    CHECK(out.channels[0].cwiseAbs().maxCoeff() < 1e-6);
  }
  SUBCASE("deblurring beats the blurred image") {
    const PsfGrid g = uniform_grid(2, 9, 1, gaussian(9, 1.2));
    const Image blurred = simulate(img, g);
    const Image rec = wiener_reconstruct(blurred, g, 1e-3);
    CHECK(psnr(rec, img) > psnr(blurred, img) + 3.0);
  }
  CHECK_THROWS_AS(wiener_reconstruct(img, uniform_grid(2, 3, 1, delta(3)), 0.0), std::invalid_argument);
}

TEST_CASE("Wiener adjoint matches finite differences") {
  const Image raw = random_image(1, 12, 10, 7);
  const Image adj = random_image(1, 12, 10, 8);
  PsfGrid g;
  g.resize(2, 5, 1);
  for (int s = 0; s < 4; ++s) g.at(s, 0) = gaussian(5, 0.7 + 0.15 * s, 0.2 * s - 0.3);
  const double nsr = 0.01;
  Image raw_grad;
  PsfGrid kernel_grad;
  wiener_vjp(raw, g, nsr, adj, &raw_grad, &kernel_grad);
  auto loss = [&](const Image& r, const PsfGrid& k) { return inner(adj, wiener_reconstruct(r, k, nsr)); };
  const double h = 1e-6;
  for (int s = 0; s < 4; ++s) {
    for (int t : {0, 7, 12, 18}) {
      PsfGrid p = g, m = g;
      p.at(s, 0)[t] += h;
      m.at(s, 0)[t] -= h;
      const double fd = (loss(raw, p) - loss(raw, m)) / (2 * h);
      CHECK(kernel_grad.at(s, 0)[t] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
  // The raw-image map is linear: dot-product test.
  const Image dir = random_image(1, 12, 10, 11);
  CHECK(inner(adj, wiener_reconstruct(dir, g, nsr)) == doctest::Approx(inner(raw_grad, dir)).epsilon(1e-10));
}

TEST_CASE("prewarp") {
  const Image img = chart(40, 40);
  SUBCASE("identity fit leaves the image unchanged") {
    DistortionFit id;
    id.h_max = 1.0;
    const Image out = prewarp(img, id, 0.05);
    CHECK((out.channels[0] - img.channels[0]).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("barrel fit yields a pincushion pre-warp") {
    DistortionFit barrel;
    barrel.h_max = 1.0;
    barrel.coeffs = {1.0, -0.05, 0.0, 0.0};  // 5% barrel at the edge
    Image dot(1, 41, 41);
    dot.channels[0](20 + 12, 20 + 12) = 1.0;
    const Image out = prewarp(dot, barrel, 1.0 / 20.0);
    double sx = 0.0, sy = 0.0, m = 0.0;
    for (int r = 0; r < 41; ++r)
      for (int c = 0; c < 41; ++c) {
        sx += c * out.channels[0](r, c);
        sy += r * out.channels[0](r, c);
        m += out.channels[0](r, c);
      }
    CHECK(sx / m > 32.0);
    CHECK(sy / m > 32.0);
  }
  SUBCASE("round trip through the lens map lands probes at ideal positions") {
    DistortionFit fit;
    fit.h_max = 1.6;
    fit.coeffs = {0.99, -0.06, 0.01, 0.0};
    const int n = 64;
    const double pitch = 0.05;
    std::mt19937 gen(3);
    std::uniform_int_distribution<int> pick(8, n - 9);
    double worst = 0.0;
    for (int probe = 0; probe < 64; ++probe) {
      const int pr = pick(gen), pc = pick(gen);
      Image dot(1, n, n);
      dot.channels[0](pr, pc) = 1.0;
      const Image warped = prewarp(dot, fit, pitch);
      double sx = 0.0, sy = 0.0, m = 0.0;
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
          const double v = warped.channels[0](r, c);
          sx += v * ((c + 0.5 - n / 2.0) * pitch);
          sy += v * ((r + 0.5 - n / 2.0) * pitch);
          m += v;
        }
      REQUIRE(m > 0.0);
      const double qx = sx / m, qy = sy / m, rad = std::hypot(qx, qy);
      const double s = rad > 0 ? fit.forward(rad) / rad : 1.0;
      const double lx = qx * s / pitch + n / 2.0 - 0.5, ly = qy * s / pitch + n / 2.0 - 0.5;
      worst = std::max(worst, std::hypot(lx - pc, ly - pr));
    }
    CHECK(worst < 0.5);
  }
  SUBCASE("samples inside the border half-pixel keep full weight") {
    Image flat(1, 20, 20);
    flat.channels[0].setConstant(0.6);
    DistortionFit grow;
    grow.h_max = 1.0;
    grow.coeffs = {1.02, 0.0, 0.0, 0.0};  // edge pixels sample 0.2 px outside the centre row
    const Image out = prewarp(flat, grow, 0.1);
    CHECK(out.channels[0](0, 10) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(out.channels[0](10, 19) == doctest::Approx(0.6).epsilon(1e-12));
    grow.coeffs = {1.2, 0.0, 0.0, 0.0};
    CHECK(prewarp(flat, grow, 0.1).channels[0](0, 10) == 0.0);
  }
  SUBCASE("non-monotone fit is rejected") {
    DistortionFit bad;
    bad.h_max = 1.0;
    bad.coeffs = {1.0, -1.0, 0.0, 0.0};
    CHECK_THROWS_AS(prewarp(img, bad, 0.05), DistortionError);
  }
}

TEST_CASE("PSNR and SSIM") {
  Image zero(1, 16, 16, 0.0), half(1, 16, 16, 0.5);
  CHECK(psnr(zero, half) == doctest::Approx(20.0 * std::log10(2.0)).epsilon(1e-12));
  CHECK(psnr(half, half) == 99.0);
  const Image a = random_image(3, 24, 24, 1), b = random_image(3, 24, 24, 2);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-15));
  CHECK(ssim(a, b) < 0.5);
  CHECK_THROWS_AS(ssim(a, zero), std::invalid_argument);
}

TEST_CASE("PSF grid of a singlet") {
  LensSystem<double> sys = plano_convex(20.0, 1.5, 2.0, 1.0, 0.0);
  sys.sensor_z = 2.0 + paraxial_solve(sys, 0.587).bfd;
  sys.sensor_width = 32;
  sys.sensor_height = 32;
  sys.sensor_diagonal = 1.5;
  PsfGridSpec spec;
  spec.grid = 3;
  spec.kernel = 9;
  spec.spp = 36;
  const PsfGrid g = build_psf_grid(sys, spec);
  REQUIRE(g.sites() == 9);
  for (const auto& t : g.taps) {
    double s = 0.0;
    for (double v : t) s += v;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  // The center site of a 3x3 grid is on axis, so its kernel peaks in the middle.
  const auto& center = g.at(4, 0);
  double peak = 0.0;
  for (double v : center) peak = std::max(peak, v);
  CHECK(center[static_cast<std::size_t>(4 * 9 + 4)] == peak);

  SUBCASE("failure names the depth") {
    sys.surfaces[1].semi_diameter = 1e-3;
    sys.surfaces[2].semi_diameter = 1e-3;
    try {
      build_psf_grid(sys, spec);
      FAIL("expected PsfError");
    } catch (const PsfError& e) {
      CHECK(std::string(e.what()).find("depth") != std::string::npos);
    }
  }
}
