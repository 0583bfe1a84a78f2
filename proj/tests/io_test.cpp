#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "fixtures.hpp"
#include "lensforge/edof.hpp"
#include "lensforge/io.hpp"

using namespace lensforge;
using namespace lensforge::testing;

namespace {

const char* kMinimal =
    "lensforge-lens v1\n"
    "wavelengths 0.587\n"
    "surf stop c=0 k=0 z=0 sd=1 mat=air stop\n"
    "sensor z=10 diag=2 res=64x48\n";

int error_line(const std::string& text) {
  try {
    parse_lens(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

std::string error_message(const std::string& text) {
  try {
    parse_lens(text);
  } catch (const ParseError& e) {
    return e.what();
  }
  return "";
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("lensforge_io_" + name);
}

}  // namespace

TEST_CASE("minimal lens file") {
  const LensFile f = parse_lens(kMinimal);
  REQUIRE(f.system.surfaces.size() == 1);
  CHECK(f.system.surfaces[0].is_stop);
  CHECK(f.system.sensor_z == 10.0);
  CHECK(f.system.sensor_width == 64);
  CHECK(f.system.sensor_height == 48);
  CHECK(f.system.wavelengths == std::vector<double>{0.587});
}

TEST_CASE("lens round trip is exact") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const LensSystem<double> sys = random_system(seed);
    const std::string text = serialize_lens(sys);
    const LensFile back = parse_lens(text);
    CHECK_MESSAGE(identical(sys, back.system), text);
    CHECK(serialize_lens(back.system) == text);
  }
}

TEST_CASE("hybrid system round trip and provenance") {
  LensSystem<double> sys = plano_convex(20.0, 1.5, 2.0, 1.0, 40.0);
  sys = make_hybrid(sys, -1, 2);
  sys.surfaces[1].odd_x = {1.0 / 3.0, -2.5e-7};
  sys.surfaces[1].odd_y = {0.1, 0.2};
  const Provenance p{{"seed", "7"}, {"config_hash", "00ff"}, {"command", "edof"}};
  const LensFile back = parse_lens(serialize_lens(sys, p));
  CHECK(identical(sys, back.system));
  CHECK(back.provenance == p);
}

TEST_CASE("shortest decimal formatting") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-0.0) == "-0");
  CHECK(format_double(1e-300) == "1e-300");
  const double third = 1.0 / 3.0;
  CHECK(std::stod(format_double(third)) == third);
}

TEST_CASE("lens parse errors carry positions") {
  CHECK(error_line("lensforge-lens v2\n") == 1);
  CHECK(error_line("not-a-lens v1\n") == 1);
  const std::string two_stops =
      "lensforge-lens v1\n"
      "surf stop c=0 k=0 z=0 sd=1 mat=air stop\n"
      "surf aspheric c=0.01 k=0 z=1 sd=2 mat=crown\n"
      "surf aspheric c=0 k=0 z=3 sd=2 mat=air stop\n"
      "sensor z=10 diag=2 res=8x8\n";
  CHECK(error_line(two_stops) == 4);
  CHECK(error_message(two_stops).find("line 2") != std::string::npos);
  const std::string backwards =
      "lensforge-lens v1\n"
      "surf stop c=0 k=0 z=0 sd=1 mat=air stop\n"
      "surf aspheric c=0 k=0 z=0 sd=2 mat=crown\n"
      "surf aspheric c=0 k=0 z=1 sd=2 mat=air\n"
      "sensor z=10 diag=2 res=8x8\n";
  CHECK(error_line(backwards) == 3);
  const std::string unknown_glass =
      "lensforge-lens v1\n"
      "surf stop c=0 k=0 z=0 sd=1 mat=unobtainium stop\n"
      "sensor z=10 diag=2 res=8x8\n";
  try {
    parse_lens(unknown_glass);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(e.column() == 32);
  }
  CHECK(error_line("lensforge-lens v1\nsurf stop z=0 sd=1 foo=2\nsensor z=1 diag=1 res=1x1\n") == 2);
  CHECK(error_line("lensforge-lens v1\nsurf stop z=zero sd=1\nsensor z=1 diag=1 res=1x1\n") == 2);
  CHECK(error_line("lensforge-lens v1\nsurf aspheric c=0 x3=1 z=0 sd=1 stop\nsensor z=1 diag=1 res=1x1\n") == 2);
  // No stop at all is caught by the system invariants.
  CHECK_THROWS_AS(parse_lens("lensforge-lens v1\nsurf aspheric z=0 sd=1\nsensor z=1 diag=1 res=1x1\n"), ParseError);
  CHECK_THROWS_AS(parse_lens("lensforge-lens v1\nsurf stop z=0 sd=1\n"), ParseError);
}

TEST_CASE("glass catalog") {
  MaterialCatalog cat;
  parse_catalog("# test glasses\nglass lak A=1.7 B=0.005\nglass nbk nd=1.5168 V=64.17\n", cat);
  REQUIRE(cat.find("lak"));
  CHECK(cat.find("lak")->a == 1.7);
  REQUIRE(cat.find("nbk"));
  CHECK(cat.find("nbk")->index(kWavelengthD) == doctest::Approx(1.5168).epsilon(1e-12));
  const std::string text =
      "lensforge-lens v1\n"
      "surf stop z=0 sd=1 stop\n"
      "surf aspheric c=0.01 z=1 sd=2 mat=lak\n"
      "surf aspheric z=2 sd=2\n"
      "sensor z=10 diag=2 res=8x8\n";
  CHECK(parse_lens(text, cat).system.surfaces[1].material.a == 1.7);
  CHECK_THROWS_AS(parse_lens(text), ParseError);
  MaterialCatalog c2;
  CHECK_THROWS_AS(parse_catalog("glass x A=1.5\n", c2), ParseError);
  CHECK_THROWS_AS(parse_catalog("lens x A=1.5 B=0\n", c2), ParseError);
  CHECK_THROWS_AS(parse_catalog("glass x nd=1.5 B=0\n", c2), ParseError);
}

TEST_CASE("portable pixmaps") {
  Image rgb(3, 5, 7);
  for (int c = 0; c < 3; ++c)
    for (int r = 0; r < 5; ++r)
      for (int x = 0; x < 7; ++x) rgb.channels[static_cast<std::size_t>(c)](r, x) = (c * 35 + r * 7 + x) / 104.0;
  for (int bits : {8, 16}) {
    const auto path = temp_path("rgb" + std::to_string(bits) + ".ppm");
    write_pnm(path.string(), rgb, bits);
    const Image back = read_pnm(path.string());
    REQUIRE(back.same_shape(rgb));
    const double step = bits == 8 ? 1.0 / 255 : 1.0 / 65535;
    for (int c = 0; c < 3; ++c) {
      CHECK((back.channels[static_cast<std::size_t>(c)] - rgb.channels[static_cast<std::size_t>(c)])
                .cwiseAbs()
                .maxCoeff() <= 0.5 * step + 1e-15);
    }
    std::filesystem::remove(path);
  }
  Image gray(1, 2, 2);
  gray.channels[0] << -1.0, 0.5, 2.0, 1.0;
  const auto path = temp_path("gray.pgm");
  write_pnm(path.string(), gray);
  const Image back = read_pnm(path.string());
  CHECK(back.channel_count() == 1);
  CHECK(back.channels[0](0, 0) == 0.0);
  CHECK(back.channels[0](1, 0) == 1.0);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(write_pnm(path.string(), gray, 12), std::invalid_argument);
}

TEST_CASE("csv exports have units in headers") {
  std::ostringstream a, b;
  write_log_csv(a, {EpochLog{}});
  CHECK(a.str().find("avg_rms_um") != std::string::npos);
  CHECK(a.str().find("efl_mm") != std::string::npos);
  write_depth_quality_csv(b, {DepthQuality{100, 20, 25}}, {DepthQuality{100, 21, 27}});
  CHECK(b.str() == "depth_mm,psnr_raw_before_db,psnr_recon_before_db,psnr_raw_after_db,psnr_recon_after_db\n"
                   "100,20,25,21,27\n");
}

TEST_CASE("mtf versus depth of a delta kernel is flat") {
  PsfGrid g;
  g.resize(3, 5, 1);
  for (int s = 0; s < g.sites(); ++s) g.at(s, 0)[12] = 1.0;
  std::ostringstream out;
  write_mtf_depth_csv(out, {g, g}, {100.0, 200.0}, 0.005, 0);
  std::istringstream in(out.str());
  std::string header, row;
  std::getline(in, header);
  CHECK(header.rfind("depth_mm,mtf_", 0) == 0);
  CHECK(header.find("_lpmm") != std::string::npos);
  while (std::getline(in, row)) {
    std::istringstream cells(row);
    std::string cell;
    std::getline(cells, cell, ',');
    while (std::getline(cells, cell, ',')) CHECK(std::stod(cell) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("psf mosaic layout") {
  PsfGrid g;
  g.resize(2, 3, 2);
  g.at(3, 1)[4] = 0.5;
  g.at(3, 1)[0] = 0.25;
  const Image m = psf_mosaic(g);
  CHECK(m.rows() == 7);
  CHECK(m.channel_count() == 2);
  CHECK(m.channels[1](5, 5) == 1.0);
  CHECK(m.channels[1](4, 4) == 0.5);
  CHECK(m.channels[0].sum() == 0.0);
}
