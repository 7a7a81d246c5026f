#include <doctest.h>

#include <algorithm>

#include "dbar/evaluation.hpp"

using namespace dbar;
using namespace dbar::evaluation;

namespace {

constexpr double R0 = 0.15;

recovery::AdmittivityImage rasterize(const forward::Phantom& p, int n = 64) {
  recovery::AdmittivityImage img;
  img.grid = recovery::ZGrid::make(n, 1.05, geometry::BoundaryGeometry::circle(R0), R0);
  img.scale_radius = R0;
  img.values = Eigen::ArrayXXcd::Zero(n, n);
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) img.values(ix, iy) = p.value_at(img.grid.point(ix, iy) * R0);
  img.valid = img.grid.mask;
  return img;
}

// Off-centre blob without rotational symmetry.
forward::Phantom blob(double angle) {
  auto p = forward::Phantom::homogeneous(0.4);
  Complex c = std::polar(0.07, angle);
  p.inclusions.push_back({forward::Ellipse{c, 0.04, 0.02, angle}, 0.8, "blob"});
  p.inclusions.push_back({forward::Ellipse{std::polar(0.05, angle + 2.2), 0.025, 0.025, 0.0}, 0.2, "dot"});
  return p;
}

}  // namespace

TEST_CASE("constant image statistics") {
  auto img = rasterize(forward::Phantom::homogeneous(Complex(0.424, 0.03)));
  auto masks = phantom_regions(forward::heart_and_lungs(R0), img.grid, R0);
  CHECK(masks.size() == 4);
  for (const auto& s : region_stats(img, masks)) {
    CHECK(s.re.avg == doctest::Approx(0.424));
    CHECK(s.re.max == doctest::Approx(0.424));
    CHECK(s.re.min == doctest::Approx(0.424));
    CHECK(s.im.avg == doctest::Approx(0.03));
    CHECK(s.pixels > 0);
  }
}

TEST_CASE("region statistics of a rasterized phantom") {
  auto truth = forward::heart_and_lungs(R0);
  auto img = rasterize(truth);
  auto masks = phantom_regions(truth, img.grid, R0);
  for (const auto& s : region_stats(img, masks)) {
    double want = s.name == "heart" ? 0.75 : s.name == "background" ? 0.424 : 0.24;
    CHECK(s.re.avg == doctest::Approx(want));
  }
  // Stats ignore the order of the masks.
  std::vector<RegionMask> reversed(masks.rbegin(), masks.rend());
  auto a = region_stats(img, masks), b = region_stats(img, reversed);
  for (const auto& s : a) {
    auto it = std::find_if(b.begin(), b.end(), [&](const RegionStats& o) { return o.name == s.name; });
    REQUIRE(it != b.end());
    CHECK(it->re.avg == s.re.avg);
    CHECK(it->pixels == s.pixels);
  }
}

TEST_CASE("dynamic range") {
  CHECK(dynamic_range(0.75, 0.24, 0.75, 0.24) == doctest::Approx(100.0));
  CHECK(dynamic_range(0.74, 0.15, 0.75, 0.24) == doctest::Approx(115.6862745098).epsilon(1e-10));
  CHECK(dynamic_range(0.4, 0.4, 0.75, 0.24) == 0.0);
  try {
    dynamic_range(0.5, 0.2, 0.3, 0.3);
    FAIL("expected DegenerateTruth");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateTruth);
  }
  auto img = rasterize(forward::heart_and_lungs(R0));
  CHECK(dynamic_range(img, 0.75, 0.24) == doctest::Approx(100.0));
}

TEST_CASE("empty regions are reported") {
  auto img = rasterize(forward::Phantom::homogeneous(0.4));
  try {
    make_region("outside", forward::Ellipse{Complex(1.0, 1.0), 0.01, 0.01, 0.0}, img.grid, R0);
    FAIL("expected EmptyRegion");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyRegion);
  }
  auto mask = make_region("centre", forward::Ellipse{0.0, 0.03, 0.03, 0.0}, img.grid, R0);
  std::fill(img.valid.begin(), img.valid.end(), 0);
  try {
    region_stats(img, std::span(&mask, 1));
    FAIL("expected EmptyRegion");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyRegion);
  }
}

TEST_CASE("rotation estimate") {
  auto a = rasterize(blob(0.3));
  SUBCASE("sweep over rotated phantoms") {
    for (int i = 0; i < 16; ++i) {
      double alpha = -pi + (i + 0.5) * 2 * pi / 16;
      auto b = rasterize(blob(0.3 + alpha));
      double est = rotation_estimate(a, b);
      double err = std::remainder(est - alpha, 2 * pi);
      CAPTURE(alpha);
      CHECK(std::abs(err) <= 2 * pi / 256);
    }
  }
  SUBCASE("rotate_image is recovered exactly") {
    const double alpha = 2 * pi * 20 / 256;
    auto b = rotate_image(a, alpha);
    CHECK(std::abs(rotation_estimate(a, b) - alpha) <= 2 * pi / 256);
    CHECK(std::abs(rotation_estimate(a, a)) <= 1e-12);
  }
  SUBCASE("flat images have nothing to correlate") {
    auto flat = rasterize(forward::Phantom::homogeneous(0.4));
    try {
      rotation_estimate(flat, a);
      FAIL("expected FlatImage");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::FlatImage);
    }
  }
  SUBCASE("grids must match") {
    auto small = rasterize(blob(0.3), 32);
    CHECK_THROWS_AS(rotation_estimate(a, small), Error);
  }
}
