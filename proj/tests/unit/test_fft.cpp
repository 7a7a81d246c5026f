#include <doctest.h>

#include <random>

#include "dbar/fft.hpp"

using namespace dbar;
using namespace dbar::solver;

namespace {

Complex kernel(Kernel which, int dx, int dy, double h) {
  if (dx == 0 && dy == 0) return 0;
  Complex d(dx * h, dy * h);
  return which == Kernel::inv_pi_zbar ? 1.0 / (pi * std::conj(d)) : 1.0 / (pi * d);
}

int wrap(int d, int n) {
  d %= n;
  if (d < 0) d += n;
  return d <= (n - 1) / 2 ? d : d - n;
}

// O(n⁴) direct sum.
Eigen::ArrayXXcd direct(const Eigen::ArrayXXcd& f, double h, Kernel which, bool linear) {
  const int n = static_cast<int>(f.rows());
  Eigen::ArrayXXcd out = Eigen::ArrayXXcd::Zero(n, n);
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix)
      for (int jy = 0; jy < n; ++jy)
        for (int jx = 0; jx < n; ++jx) {
          int dx = ix - jx, dy = iy - jy;
          if (!linear) dx = wrap(dx, n), dy = wrap(dy, n);
          out(ix, iy) += h * h * kernel(which, dx, dy, h) * f(jx, jy);
        }
  return out;
}

Eigen::ArrayXXcd random_field(int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::ArrayXXcd f(n, n);
  for (int i = 0; i < n * n; ++i) f(i) = Complex(g(rng), g(rng));
  return f;
}

}  // namespace

TEST_CASE("zero input gives zero output") {
  CauchyConvolution c(17, 0.3, Kernel::inv_pi_k);
  auto out = c.apply(Eigen::ArrayXXcd::Zero(17, 17));
  CHECK(out.abs().maxCoeff() == 0.0);
}

TEST_CASE("point mass reproduces the kernel") {
  const int n = 17;
  const double h = 0.25;
  for (bool linear : {false, true}) {
    CauchyConvolution c(n, h, Kernel::inv_pi_k, linear);
    Eigen::ArrayXXcd f = Eigen::ArrayXXcd::Zero(n, n);
    f(8, 8) = 1.0;
    auto out = c.apply(f);
    for (int iy = 0; iy < n; ++iy)
      for (int ix = 0; ix < n; ++ix)
        CHECK(std::abs(out(ix, iy) - h * h * kernel(Kernel::inv_pi_k, ix - 8, iy - 8, h)) < 1e-12);
  }
}

TEST_CASE("FFT convolution matches the direct sum") {
  for (int n : {9, 12}) {
    for (Kernel k : {Kernel::inv_pi_k, Kernel::inv_pi_zbar}) {
      for (bool linear : {false, true}) {
        CAPTURE(n);
        CAPTURE(linear);
        const double h = 0.4;
        auto f = random_field(n, 3 + n);
        CauchyConvolution c(n, h, k, linear);
        auto got = c.apply(f), want = direct(f, h, k, linear);
        CHECK((got - want).abs().maxCoeff() < 1e-12 * std::max(1.0, want.abs().maxCoeff()));
      }
    }
  }
}

TEST_CASE("linearity and raw pointer interface") {
  const int n = 16;
  CauchyConvolution c(n, 0.2, Kernel::inv_pi_z);
  auto f = random_field(n, 1), g = random_field(n, 2);
  Complex a(0.3, -1.2);
  auto lhs = c.apply(f + a * g);
  Eigen::ArrayXXcd rhs = c.apply(f) + a * c.apply(g);
  CHECK((lhs - rhs).abs().maxCoeff() < 1e-12);
  Eigen::ArrayXXcd out(n, n);
  c.apply(f.data(), out.data());
  CHECK((out == c.apply(f)).all());
  CHECK(c.size() == n);
  CHECK(c.step() == 0.2);
}

TEST_CASE("invalid grids are rejected") {
  CHECK_THROWS_AS(CauchyConvolution(0, 0.1, Kernel::inv_pi_k), Error);
  CHECK_THROWS_AS(CauchyConvolution(8, 0.0, Kernel::inv_pi_k), Error);
}
