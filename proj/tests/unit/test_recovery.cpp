#include <doctest.h>

#include "dbar/recovery.hpp"

using namespace dbar;
using namespace dbar::recovery;

namespace {

solver::CGOField scalar_field(const ZGrid& g, Complex mu) {
  solver::CGOField f;
  f.grid = g;
  f.kind = solver::CGOKind::mu_scalar;
  f.solutions.resize(static_cast<std::size_t>(g.n) * g.n);
  for (auto& s : f.solutions) s.mu0 = mu;
  return f;
}

// Q from log γ = a·exp(−|z|²/s²): Q12 = −½ ∂z log γ, Q21 = −½ ∂̄ log γ.
QPotential bump_q(const ZGrid& g, double a, double s) {
  QPotential q;
  q.q12 = Eigen::ArrayXXcd::Zero(g.n, g.n);
  q.q21 = q.q12;
  q.valid = g.mask;
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) {
      Complex z = g.point(ix, iy);
      double f = a * std::exp(-std::norm(z) / (s * s));
      q.q12(ix, iy) = 0.5 * std::conj(z) / (s * s) * f;
      q.q21(ix, iy) = 0.5 * z / (s * s) * f;
    }
  return q;
}

}  // namespace

TEST_CASE("unit mu gives the constant estimate") {
  auto g = ZGrid::make(16, 1.05, geometry::BoundaryGeometry::circle(1.0), 1.0);
  auto field = scalar_field(g, 1.0);
  auto abs = sigma_from_mu(field, 0.424, ImagingMode::absolute);
  auto diff = sigma_from_mu(field, 0.424, ImagingMode::difference);
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) {
      CHECK(abs.values(ix, iy) == Complex(0.424));
      CHECK(diff.values(ix, iy) == Complex(0));
    }
  CHECK(abs.valid_count() == g.masked_count());

  // sigma = gamma0 · mu², and failed pixels fall back to the baseline.
  auto other = scalar_field(g, 1.1);
  const int c = g.n / 2 + g.n * (g.n / 2);
  other.solutions[c].converged = false;
  auto img = sigma_from_mu(other, 0.5, ImagingMode::absolute);
  CHECK(std::abs(img.values(g.n / 2 + 1, g.n / 2) - 0.605) < 1e-14);
  CHECK(img.values(g.n / 2, g.n / 2) == Complex(0.5));
  CHECK(!img.is_valid(g.n / 2, g.n / 2));
  CHECK(img.valid_count() == g.masked_count() - 1);
}

TEST_CASE("linear M gives the exact difference quotient") {
  auto g = ZGrid::unmasked(12, 1.0);
  const int n = g.n;
  const Complex a(0.9, 0.1), b(0.05, -0.02), c(0.03, 0.04), d(1.1, -0.05), e(-0.02, 0.06);
  Eigen::ArrayXXcd m11(n, n), m12(n, n), m21(n, n), m22(n, n);
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) {
      Complex z = g.point(ix, iy);
      // A = M11 + M12 = a + b z + c z̄ and B = M22 + M21 = d + e z.
      m11(ix, iy) = a + b * z;
      m12(ix, iy) = c * std::conj(z);
      m22(ix, iy) = d;
      m21(ix, iy) = e * z;
    }
  auto q = q_from_m(m11, m12, m21, m22, g, g.mask);
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) {
      Complex z = g.point(ix, iy);
      CHECK(std::abs(q.q12(ix, iy) - c / (d + e * z)) < 1e-10);
      CHECK(std::abs(q.q21(ix, iy) - e / (a + b * z + c * std::conj(z))) < 1e-10);
    }
  CHECK_THROWS_AS(q_from_m(m11, m12, m21, m22, ZGrid::unmasked(10, 1.0), std::vector<std::uint8_t>(100, 1)), Error);
}

TEST_CASE("vanishing Q returns the constant estimate") {
  auto g = ZGrid::make(24, 1.05, geometry::BoundaryGeometry::circle(1.0), 1.0);
  QPotential q{Eigen::ArrayXXcd::Zero(24, 24), Eigen::ArrayXXcd::Zero(24, 24), g.mask};
  auto img = gamma_from_q(q, g, Complex(0.424, 0.05), ImagingMode::absolute);
  auto diff = gamma_from_q(q, g, Complex(0.424, 0.05), ImagingMode::difference);
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) {
      CHECK(img.values(ix, iy) == Complex(0.424, 0.05));
      CHECK(diff.values(ix, iy) == Complex(0));
    }
  CHECK(img.variant_disagreement == 0.0);
}

TEST_CASE("Gaussian bump round trip") {
  auto g = ZGrid::unmasked(64, 1.05);
  const double a = 0.4, s = 0.25;
  auto img = gamma_from_q(bump_q(g, a, s), g, 1.0, ImagingMode::absolute);
  double worst = 0;
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) {
      double want = std::exp(a * std::exp(-std::norm(g.point(ix, iy)) / (s * s)));
      worst = std::max(worst, std::abs(img.values(ix, iy) - want) / want);
    }
  MESSAGE("worst relative error " << worst << ", variant disagreement " << img.variant_disagreement);
  CHECK(worst < 0.02);
  CHECK(img.variant_disagreement < 0.05);
}

TEST_CASE("field kinds are checked") {
  auto g = ZGrid::unmasked(8, 1.0);
  auto f = scalar_field(g, 1.0);
  CHECK_THROWS_AS(q_from_m(f), Error);
  f.kind = solver::CGOKind::M_matrix;
  CHECK_THROWS_AS(sigma_from_mu(f, 1.0, ImagingMode::absolute), Error);
  QPotential q{Eigen::ArrayXXcd::Zero(7, 7), Eigen::ArrayXXcd::Zero(7, 7), {}};
  CHECK_THROWS_AS(gamma_from_q(q, g, 1.0, ImagingMode::absolute), Error);
}
