#include <doctest.h>

#include <random>

#include "dbar/dbar_solver.hpp"

using namespace dbar;
using namespace dbar::solver;
using scattering::KGrid;
using scattering::ScatteringData;
using scattering::ScatteringKind;

namespace {

Complex e_zk(Complex z, Complex k) { return std::exp(I * (k * z + std::conj(k) * std::conj(z))); }

ScatteringData real_data(const KGrid& g, const Eigen::ArrayXXcd& t) {
  ScatteringData d;
  d.kind = ScatteringKind::real_t;
  d.grid = g;
  d.t = t;
  return d;
}

ScatteringData matrix_data(const KGrid& g, const Eigen::ArrayXXcd& s12, const Eigen::ArrayXXcd& s21) {
  ScatteringData d;
  d.kind = ScatteringKind::matrix_S;
  d.grid = g;
  d.s12 = s12;
  d.s21 = s21;
  return d;
}

// Random values inside the cutoff disc, zero outside.
Eigen::ArrayXXcd random_disc(const KGrid& g, double scale, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, scale);
  const int n = g.size();
  Eigen::ArrayXXcd a = Eigen::ArrayXXcd::Zero(n, n);
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix)
      if (std::abs(g.point(ix, iy)) <= g.cutoff && !(ix == g.center() && iy == g.center()))
        a(ix, iy) = Complex(n01(rng), n01(rng));
  return a;
}

// Smooth radial t sampled on the grid.
Eigen::ArrayXXcd gaussian_t(const KGrid& g, double amplitude) {
  const int n = g.size();
  Eigen::ArrayXXcd a = Eigen::ArrayXXcd::Zero(n, n);
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) {
      Complex k = g.point(ix, iy);
      if (std::abs(k) <= g.cutoff && k != Complex(0)) a(ix, iy) = amplitude * std::norm(k) * std::exp(-std::norm(k));
    }
  return a;
}

}  // namespace

TEST_CASE("vanishing scattering data give the trivial solutions") {
  KGrid g;
  const int n = g.size();
  auto mu = solve_real(real_data(g, Eigen::ArrayXXcd::Zero(n, n)), Complex(0.3, -0.2));
  CHECK(std::abs(mu.mu0 - 1.0) < 1e-13);
  CHECK(mu.converged);
  auto M = solve_matrix(matrix_data(g, Eigen::ArrayXXcd::Zero(n, n), Eigen::ArrayXXcd::Zero(n, n)), 0.5);
  CHECK((M.m0 - Eigen::Matrix2cd::Identity()).norm() < 1e-13);
  CHECK(M.converged);
}

TEST_CASE("tiny data perturb mu only slightly") {
  KGrid g;
  auto mu = solve_real(real_data(g, random_disc(g, 1e-8, 4)), Complex(0.2, 0.1));
  CHECK(std::abs(mu.mu0 - 1.0) < 1e-6);
}

TEST_CASE("decoupled second row when S12 vanishes") {
  KGrid g;
  const int n = g.size();
  auto s = matrix_data(g, Eigen::ArrayXXcd::Zero(n, n), random_disc(g, 0.2, 9));
  auto M = solve_matrix(s, Complex(-0.1, 0.4));
  CHECK(std::abs(M.m0(1, 1) - 1.0) < 1e-12);
  CHECK(std::abs(M.m0(0, 1)) < 1e-12);
}

TEST_CASE("single nonzero entry has a closed form") {
  // With t supported at k_j alone, mu(k_j) = 1 since K(0) = 0, and then
  // mu(k) = 1 + h² K(k − k_j) t_j e(z, −k_j) / (4π conj k_j).
  KGrid g{4, 0.5, 4.0, 0.4};
  const int n = g.size(), jx = g.center() + 2, jy = g.center() - 1;
  Eigen::ArrayXXcd t = Eigen::ArrayXXcd::Zero(n, n);
  t(jx, jy) = Complex(0.7, -0.2);
  const Complex kj = g.point(jx, jy), z(0.3, 0.4);
  SolverConfig cfg;
  cfg.tolerance = 1e-13;
  auto mu = solve_real(real_data(g, t), z, cfg);
  const double h = g.step;
  Complex want = 1.0 + h * h / (pi * (Complex(0) - kj)) * t(jx, jy) * e_zk(z, -kj) / (4 * pi * std::conj(kj));
  CHECK(std::abs(mu.mu0 - want) < 1e-12);
}

TEST_CASE("GMRES agrees with a dense solve of the same operator") {
  KGrid g{3, 1.1, 4.0, 0.4};
  const int n = g.size(), nn = n * n, c = g.center() + n * g.center();
  SolverConfig cfg;
  cfg.tolerance = 1e-13;
  cfg.max_iterations = 400;
  const Complex z(0.25, -0.35);

  RealDbarSolver real(real_data(g, random_disc(g, 0.3, 1)), cfg);
  Eigen::MatrixXd A(2 * nn, 2 * nn);
  for (int j = 0; j < 2 * nn; ++j) A.col(j) = real.apply(z, Eigen::VectorXd::Unit(2 * nn, j));
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * nn);
  rhs.head(nn).setOnes();
  Eigen::VectorXd x = A.partialPivLu().solve(rhs);
  auto sol = real.solve(z);
  CHECK(std::abs(sol.mu0 - Complex(x[c], x[nn + c])) < 1e-12);
  CHECK(sol.residual < 1e-12);

  MatrixDbarSolver mat(matrix_data(g, random_disc(g, 0.3, 2), random_disc(g, 0.3, 3)), cfg);
  auto msol = mat.solve(z);
  for (int system = 0; system < 2; ++system) {
    Eigen::MatrixXcd B(2 * nn, 2 * nn);
    for (int j = 0; j < 2 * nn; ++j) B.col(j) = mat.apply(z, system, Eigen::VectorXcd::Unit(2 * nn, j));
    Eigen::VectorXcd r = Eigen::VectorXcd::Zero(2 * nn);
    r.head(nn).setOnes();
    Eigen::VectorXcd y = B.partialPivLu().solve(r);
    Complex diag = system == 0 ? msol.m0(0, 0) : msol.m0(1, 1);
    Complex off = system == 0 ? msol.m0(0, 1) : msol.m0(1, 0);
    CHECK(std::abs(diag - y[c]) < 1e-12);
    CHECK(std::abs(off - y[nn + c]) < 1e-12);
  }
}

TEST_CASE("threaded and serial image solves are identical") {
  KGrid g;
  auto data = real_data(g, gaussian_t(g, 0.4));
  auto zg = recovery::ZGrid::make(12, 1.05, geometry::BoundaryGeometry::circle(1.0), 1.0);
  SolverConfig serial, threaded;
  serial.threads = 1;
  threaded.threads = 4;
  auto a = solve_image(data, zg, serial), b = solve_image(data, zg, threaded);
  REQUIRE(a.solutions.size() == b.solutions.size());
  for (std::size_t i = 0; i < a.solutions.size(); ++i) CHECK(a.solutions[i].mu0 == b.solutions[i].mu0);
  CHECK(a.converged_count() == zg.masked_count());
}

TEST_CASE("refining the k-grid changes mu little") {
  KGrid coarse{5, 0.3, 4.0, 0.4}, fine{6, 0.15, 4.0, 0.4};
  SolverConfig cfg;
  cfg.tolerance = 1e-10;
  for (Complex z : {Complex(0), Complex(0.4, -0.3)}) {
    auto a = solve_real(real_data(coarse, gaussian_t(coarse, 0.5)), z, cfg);
    auto b = solve_real(real_data(fine, gaussian_t(fine, 0.5)), z, cfg);
    MESSAGE("z = " << z << " coarse " << a.mu0 << " fine " << b.mu0);
    CHECK(std::abs(a.mu0 - b.mu0) < 1e-2 * std::abs(b.mu0));
    // A real, even t is conjugate symmetric, so mu(z, 0) is real.
    CHECK(std::abs(b.mu0.imag()) < 1e-3 * std::abs(b.mu0));
  }
}

TEST_CASE("mismatched data are rejected") {
  KGrid g;
  const int n = g.size();
  auto t = real_data(g, Eigen::ArrayXXcd::Zero(n, n));
  CHECK_THROWS_AS(MatrixDbarSolver{t}, Error);
  auto s = matrix_data(g, Eigen::ArrayXXcd::Zero(n, n), Eigen::ArrayXXcd::Zero(n, n));
  CHECK_THROWS_AS(RealDbarSolver{s}, Error);
  t.t = Eigen::ArrayXXcd::Zero(n - 1, n - 1);
  try {
    RealDbarSolver bad(t);
    FAIL("expected GridMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::GridMismatch);
  }
}
