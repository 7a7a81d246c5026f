#include "dbar/dbar_solver.hpp"

#include <cmath>

#include "dbar/gmres.hpp"

namespace dbar::solver {

namespace {

// e(z, k) = exp(i(kz + k̄z̄))
Complex e_zk(Complex z, Complex k) { return std::exp(I * (k * z + std::conj(k) * std::conj(z))); }

}  // namespace

// ---------------------------------------------------------------- real method

RealDbarSolver::RealDbarSolver(const scattering::ScatteringData& t, SolverConfig cfg)
    : grid_(t.grid), t_(t.t), cfg_(cfg), conv_(t.grid.size(), t.grid.step, Kernel::inv_pi_k) {
  if (t.kind != scattering::ScatteringKind::real_t)
    throw Error(ErrorCode::GridMismatch, "real solver needs scalar scattering data");
  if (t_.rows() != grid_.size() || t_.cols() != grid_.size())
    throw Error(ErrorCode::GridMismatch, "scattering array does not match its k-grid");
}

Eigen::ArrayXXcd RealDbarSolver::multiplier(Complex z) const {
  const int n = grid_.size();
  Eigen::ArrayXXcd m = Eigen::ArrayXXcd::Zero(n, n);
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) {
      Complex tv = t_(ix, iy);
      if (tv == Complex(0)) continue;
      Complex k = grid_.point(ix, iy);
      m(ix, iy) = tv / (4 * pi * std::conj(k)) * e_zk(z, -k);
    }
  return m;
}

namespace {

void real_apply(const CauchyConvolution& conv, const Eigen::ArrayXXcd& m, const Eigen::VectorXd& x,
                Eigen::VectorXd& out) {
  const Eigen::Index nn = m.size();
  Eigen::ArrayXXcd f(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < nn; ++i) f(i) = m(i) * Complex(x[i], -x[nn + i]);
  Eigen::ArrayXXcd c(m.rows(), m.cols());
  conv.apply(f.data(), c.data());
  out.resize(2 * nn);
  for (Eigen::Index i = 0; i < nn; ++i) {
    out[i] = x[i] - c(i).real();
    out[nn + i] = x[nn + i] - c(i).imag();
  }
}

}  // namespace

Eigen::VectorXd RealDbarSolver::apply(Complex z, const Eigen::VectorXd& x) const {
  Eigen::VectorXd out;
  real_apply(conv_, multiplier(z), x, out);
  return out;
}

CGOSolution RealDbarSolver::solve(Complex z) const {
  const int n = grid_.size();
  const Eigen::Index nn = Eigen::Index(n) * n;
  const Eigen::ArrayXXcd m = multiplier(z);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(2 * nn);
  b.head(nn).setOnes();
  auto op = [&](const Eigen::VectorXd& in, Eigen::VectorXd& out) { real_apply(conv_, m, in, out); };
  auto res = gmres<double>(op, b, cfg_.tolerance, cfg_.max_iterations);
  CGOSolution sol;
  sol.z = z;
  sol.kind = CGOKind::mu_scalar;
  const Eigen::Index c = grid_.center() + Eigen::Index(n) * grid_.center();
  sol.mu0 = Complex(res.x[c], res.x[nn + c]);
  sol.residual = res.residual;
  sol.iterations = res.iterations;
  sol.converged = res.converged;
  return sol;
}

// ---------------------------------------------------------------- matrix method

MatrixDbarSolver::MatrixDbarSolver(const scattering::ScatteringData& s, SolverConfig cfg)
    : grid_(s.grid), s12_(s.s12), s21_(s.s21), cfg_(cfg), conv_(s.grid.size(), s.grid.step, Kernel::inv_pi_k) {
  if (s.kind != scattering::ScatteringKind::matrix_S)
    throw Error(ErrorCode::GridMismatch, "matrix solver needs matrix scattering data");
  const int n = grid_.size();
  if (s12_.rows() != n || s12_.cols() != n || s21_.rows() != n || s21_.cols() != n)
    throw Error(ErrorCode::GridMismatch, "scattering arrays do not match their k-grid");
}

namespace {

struct MatrixMultipliers {
  Eigen::ArrayXXcd first, second;  // multiply the reflected partner of A and of B
};

MatrixMultipliers multipliers(const scattering::KGrid& grid, const Eigen::ArrayXXcd& s12,
                              const Eigen::ArrayXXcd& s21, Complex z, int system) {
  const int n = grid.size();
  Eigen::ArrayXXcd m21(n, n), m12(n, n);
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) {
      Complex k = grid.point(ix, iy);
      m21(ix, iy) = s21(ix, iy) == Complex(0) ? Complex(0) : e_zk(z, -k) * s21(ix, iy);
      m12(ix, iy) = s12(ix, iy) == Complex(0) ? Complex(0) : e_zk(z, std::conj(k)) * s12(ix, iy);
    }
  // System 1: A = M11 pairs with e(z,−k)S21, B = M12 with e(z,k̄)S12.
  // System 2: A = M22 pairs with e(z,k̄)S12, B = M21 with e(z,−k)S21.
  if (system == 0) return {m21, m12};
  return {m12, m21};
}

void matrix_apply(const CauchyConvolution& conv, const MatrixMultipliers& mm, const Eigen::VectorXcd& x,
                  Eigen::VectorXcd& out) {
  const int n = static_cast<int>(mm.first.rows());
  const Eigen::Index nn = Eigen::Index(n) * n;
  Eigen::ArrayXXcd fa(n, n), fb(n, n), ca(n, n), cb(n, n);
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) {
      const Eigen::Index r = ix + Eigen::Index(n) * (n - 1 - iy);
      fa(ix, iy) = x[nn + r] * mm.first(ix, iy);
      fb(ix, iy) = x[r] * mm.second(ix, iy);
    }
  conv.apply(fa.data(), ca.data());
  conv.apply(fb.data(), cb.data());
  out.resize(2 * nn);
  for (Eigen::Index i = 0; i < nn; ++i) {
    out[i] = x[i] - ca(i);
    out[nn + i] = x[nn + i] - cb(i);
  }
}

}  // namespace

Eigen::VectorXcd MatrixDbarSolver::apply(Complex z, int system, const Eigen::VectorXcd& x) const {
  Eigen::VectorXcd out;
  matrix_apply(conv_, multipliers(grid_, s12_, s21_, z, system), x, out);
  return out;
}

CGOSolution MatrixDbarSolver::solve(Complex z) const {
  const int n = grid_.size();
  const Eigen::Index nn = Eigen::Index(n) * n;
  const Eigen::Index c = grid_.center() + Eigen::Index(n) * grid_.center();
  Eigen::VectorXcd b = Eigen::VectorXcd::Zero(2 * nn);
  b.head(nn).setOnes();
  CGOSolution sol;
  sol.z = z;
  sol.kind = CGOKind::M_matrix;
  sol.converged = true;
  for (int system = 0; system < 2; ++system) {
    const auto mm = multipliers(grid_, s12_, s21_, z, system);
    auto op = [&](const Eigen::VectorXcd& in, Eigen::VectorXcd& out) { matrix_apply(conv_, mm, in, out); };
    auto res = gmres<Complex>(op, b, cfg_.tolerance, cfg_.max_iterations);
    if (system == 0) {
      sol.m0(0, 0) = res.x[c];
      sol.m0(0, 1) = res.x[nn + c];
    } else {
      sol.m0(1, 1) = res.x[c];
      sol.m0(1, 0) = res.x[nn + c];
    }
    sol.residual = std::max(sol.residual, res.residual);
    sol.iterations += res.iterations;
    sol.converged = sol.converged && res.converged;
  }
  return sol;
}

CGOSolution solve_real(const scattering::ScatteringData& t, Complex z, const SolverConfig& cfg) {
  return RealDbarSolver(t, cfg).solve(z);
}

CGOSolution solve_matrix(const scattering::ScatteringData& s, Complex z, const SolverConfig& cfg) {
  return MatrixDbarSolver(s, cfg).solve(z);
}

// ---------------------------------------------------------------- image

int CGOField::converged_count() const {
  int count = 0;
  for (int iy = 0; iy < grid.n; ++iy)
    for (int ix = 0; ix < grid.n; ++ix)
      if (grid.inside(ix, iy) && at(ix, iy).converged) ++count;
  return count;
}

namespace {

template <typename Solver>
void run_pixels(const Solver& solver, CGOField& field, const SolverConfig& cfg) {
  const int n = field.grid.n;
  std::vector<int> pixels;
  for (int i = 0; i < n * n; ++i)
    if (field.grid.mask[i]) pixels.push_back(i);
  int failures = 0;
  const int threads = cfg.threads > 0 ? cfg.threads : 0;
  auto body = [&](int p) {
    const int i = pixels[p];
    const Complex z = field.grid.point(i % n, i / n);
    CGOSolution sol;
    try {
      sol = solver.solve(z);
    } catch (const Error&) {
      sol.z = z;
      sol.converged = false;
    }
    field.solutions[i] = sol;
  };
  const int np = static_cast<int>(pixels.size());
  if (threads > 0) {
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (int p = 0; p < np; ++p) body(p);
  } else {
#pragma omp parallel for schedule(dynamic)
    for (int p = 0; p < np; ++p) body(p);
  }
  for (int i : pixels)
    if (!field.solutions[i].converged) ++failures;
  field.failures = failures;
}

}  // namespace

CGOField solve_image(const scattering::ScatteringData& data, const recovery::ZGrid& grid,
                     const SolverConfig& cfg) {
  if (grid.n < 2 || static_cast<int>(grid.mask.size()) != grid.n * grid.n)
    throw Error(ErrorCode::GridMismatch, "z-grid mask size does not match the grid");
  CGOField field;
  field.grid = grid;
  field.kind = data.kind == scattering::ScatteringKind::real_t ? CGOKind::mu_scalar : CGOKind::M_matrix;
  field.solutions.resize(static_cast<std::size_t>(grid.n) * grid.n);
  for (int iy = 0; iy < grid.n; ++iy)
    for (int ix = 0; ix < grid.n; ++ix) {
      auto& s = field.solutions[ix + grid.n * iy];
      s.z = grid.point(ix, iy);
      s.kind = field.kind;
    }
  if (field.kind == CGOKind::mu_scalar)
    run_pixels(RealDbarSolver(data, cfg), field, cfg);
  else
    run_pixels(MatrixDbarSolver(data, cfg), field, cfg);
  return field;
}

}  // namespace dbar::solver
