#pragma once

#include <vector>

#include <Eigen/Dense>

#include "dbar/fft.hpp"
#include "dbar/scattering.hpp"
#include "dbar/zgrid.hpp"

namespace dbar::solver {

struct SolverConfig {
  double tolerance = 1e-6;
  int max_iterations = 200;
  int threads = 0;  // 0 leaves the OpenMP default
};

enum class CGOKind { mu_scalar, M_matrix };

struct CGOSolution {
  Complex z;
  CGOKind kind = CGOKind::mu_scalar;
  Complex mu0{1.0, 0.0};
  Eigen::Matrix2cd m0 = Eigen::Matrix2cd::Identity();
  double residual = 0;
  int iterations = 0;
  bool converged = true;
};

// μ(k) − (1/πk) ∗ [ t(k)/(4πk̄) · e(z,−k) · conj μ(k) ] = 1, solved as a real
// system in (Re μ, Im μ).
class RealDbarSolver {
 public:
  RealDbarSolver(const scattering::ScatteringData& t, SolverConfig cfg = {});
  CGOSolution solve(Complex z) const;
  // Operator (I − K) of the doubled real system at pixel z.
  Eigen::VectorXd apply(Complex z, const Eigen::VectorXd& x) const;
  const scattering::KGrid& grid() const noexcept { return grid_; }

 private:
  Eigen::ArrayXXcd multiplier(Complex z) const;
  scattering::KGrid grid_;
  Eigen::ArrayXXcd t_;
  SolverConfig cfg_;
  CauchyConvolution conv_;
};

// Two decoupled 2×2 systems for (M11, M12) and (M22, M21); M(z, k̄) is the
// grid reflection iy ↦ n−1−iy.
class MatrixDbarSolver {
 public:
  MatrixDbarSolver(const scattering::ScatteringData& s, SolverConfig cfg = {});
  CGOSolution solve(Complex z) const;
  // Operator of the first (second) system at z acting on [A; B].
  Eigen::VectorXcd apply(Complex z, int system, const Eigen::VectorXcd& x) const;
  const scattering::KGrid& grid() const noexcept { return grid_; }

 private:
  scattering::KGrid grid_;
  Eigen::ArrayXXcd s12_, s21_;
  SolverConfig cfg_;
  CauchyConvolution conv_;
};

CGOSolution solve_real(const scattering::ScatteringData& t, Complex z, const SolverConfig& cfg = {});
CGOSolution solve_matrix(const scattering::ScatteringData& s, Complex z, const SolverConfig& cfg = {});

struct CGOField {
  recovery::ZGrid grid;
  CGOKind kind = CGOKind::mu_scalar;
  std::vector<CGOSolution> solutions;  // n², entries outside the mask keep defaults
  int failures = 0;

  const CGOSolution& at(int ix, int iy) const { return solutions[ix + grid.n * iy]; }
  // Masked pixels whose solve converged.
  int converged_count() const;
};

CGOField solve_image(const scattering::ScatteringData& data, const recovery::ZGrid& grid,
                     const SolverConfig& cfg = {});

}  // namespace dbar::solver
