#pragma once

#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "dbar/dnmap.hpp"
#include "dbar/geometry.hpp"

namespace dbar::scattering {

// (2^N+1)² nodes centered on k = 0 with spacing `step`. Arrays on the grid are
// indexed (ix, iy) with k = (ix − c)·step + i(iy − c)·step, c = 2^(N−1).
struct KGrid {
  int N = 5;
  double step = 0.4706;
  double cutoff = 4.0;
  double threshold = 0.4;

  int size() const noexcept { return (1 << N) + 1; }
  int center() const noexcept { return 1 << (N - 1); }
  Complex point(int ix, int iy) const noexcept {
    return {(ix - center()) * step, (iy - center()) * step};
  }
  void validate() const;
  bool operator==(const KGrid&) const = default;
};

enum class ScatteringKind { real_t, matrix_S };

struct ScatteringData {
  ScatteringKind kind = ScatteringKind::real_t;
  KGrid grid;
  ImagingMode mode = ImagingMode::absolute;
  Eigen::ArrayXXcd t;    // real_t
  Eigen::ArrayXXcd s12;  // matrix_S
  Eigen::ArrayXXcd s21;  // matrix_S
  double cutoff = 4.0;
  double threshold = std::numeric_limits<double>::infinity();
};

// Boundary quadrature in the unit working frame: electrode centres z_ℓ/r,
// outward normals, uniform weight (P/r)/L and the orthonormal patterns.
struct BoundaryQuadrature {
  std::vector<Complex> z;
  std::vector<Complex> normal;
  double weight = 0;
  double r = 1;
  Eigen::MatrixXd phi;

  int electrodes() const noexcept { return static_cast<int>(z.size()); }
};

BoundaryQuadrature make_quadrature(const geometry::ElectrodeLayout& working, const Eigen::MatrixXd& phi,
                                   double r);

enum class Expansion { plain, u1, u2 };

// Pattern coefficients c_j = Σ_ℓ f(z_ℓ) φ^j_ℓ of f = e^{ikz}, e^{ikz}/(ik) or
// e^{−ikz̄}/(−ik).
Eigen::VectorXcd expansion_coefficients(Complex k, const BoundaryQuadrature& q, Expansion which);
// Electrode samples Σ_j c_j φ^j_ℓ.
Eigen::VectorXcd expand_exponential(Complex k, const BoundaryQuadrature& q, Expansion which);

ScatteringData texp(const dnmap::DNMap& sigma, const dnmap::DNMap& one, const KGrid& grid,
                    const BoundaryQuadrature& q);
ScatteringData tdiff(const dnmap::DNMap& sigma, const dnmap::DNMap& ref, const KGrid& grid,
                     const BoundaryQuadrature& q);
ScatteringData sexp(const dnmap::DNMap& gamma, const KGrid& grid, const BoundaryQuadrature& q);
ScatteringData sdiff(const dnmap::DNMap& gamma, const dnmap::DNMap& ref, const KGrid& grid,
                     const BoundaryQuadrature& q);
// Traces-based Born data. With `mode == difference` the second map is the
// reference frame's DN map instead of the homogeneous one.
ScatteringData psi_exp_scattering(const dnmap::DNMap& gamma, const dnmap::DNMap& other,
                                  const KGrid& grid, const BoundaryQuadrature& q,
                                  ImagingMode mode = ImagingMode::absolute);

// Zero outside |k| <= R and zero entries with |Re| or |Im| above the threshold.
ScatteringData truncate(ScatteringData data, double R, double threshold);

}  // namespace dbar::scattering
