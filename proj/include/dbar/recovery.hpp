#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "dbar/dbar_solver.hpp"
#include "dbar/zgrid.hpp"

namespace dbar::recovery {

struct AdmittivityImage {
  ZGrid grid;
  Eigen::ArrayXXcd values;  // S/m, indexed (ix, iy)
  ImagingMode mode = ImagingMode::absolute;
  Method method = Method::approach2;
  Complex gamma0{1.0, 0.0};
  double scale_radius = 1.0;  // r: physical = unit-frame coordinate · r
  // Masked pixels whose solves succeeded; failed pixels carry the baseline.
  std::vector<std::uint8_t> valid;
  // Largest relative disagreement between the two γ variants (matrix methods).
  double variant_disagreement = 0;

  bool is_valid(int ix, int iy) const noexcept { return valid[ix + grid.n * iy] != 0; }
  int valid_count() const;
};

AdmittivityImage sigma_from_mu(const solver::CGOField& field, Complex gamma0, ImagingMode mode);

struct QPotential {
  Eigen::ArrayXXcd q12, q21;
  std::vector<std::uint8_t> valid;
};

// Q12 = ∂̄z(M11+M12)/(M22+M21), Q21 = ∂z(M22+M21)/(M11+M12) from k = 0 values
// on the pixels flagged in `valid`; centred differences, one-sided at edges.
QPotential q_from_m(const Eigen::ArrayXXcd& m11, const Eigen::ArrayXXcd& m12, const Eigen::ArrayXXcd& m21,
                    const Eigen::ArrayXXcd& m22, const ZGrid& grid, const std::vector<std::uint8_t>& valid);
QPotential q_from_m(const solver::CGOField& field);

// γ = exp(−2 (1/πz̄) ∗ Q12) and exp(−2 (1/πz) ∗ Q21) combined by geometric
// mean, then rescaled by γ0 (difference mode subtracts the baseline).
AdmittivityImage gamma_from_q(const QPotential& q, const ZGrid& grid, Complex gamma0, ImagingMode mode);

}  // namespace dbar::recovery
