#pragma once

#include <memory>

#include <Eigen/Dense>

#include "dbar/types.hpp"

namespace dbar::solver {

enum class Kernel { inv_pi_k, inv_pi_z, inv_pi_zbar };

// Discrete convolution with a Cauchy-type kernel on an n×n uniform grid:
//   out(x) = h² Σ_y K(x − y) f(y),   K(d) = 1/(π d) or 1/(π d̄),   K(0) = 0.
// Circular (periodic wrap on the n×n grid) unless `linear` is set, in which
// case the input is zero-padded to 2n×2n first.
class CauchyConvolution {
 public:
  CauchyConvolution(int n, double h, Kernel kernel, bool linear = false);
  ~CauchyConvolution();
  CauchyConvolution(CauchyConvolution&&) noexcept;
  CauchyConvolution& operator=(CauchyConvolution&&) noexcept;

  int size() const noexcept;
  double step() const noexcept;

  // `in` and `out` hold n² values in (ix, iy) column-major order. Thread safe.
  void apply(const Complex* in, Complex* out) const;
  Eigen::ArrayXXcd apply(const Eigen::ArrayXXcd& f) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dbar::solver
