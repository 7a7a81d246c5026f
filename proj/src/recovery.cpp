#include "dbar/recovery.hpp"

#include <cmath>

namespace dbar::recovery {

int ZGrid::masked_count() const {
  int c = 0;
  for (auto m : mask) c += m != 0;
  return c;
}

ZGrid ZGrid::make(int n, double extent, const geometry::BoundaryGeometry& boundary, double r) {
  ZGrid g = unmasked(n, extent);
  if (!(r > 0)) throw Error(ErrorCode::Validation, "scaling radius must be positive");
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) g.mask[ix + n * iy] = boundary.contains(g.point(ix, iy) * r) ? 1 : 0;
  return g;
}

ZGrid ZGrid::unmasked(int n, double extent) {
  if (n < 3) throw Error(ErrorCode::Validation, "z-grid needs at least 3 nodes per side");
  if (!(extent > 0)) throw Error(ErrorCode::Validation, "z-grid extent must be positive");
  ZGrid g;
  g.n = n;
  g.extent = extent;
  g.mask.assign(static_cast<std::size_t>(n) * n, 1);
  return g;
}

int AdmittivityImage::valid_count() const {
  int c = 0;
  for (auto v : valid) c += v != 0;
  return c;
}

AdmittivityImage sigma_from_mu(const solver::CGOField& field, Complex gamma0, ImagingMode mode) {
  if (field.kind != solver::CGOKind::mu_scalar)
    throw Error(ErrorCode::GridMismatch, "sigma_from_mu needs a scalar CGO field");
  const ZGrid& g = field.grid;
  AdmittivityImage img;
  img.grid = g;
  img.mode = mode;
  img.method = Method::texp;
  img.gamma0 = gamma0;
  const Complex baseline = mode == ImagingMode::absolute ? gamma0 : Complex(0);
  img.values = Eigen::ArrayXXcd::Constant(g.n, g.n, baseline);
  img.valid.assign(g.mask.size(), 0);
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) {
      if (!g.inside(ix, iy)) continue;
      const auto& s = field.at(ix, iy);
      if (!s.converged) continue;
      Complex mu2 = s.mu0 * s.mu0;
      img.values(ix, iy) = mode == ImagingMode::absolute ? mu2 * gamma0 : (mu2 - 1.0) * gamma0;
      img.valid[ix + g.n * iy] = 1;
    }
  return img;
}

QPotential q_from_m(const Eigen::ArrayXXcd& m11, const Eigen::ArrayXXcd& m12, const Eigen::ArrayXXcd& m21,
                    const Eigen::ArrayXXcd& m22, const ZGrid& grid, const std::vector<std::uint8_t>& valid) {
  const int n = grid.n;
  for (const auto* a : {&m11, &m12, &m21, &m22})
    if (a->rows() != n || a->cols() != n) throw Error(ErrorCode::GridMismatch, "M fields must be n x n");
  if (static_cast<int>(valid.size()) != n * n) throw Error(ErrorCode::GridMismatch, "mask size mismatch");
  const double h = grid.step();
  const Eigen::ArrayXXcd A = m11 + m12, B = m22 + m21;
  auto ok = [&](int ix, int iy) { return ix >= 0 && iy >= 0 && ix < n && iy < n && valid[ix + n * iy]; };
  auto deriv = [&](const Eigen::ArrayXXcd& f, int ix, int iy, int dx, int dy) -> Complex {
    bool fwd = ok(ix + dx, iy + dy), bwd = ok(ix - dx, iy - dy);
    if (fwd && bwd) return (f(ix + dx, iy + dy) - f(ix - dx, iy - dy)) / (2 * h);
    if (fwd) return (f(ix + dx, iy + dy) - f(ix, iy)) / h;
    if (bwd) return (f(ix, iy) - f(ix - dx, iy - dy)) / h;
    return 0;
  };
  QPotential q;
  q.q12 = Eigen::ArrayXXcd::Zero(n, n);
  q.q21 = Eigen::ArrayXXcd::Zero(n, n);
  q.valid = valid;
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) {
      if (!ok(ix, iy)) continue;
      if (std::abs(A(ix, iy)) < 1e-8 || std::abs(B(ix, iy)) < 1e-8) {
        q.valid[ix + n * iy] = 0;  // denominator underflow: pixel dropped
        continue;
      }
      Complex ax = deriv(A, ix, iy, 1, 0), ay = deriv(A, ix, iy, 0, 1);
      Complex bx = deriv(B, ix, iy, 1, 0), by = deriv(B, ix, iy, 0, 1);
      q.q12(ix, iy) = 0.5 * (ax + I * ay) / B(ix, iy);
      q.q21(ix, iy) = 0.5 * (bx - I * by) / A(ix, iy);
    }
  return q;
}

QPotential q_from_m(const solver::CGOField& field) {
  if (field.kind != solver::CGOKind::M_matrix)
    throw Error(ErrorCode::GridMismatch, "q_from_m needs a matrix CGO field");
  const int n = field.grid.n;
  Eigen::ArrayXXcd m11(n, n), m12(n, n), m21(n, n), m22(n, n);
  std::vector<std::uint8_t> valid(static_cast<std::size_t>(n) * n, 0);
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) {
      const auto& s = field.at(ix, iy);
      m11(ix, iy) = s.m0(0, 0);
      m12(ix, iy) = s.m0(0, 1);
      m21(ix, iy) = s.m0(1, 0);
      m22(ix, iy) = s.m0(1, 1);
      valid[ix + n * iy] = field.grid.inside(ix, iy) && s.converged;
    }
  return q_from_m(m11, m12, m21, m22, field.grid, valid);
}

AdmittivityImage gamma_from_q(const QPotential& q, const ZGrid& grid, Complex gamma0, ImagingMode mode) {
  const int n = grid.n;
  if (q.q12.rows() != n || q.q12.cols() != n || q.q21.rows() != n || q.q21.cols() != n)
    throw Error(ErrorCode::GridMismatch, "Q grids must match the z-grid");
  const double h = grid.step();
  solver::CauchyConvolution zbar(n, h, solver::Kernel::inv_pi_zbar, true);
  solver::CauchyConvolution zc(n, h, solver::Kernel::inv_pi_z, true);
  const Eigen::ArrayXXcd e1 = -2.0 * zbar.apply(q.q12);
  const Eigen::ArrayXXcd e2 = -2.0 * zc.apply(q.q21);

  AdmittivityImage img;
  img.grid = grid;
  img.mode = mode;
  img.method = Method::approach2;
  img.gamma0 = gamma0;
  const Complex baseline = mode == ImagingMode::absolute ? gamma0 : Complex(0);
  img.values = Eigen::ArrayXXcd::Constant(n, n, baseline);
  img.valid = q.valid.empty() ? grid.mask : q.valid;
  double worst = 0;
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) {
      const int i = ix + n * iy;
      if (!grid.mask[i] || !img.valid[i]) {
        img.valid[i] = 0;
        continue;
      }
      Complex g1 = std::exp(e1(ix, iy)), g2 = std::exp(e2(ix, iy));
      Complex g = std::exp(0.5 * (e1(ix, iy) + e2(ix, iy)));
      worst = std::max(worst, std::abs(g1 - g2) / std::abs(g));
      img.values(ix, iy) = mode == ImagingMode::absolute ? g * gamma0 : (g - 1.0) * gamma0;
    }
  img.variant_disagreement = worst;
  return img;
}

}  // namespace dbar::recovery
