#include "dbar/scattering.hpp"

#include <cmath>

namespace dbar::scattering {

void KGrid::validate() const {
  if (N < 2 || N > 10) throw Error(ErrorCode::Validation, "k-grid exponent N must lie in [2, 10]");
  if (!(step > 0)) throw Error(ErrorCode::Validation, "k-grid step must be positive");
  if (!(cutoff > 0)) throw Error(ErrorCode::Validation, "cutoff radius must be positive");
  if (!(threshold > 0)) throw Error(ErrorCode::Validation, "truncation threshold must be positive");
  if ((size() - 1) * step / 2 < cutoff)
    throw Error(ErrorCode::Validation, "k-grid does not cover the cutoff disc");
}

BoundaryQuadrature make_quadrature(const geometry::ElectrodeLayout& working, const Eigen::MatrixXd& phi,
                                   double r) {
  const int L = working.count();
  if (phi.rows() != L) throw Error(ErrorCode::Validation, "pattern rows must equal the electrode count");
  if (!(r > 0)) throw Error(ErrorCode::Validation, "scaling radius must be positive");
  BoundaryQuadrature q;
  q.r = r;
  q.phi = phi;
  q.weight = working.boundary.perimeter() / r / L;
  for (int l = 0; l < L; ++l) {
    q.z.push_back(working.centers[l] / r);
    q.normal.push_back(geometry::normal_tangent(working.boundary, working.angles[l]).normal);
  }
  return q;
}

Eigen::VectorXcd expansion_coefficients(Complex k, const BoundaryQuadrature& q, Expansion which) {
  if (which != Expansion::plain && k == Complex(0))
    throw Error(ErrorCode::ZeroK, "u1/u2 expansions are undefined at k = 0");
  const int L = q.electrodes();
  Eigen::VectorXcd f(L);
  for (int l = 0; l < L; ++l) {
    Complex z = q.z[l];
    switch (which) {
      case Expansion::plain: f[l] = std::exp(I * k * z); break;
      case Expansion::u1: f[l] = std::exp(I * k * z) / (I * k); break;
      case Expansion::u2: f[l] = std::exp(-I * k * std::conj(z)) / (-I * k); break;
    }
  }
  return q.phi.transpose().cast<Complex>() * f;
}

Eigen::VectorXcd expand_exponential(Complex k, const BoundaryQuadrature& q, Expansion which) {
  return q.phi.cast<Complex>() * expansion_coefficients(k, q, which);
}

namespace {

void require_scaled(const dnmap::DNMap& a, const BoundaryQuadrature& q) {
  if (a.state != dnmap::ScalingState::scaled)
    throw Error(ErrorCode::ScalingMismatch, "DN map must be scaled before computing scattering data");
  if (std::abs(a.r - q.r) > 1e-12 * q.r)
    throw Error(ErrorCode::ScalingMismatch, "DN map and boundary quadrature use different radii");
  if (a.matrix.rows() != q.phi.cols() || a.matrix.cols() != q.phi.cols())
    throw Error(ErrorCode::ScalingMismatch, "DN map size does not match the pattern count");
}

void require_pair(const dnmap::DNMap& a, const dnmap::DNMap& b, const BoundaryQuadrature& q,
                  bool same_gamma0) {
  require_scaled(a, q);
  require_scaled(b, q);
  if (a.r != b.r) throw Error(ErrorCode::ScalingMismatch, "DN maps scaled by different radii");
  if (same_gamma0 && a.gamma0 != b.gamma0)
    throw Error(ErrorCode::ScalingMismatch, "difference data must share the target's gamma0 scaling");
}

ScatteringData empty_like(ScatteringKind kind, const KGrid& grid, ImagingMode mode) {
  grid.validate();
  ScatteringData d;
  d.kind = kind;
  d.grid = grid;
  d.mode = mode;
  d.cutoff = grid.cutoff;
  const int n = grid.size();
  if (kind == ScatteringKind::real_t) {
    d.t = Eigen::ArrayXXcd::Zero(n, n);
  } else {
    d.s12 = Eigen::ArrayXXcd::Zero(n, n);
    d.s21 = Eigen::ArrayXXcd::Zero(n, n);
  }
  return d;
}

ScatteringData t_from(const Eigen::MatrixXcd& D, const KGrid& grid, const BoundaryQuadrature& q,
                      ImagingMode mode) {
  ScatteringData d = empty_like(ScatteringKind::real_t, grid, mode);
  const Eigen::MatrixXcd PD = q.phi.cast<Complex>() * D;
  const int n = grid.size(), L = q.electrodes();
#pragma omp parallel for schedule(static)
  for (int idx = 0; idx < n * n; ++idx) {
    int ix = idx % n, iy = idx / n;
    Complex k = grid.point(ix, iy);
    if (k == Complex(0) || std::abs(k) > grid.cutoff) continue;
    Eigen::VectorXcd y = PD * expansion_coefficients(k, q, Expansion::plain);
    Complex acc = 0;
    for (int l = 0; l < L; ++l) acc += std::exp(I * std::conj(k) * std::conj(q.z[l])) * y[l];
    d.t(ix, iy) = q.weight * acc;
  }
  return d;
}

void fill_origin(Eigen::ArrayXXcd& s, int c) {
  s(c, c) = 0.25 * (s(c - 1, c) + s(c + 1, c) + s(c, c - 1) + s(c, c + 1));
}

ScatteringData s_from(const Eigen::MatrixXcd& D, bool tangential, const KGrid& grid,
                      const BoundaryQuadrature& q, ImagingMode mode) {
  ScatteringData d = empty_like(ScatteringKind::matrix_S, grid, mode);
  const Eigen::MatrixXcd PD = q.phi.cast<Complex>() * D;
  const int n = grid.size(), L = q.electrodes();
  const double w = q.weight;
#pragma omp parallel for schedule(static)
  for (int idx = 0; idx < n * n; ++idx) {
    int ix = idx % n, iy = idx / n;
    Complex k = grid.point(ix, iy);
    if (k == Complex(0) || std::abs(k) > grid.cutoff) continue;
    Eigen::VectorXcd lb = PD * expansion_coefficients(k, q, Expansion::u2);
    Eigen::VectorXcd la = PD * expansion_coefficients(k, q, Expansion::u1);
    Complex a12 = 0, a21 = 0;
    for (int l = 0; l < L; ++l) {
      Complex z = q.z[l], nu = q.normal[l];
      Complex v12 = lb[l], v21 = la[l];
      if (tangential) {
        Complex d12 = -I * std::conj(nu) * std::exp(-I * k * std::conj(z));
        Complex d21 = I * nu * std::exp(I * k * z);
        v12 -= I * d12;
        v21 += I * d21;
      }
      a12 += std::exp(-I * std::conj(k) * z) * v12;
      a21 += std::exp(I * std::conj(k) * std::conj(z)) * v21;
    }
    d.s12(ix, iy) = I / (4 * pi) * w * a12;
    d.s21(ix, iy) = -I / (4 * pi) * w * a21;
  }
  fill_origin(d.s12, grid.center());
  fill_origin(d.s21, grid.center());
  return d;
}

}  // namespace

ScatteringData texp(const dnmap::DNMap& sigma, const dnmap::DNMap& one, const KGrid& grid,
                    const BoundaryQuadrature& q) {
  require_pair(sigma, one, q, false);
  return t_from(sigma.matrix - one.matrix, grid, q, ImagingMode::absolute);
}

ScatteringData tdiff(const dnmap::DNMap& sigma, const dnmap::DNMap& ref, const KGrid& grid,
                     const BoundaryQuadrature& q) {
  require_pair(sigma, ref, q, true);
  return t_from(sigma.matrix - ref.matrix, grid, q, ImagingMode::difference);
}

ScatteringData sexp(const dnmap::DNMap& gamma, const KGrid& grid, const BoundaryQuadrature& q) {
  require_scaled(gamma, q);
  return truncate(s_from(gamma.matrix, true, grid, q, ImagingMode::absolute), grid.cutoff, grid.threshold);
}

ScatteringData sdiff(const dnmap::DNMap& gamma, const dnmap::DNMap& ref, const KGrid& grid,
                     const BoundaryQuadrature& q) {
  require_pair(gamma, ref, q, true);
  return truncate(s_from(gamma.matrix - ref.matrix, false, grid, q, ImagingMode::difference), grid.cutoff,
                  grid.threshold);
}

ScatteringData psi_exp_scattering(const dnmap::DNMap& gamma, const dnmap::DNMap& other, const KGrid& grid,
                                  const BoundaryQuadrature& q, ImagingMode mode) {
  require_pair(gamma, other, q, mode == ImagingMode::difference);
  ScatteringData d = empty_like(ScatteringKind::matrix_S, grid, mode);
  const Eigen::MatrixXcd PD = q.phi.cast<Complex>() * (gamma.matrix - other.matrix);
  const int n = grid.size(), L = q.electrodes();
  const double w = q.weight;
#pragma omp parallel for schedule(static)
  for (int idx = 0; idx < n * n; ++idx) {
    int ix = idx % n, iy = idx / n;
    Complex k = grid.point(ix, iy);
    if (k == Complex(0) || std::abs(k) > grid.cutoff) continue;
    Eigen::VectorXcd g12 = PD * expansion_coefficients(k, q, Expansion::u2);
    Eigen::VectorXcd g21 = PD * expansion_coefficients(k, q, Expansion::u1);
    Complex a12 = 0, a21 = 0;
    for (int i = 0; i < L; ++i) {
      Complex zi = q.z[i], nu = q.normal[i];
      // Off-diagonal quadrature of the Green's function plus the boundary jump.
      Complex psi12 = 0.25 * g12[i] * std::conj(nu);
      Complex psi21 = 0.25 * g21[i] * nu;
      for (int j = 0; j < L; ++j) {
        if (j == i) continue;
        Complex dz = zi - q.z[j];
        psi12 += w * std::exp(I * std::conj(k) * dz) / (4 * pi * dz) * g12[j];
        psi21 += w * std::conj(std::exp(I * k * dz) / (4 * pi * dz)) * g21[j];
      }
      a12 += std::exp(-I * std::conj(k) * zi) * psi12 * nu;
      a21 += std::exp(I * std::conj(k) * std::conj(zi)) * psi21 * std::conj(nu);
    }
    d.s12(ix, iy) = I / (2 * pi) * w * a12;
    d.s21(ix, iy) = -I / (2 * pi) * w * a21;
  }
  fill_origin(d.s12, grid.center());
  fill_origin(d.s21, grid.center());
  return truncate(std::move(d), grid.cutoff, grid.threshold);
}

ScatteringData truncate(ScatteringData data, double R, double threshold) {
  const int n = data.grid.size();
  auto apply = [&](Eigen::ArrayXXcd& a) {
    if (a.size() == 0) return;
    for (int iy = 0; iy < n; ++iy)
      for (int ix = 0; ix < n; ++ix) {
        Complex v = a(ix, iy);
        if (std::abs(data.grid.point(ix, iy)) > R || std::abs(v.real()) > threshold ||
            std::abs(v.imag()) > threshold)
          a(ix, iy) = 0;
      }
  };
  apply(data.t);
  apply(data.s12);
  apply(data.s21);
  data.cutoff = std::min(data.cutoff, R);
  data.threshold = std::min(data.threshold, threshold);
  return data;
}

}  // namespace dbar::scattering
