#include "dbar/dnmap.hpp"

#include <cmath>
#include <vector>

namespace dbar::dnmap {

NormalizedData normalize(const forward::MeasurementFrame& frame) {
  const Eigen::MatrixXd& Phi = frame.patterns.matrix;
  if (Phi.rows() != frame.voltages.rows() || Phi.cols() != frame.voltages.cols())
    throw Error(ErrorCode::Validation, "pattern and voltage matrices differ in shape");
  NormalizedData out{Phi, frame.voltages};
  for (int j = 0; j < Phi.cols(); ++j) {
    double norm = Phi.col(j).norm();
    if (!(norm > 1e-300)) throw Error(ErrorCode::ZeroPattern, "pattern column " + std::to_string(j) + " is zero");
    out.phi.col(j) /= norm;
    Complex mean = out.v.col(j).mean();
    out.v.col(j) = (out.v.col(j).array() - mean).matrix() / norm;
  }
  return out;
}

NDMap assemble_nd(const NormalizedData& data, double effective_area) {
  if (!(effective_area > 0)) throw Error(ErrorCode::Validation, "electrode area must be positive");
  return {effective_area * data.phi.transpose().cast<Complex>() * data.v};
}

NDMap assemble_nd(const forward::MeasurementFrame& frame) {
  return assemble_nd(normalize(frame), frame.layout.effective_area());
}

DNMap invert_to_dn(const NDMap& nd) {
  if (nd.matrix.rows() != nd.matrix.cols() || nd.matrix.rows() == 0)
    throw Error(ErrorCode::Validation, "ND matrix must be square and non-empty");
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(nd.matrix);
  const auto& s = svd.singularValues();
  double smin = s(s.size() - 1);
  if (!(smin > 0) || s(0) / smin > 1e12)
    throw Error(ErrorCode::IllConditioned,
                "ND condition number " + std::to_string(smin > 0 ? s(0) / smin : INFINITY) + " exceeds 1e12");
  return {nd.matrix.partialPivLu().inverse(), ScalingState::raw, 1.0, 1.0};
}

DNMap scale_dn(const DNMap& dn, double r, Complex gamma0) {
  if (dn.state != ScalingState::raw) throw Error(ErrorCode::ScalingMismatch, "DN map is already scaled");
  if (!(r > 0)) throw Error(ErrorCode::Validation, "scaling radius must be positive");
  if (!(gamma0.real() > 0)) throw Error(ErrorCode::NonPositiveEstimate, "gamma0 must have positive real part");
  return {dn.matrix * (r / gamma0), ScalingState::scaled, r, gamma0};
}

Eigen::MatrixXcd ContinuumReference::normalized_voltages(const forward::MeasurementFrame& frame) const {
  const Eigen::MatrixXd phi = normalize(frame).phi;
  const int L = static_cast<int>(phi.rows());
  // v₁ = (ρ/a) · F⁻¹[F[φ](n)/|n|] with ρ = P/2π and a = (P/L)·height.
  const double scale = L / (2 * pi * frame.layout.height);
  Eigen::MatrixXcd v1(L, phi.cols());
  for (int j = 0; j < phi.cols(); ++j) {
    Eigen::VectorXcd c = Eigen::VectorXcd::Zero(L);
    for (int n = 0; n < L; ++n)
      for (int l = 0; l < L; ++l) c[n] += phi(l, j) * std::polar(1.0, -2 * pi * double(n) * l / L);
    for (int n = 0; n < L; ++n) {
      int m = std::min(n, L - n);
      c[n] = m == 0 ? Complex(0) : c[n] / double(m);
    }
    for (int l = 0; l < L; ++l) {
      Complex acc = 0;
      for (int n = 0; n < L; ++n) acc += c[n] * std::polar(1.0, 2 * pi * double(n) * l / L);
      v1(l, j) = scale * acc.real() / L;
    }
  }
  return v1;
}

namespace {

// Second antiderivative of log|t|.
double log_phi(double t) {
  double a = std::abs(t);
  return a > 0 ? 0.5 * t * t * std::log(a) - 0.75 * t * t : 0.0;
}

// log|2 sin(x/2)| − log|x|, smooth for |x| < 2π.
double log_sine_remainder(double x) {
  double a = std::abs(x);
  return a > 1e-12 ? std::log(std::abs(2 * std::sin(x / 2)) / a) : 0.0;
}

double wrap(double x) { return std::remainder(x, 2 * pi); }

}  // namespace

ElectrodeDiskReference::ElectrodeDiskReference(int cells_per_electrode) : cells_(cells_per_electrode) {
  if (cells_ < 2) throw Error(ErrorCode::Validation, "need at least two cells per electrode");
}

Eigen::MatrixXcd ElectrodeDiskReference::normalized_voltages(const forward::MeasurementFrame& frame) const {
  const auto& layout = frame.layout;
  const Eigen::MatrixXd phi = normalize(frame).phi;
  const int L = layout.count(), m = cells_, K = L * m;
  const double P = layout.boundary.perimeter(), rho = P / (2 * pi);
  const double half = layout.width / (2 * rho), H = layout.height, zc = frame.contact_impedance;

  // Cells in angle on the disk, cosine-graded towards each electrode end.
  std::vector<double> a(K), b(K);
  for (int l = 0; l < L; ++l) {
    const double c = layout.boundary.arc_length(layout.angles[l]) / rho;
    for (int i = 0; i < m; ++i) {
      a[l * m + i] = c - half + half * (1 - std::cos(pi * i / m));
      b[l * m + i] = c - half + half * (1 - std::cos(pi * (i + 1) / m));
    }
  }
  for (int l = 0; l < L && L > 1; ++l)
    if (wrap(a[((l + 1) % L) * m] - b[l * m + m - 1]) < 0) throw Error(ErrorCode::ElectrodesOverlap, "electrodes overlap");

  constexpr int ng = 6;
  const double gx[ng] = {-0.9324695142031521, -0.6612093864662645, -0.2386191860831969,
                         0.2386191860831969,  0.6612093864662645,  0.9324695142031521};
  const double gw[ng] = {0.1713244923791704, 0.3607615730950284, 0.4679139345726910,
                         0.4679139345726910, 0.3607615730950284, 0.1713244923791704};

  // Unknowns: cell currents, electrode potentials, potential constant.
  const int n = K + L + 1;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < K; ++i) {
    const double di = b[i] - a[i], ci = 0.5 * (a[i] + b[i]);
    for (int j = 0; j < K; ++j) {
      const double dj = b[j] - a[j];
      // Place cell j next to cell i on the real line.
      const double shift = ci + wrap(0.5 * (a[j] + b[j]) - ci) - 0.5 * (a[j] + b[j]);
      const double aj = a[j] + shift, bj = b[j] + shift;
      double integral = 0;
      if (std::abs(0.5 * (aj + bj) - ci) < 3 * std::max(di, dj)) {
        integral = -(log_phi(b[i] - bj) - log_phi(a[i] - bj) - log_phi(b[i] - aj) + log_phi(a[i] - aj));
        for (int p = 0; p < ng; ++p)
          for (int q = 0; q < ng; ++q)
            integral += gw[p] * gw[q] * di * dj / 4 *
                        log_sine_remainder(ci + di / 2 * gx[p] - (0.5 * (aj + bj) + dj / 2 * gx[q]));
      } else {
        for (int p = 0; p < ng; ++p)
          for (int q = 0; q < ng; ++q) {
            double x = (ci + di / 2 * gx[p]) - (0.5 * (aj + bj) + dj / 2 * gx[q]);
            integral += gw[p] * gw[q] * di * dj / 4 * std::log(std::abs(2 * std::sin(x / 2)));
          }
      }
      A(i, j) = -(rho / pi) * integral / di;
    }
    A(i, i) += zc;
    A(i, K + i / m) = -1;
    A(i, K + L) = 1;
    A(K + i / m, i) = rho * di * H;
  }
  for (int l = 0; l < L; ++l) A(K + L, K + l) = 1;

  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, phi.cols());
  rhs.middleRows(K, L) = phi;
  const Eigen::MatrixXd x = A.partialPivLu().solve(rhs);
  Eigen::MatrixXcd v1(L, phi.cols());
  for (int j = 0; j < phi.cols(); ++j) {
    Eigen::VectorXd u = x.col(j).segment(K, L);
    v1.col(j) = (u.array() - u.mean()).matrix().cast<Complex>();
  }
  return v1;
}

Eigen::MatrixXcd electrode_correction(const forward::MeasurementFrame& frame, double r,
                                      const ElectrodeDiskReference& disk) {
  const Eigen::MatrixXd phi = normalize(frame).phi;
  const double area = frame.layout.effective_area();
  auto unit_dn = [&](Eigen::MatrixXcd v1) {
    return scale_dn(invert_to_dn(assemble_nd(NormalizedData{phi, std::move(v1)}, area)), r, 1.0).matrix;
  };
  return unit_dn(ContinuumReference{}.normalized_voltages(frame)) - unit_dn(disk.normalized_voltages(frame));
}

Complex estimate_gamma0(const Eigen::MatrixXcd& v, const Eigen::MatrixXcd& v1) {
  if (v.rows() != v1.rows() || v.cols() != v1.cols())
    throw Error(ErrorCode::Validation, "reference voltages differ in shape from the data");
  double denom = v1.squaredNorm();
  if (!(denom > 0)) throw Error(ErrorCode::NonPositiveEstimate, "reference voltages vanish");
  Complex x = (v1.adjoint() * v).trace() / denom;
  if (std::abs(x) == 0) throw Error(ErrorCode::NonPositiveEstimate, "data orthogonal to the reference");
  Complex g = 1.0 / x;
  if (!(g.real() > 0))
    throw Error(ErrorCode::NonPositiveEstimate, "best constant has non-positive real part");
  return g;
}

Complex estimate_gamma0(const forward::MeasurementFrame& frame, const ReferenceModel& reference) {
  return estimate_gamma0(normalize(frame).v, reference.normalized_voltages(frame));
}

}  // namespace dbar::dnmap
