#include <doctest.h>

#include "dbar/dnmap.hpp"
#include "dbar/forward.hpp"

using namespace dbar;
using namespace dbar::dnmap;

namespace {

geometry::ElectrodeLayout tank() {
  return geometry::place_electrodes(geometry::BoundaryGeometry::circle(0.15), 32, 0.025, 0.016, 0.0, true);
}

// Frame on the layout with the given voltages and trig patterns.
forward::MeasurementFrame frame_with(const geometry::ElectrodeLayout& layout, const Eigen::MatrixXcd& v,
                                     double amplitude = 1.0) {
  forward::MeasurementFrame f;
  f.layout = layout;
  f.patterns = forward::trig_patterns(layout.count(), amplitude);
  f.voltages = v;
  return f;
}

const forward::MeasurementFrame& saline() {
  static const auto f =
      forward::simulate_frame(tank(), forward::Phantom::homogeneous(0.424), forward::trig_patterns(32, 2e-4));
  return f;
}

}  // namespace

TEST_CASE("normalize") {
  auto layout = tank();
  auto f = frame_with(layout, forward::trig_patterns(32, 1.0).matrix.cast<Complex>() * Complex(3.0, 1.0));
  f.voltages.array() += 5.0;  // offset removed by the mean-zero step
  auto n = normalize(f);
  for (int j = 0; j < 31; ++j) {
    CHECK(n.phi.col(j).norm() == doctest::Approx(1.0));
    CHECK(std::abs(n.v.col(j).sum()) < 1e-12);
    double norm = f.patterns.matrix.col(j).norm();
    CHECK((n.v.col(j) - Complex(3.0, 1.0) * f.patterns.matrix.col(j).cast<Complex>() / norm).norm() < 1e-12);
  }
  auto s = normalize(saline());
  for (int j = 0; j < 31; ++j) CHECK(std::abs(s.v.col(j).sum()) < 1e-14 * s.v.col(j).norm() * 32);

  auto zero = f;
  zero.patterns.matrix.col(4).setZero();
  try {
    normalize(zero);
    FAIL("expected ZeroPattern");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroPattern);
  }
}

TEST_CASE("assemble and invert") {
  NormalizedData d;
  d.phi = forward::trig_patterns(32, 1.0).matrix.colwise().normalized();
  d.v = d.phi.cast<Complex>();
  const double a = 2.5e-3;
  auto nd = assemble_nd(d, a);
  CHECK((nd.matrix - a * Eigen::MatrixXcd::Identity(31, 31)).norm() < 1e-14);
  auto dn = invert_to_dn(nd);
  CHECK(dn.state == ScalingState::raw);
  CHECK((dn.matrix - Eigen::MatrixXcd::Identity(31, 31) / a).norm() < 1e-9);

  auto real = assemble_nd(saline());
  auto inv = invert_to_dn(real);
  CHECK((inv.matrix * real.matrix - Eigen::MatrixXcd::Identity(31, 31)).norm() < 1e-10);
  CHECK((real.matrix - real.matrix.transpose()).norm() < 1e-8 * real.matrix.norm());

  NDMap singular{Eigen::MatrixXcd::Identity(31, 31)};
  singular.matrix(3, 3) = 1e-14;
  try {
    invert_to_dn(singular);
    FAIL("expected IllConditioned");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IllConditioned);
  }
}

TEST_CASE("continuum data on the unit disk give the radial eigenvalues") {
  auto layout = geometry::place_electrodes(geometry::BoundaryGeometry::circle(1.0), 32, 0.1, 1.0);
  auto f = frame_with(layout, Eigen::MatrixXcd::Zero(32, 31));
  f.voltages = ContinuumReference().normalized_voltages(f);
  // normalized voltages with unit-norm patterns are the voltages themselves
  f.patterns.matrix = normalize(f).phi;
  auto nd = assemble_nd(f).matrix;
  auto dn = invert_to_dn(assemble_nd(f)).matrix;
  for (int j = 0; j < 31; ++j) {
    int n = j < 16 ? j + 1 : j - 15;
    double oracle = forward::radial_oracle([](double) { return 1.0; }, {}, n, 1.0);
    CHECK(std::abs(nd(j, j).real() - oracle) < 0.05 * oracle);
    CHECK(std::abs(dn(j, j).real() - 1.0 / oracle) < 0.05 / oracle);
  }
}

TEST_CASE("best constant admittivity") {
  auto layout = tank();
  Eigen::MatrixXcd v1 = Eigen::MatrixXcd::Random(32, 31);
  CHECK(std::abs(estimate_gamma0(v1, v1) - 1.0) < 1e-14);
  CHECK(std::abs(estimate_gamma0(v1 / 0.3, v1) - 0.3) < 1e-14);
  CHECK(std::abs(estimate_gamma0(v1 / Complex(0.3, 0.1), v1) - Complex(0.3, 0.1)) < 1e-14);
  try {
    estimate_gamma0(-v1, v1);
    FAIL("expected NonPositiveEstimate");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonPositiveEstimate);
  }

  Complex cem = estimate_gamma0(saline(), forward::CemReference());
  Complex disk = estimate_gamma0(saline(), ElectrodeDiskReference());
  CHECK(cem.real() >= 0.40);
  CHECK(cem.real() <= 0.45);
  CHECK(disk.real() >= 0.40);
  CHECK(disk.real() <= 0.45);
  CHECK(std::abs(cem.imag()) < 1e-12);
}

TEST_CASE("scaling") {
  DNMap dn{Eigen::MatrixXcd::Identity(31, 31)};
  auto same = scale_dn(dn, 1.0, 1.0);
  CHECK(same.matrix == dn.matrix);
  CHECK(same.state == ScalingState::scaled);
  auto s = scale_dn(dn, 0.15, 0.424);
  CHECK(s.matrix(0, 0).real() == doctest::Approx(0.3538).epsilon(1e-4));
  CHECK(s.r == 0.15);
  CHECK(s.gamma0 == Complex(0.424));
  try {
    scale_dn(s, 0.15, 0.424);
    FAIL("expected ScalingMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ScalingMismatch);
  }
  CHECK_THROWS_AS(scale_dn(dn, 0.0, 1.0), Error);
}

TEST_CASE("DN map of a real phantom has a real spectrum") {
  auto f = forward::simulate_frame(tank(), forward::heart_and_lungs(0.15), forward::trig_patterns(32, 2e-4));
  auto dn = invert_to_dn(assemble_nd(f)).matrix;
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(dn);
  CHECK(es.eigenvalues().imag().cwiseAbs().maxCoeff() / es.eigenvalues().real().cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("electrode disk reference against the FEM model") {
  const auto& f = saline();
  ElectrodeDiskReference coarse(32), fine(64);
  auto v32 = coarse.normalized_voltages(f), v64 = fine.normalized_voltages(f);
  CHECK((v32 - v64).norm() < 2e-3 * v64.norm());
  Eigen::MatrixXcd v = normalize(f).v * 0.424;  // gamma = 1 equivalent
  double worst = 0;
  for (int j = 0; j < 31; ++j) worst = std::max(worst, std::abs(v.col(j).norm() / v64.col(j).norm() - 1));
  MESSAGE("largest per-pattern difference to FEM " << worst);
  CHECK(worst < 0.03);
  // The electrodes shunt current, so every mode sits below the gapless value.
  auto vc = ContinuumReference().normalized_voltages(f);
  for (int j = 0; j < 31; ++j) CHECK(v64.col(j).norm() < vc.col(j).norm());

  auto angles = f.layout.angles;
  angles[1] = angles[0] + 0.1;  // arc gap 0.015 m, narrower than the 0.025 m electrodes
  auto crowded = frame_with(geometry::with_angles(f.layout, angles), Eigen::MatrixXcd::Zero(32, 31));
  try {
    coarse.normalized_voltages(crowded);
    FAIL("expected ElectrodesOverlap");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ElectrodesOverlap);
  }
}

TEST_CASE("electrode correction maps homogeneous CEM data to the continuum") {
  const auto& f = saline();
  const double r = 0.15;
  auto corr = electrode_correction(f, r);
  CHECK((corr - corr.transpose()).norm() < 1e-10 * corr.norm());
  Eigen::MatrixXcd lambda = scale_dn(invert_to_dn(assemble_nd(f)), r, 0.424).matrix + corr;
  // The FEM and the boundary model agree to 1-2.6% depending on the mode.
  for (int j = 0; j < 31; ++j) {
    int n = j < 16 ? j + 1 : j - 15;
    CHECK(std::abs(lambda(j, j).real() - n) < 0.03 * n);
  }
  for (int i = 0; i < 31; ++i)
    for (int j = 0; j < 31; ++j)
      if (i != j) CHECK(std::abs(lambda(i, j)) < 0.02);
}
