#pragma once

#include <Eigen/Dense>

#include "dbar/frame.hpp"

namespace dbar::dnmap {

enum class ScalingState { raw, scaled };

struct NDMap {
  Eigen::MatrixXcd matrix;
};

struct DNMap {
  Eigen::MatrixXcd matrix;
  ScalingState state = ScalingState::raw;
  double r = 1.0;
  Complex gamma0{1.0, 0.0};
};

struct NormalizedData {
  Eigen::MatrixXd phi;  // unit-norm current columns
  Eigen::MatrixXcd v;   // mean-zero voltages divided by the current column norm
};

NormalizedData normalize(const forward::MeasurementFrame& frame);

// R(m,n) = a Σ_ℓ φ^m_ℓ v^n_ℓ with a the electrode's effective area.
NDMap assemble_nd(const forward::MeasurementFrame& frame);
NDMap assemble_nd(const NormalizedData& data, double effective_area);

DNMap invert_to_dn(const NDMap& nd);

DNMap scale_dn(const DNMap& dn, double r, Complex gamma0);

// Normalized voltages v₁ that a γ ≡ 1 medium would produce for the frame's
// patterns on its layout.
class ReferenceModel {
 public:
  virtual ~ReferenceModel() = default;
  virtual Eigen::MatrixXcd normalized_voltages(const forward::MeasurementFrame& frame) const = 0;
};

// Gapless-electrode disk with the same perimeter. Closed form, no meshing.
class ContinuumReference final : public ReferenceModel {
 public:
  Eigen::MatrixXcd normalized_voltages(const forward::MeasurementFrame& frame) const override;
};

// Complete electrode model on the disk of equal perimeter, with the layout's
// electrodes at their arc-length positions, widths and contact impedance.
// Galerkin boundary model on the closed-form disk Green's function with
// piecewise-constant currents on cells graded into the electrode ends.
class ElectrodeDiskReference final : public ReferenceModel {
 public:
  explicit ElectrodeDiskReference(int cells_per_electrode = 32);
  Eigen::MatrixXcd normalized_voltages(const forward::MeasurementFrame& frame) const override;

 private:
  int cells_;
};

// r·(Λ₁ of the gapless continuum − Λ₁ of the electrode disk) on the frame's
// patterns. Added to a scaled DN matrix it removes the electrode artefacts a
// homogeneous medium would show, leaving data consistent with the continuum
// identities used for the tangential term.
Eigen::MatrixXcd electrode_correction(const forward::MeasurementFrame& frame, double r,
                                      const ElectrodeDiskReference& disk = ElectrodeDiskReference{});

// Best constant admittivity: minimizes ‖v − v₁/γ₀‖_F over complex γ₀.
Complex estimate_gamma0(const forward::MeasurementFrame& frame, const ReferenceModel& reference);
Complex estimate_gamma0(const Eigen::MatrixXcd& v, const Eigen::MatrixXcd& v1);

}  // namespace dbar::dnmap
