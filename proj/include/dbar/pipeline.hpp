#pragma once

#include <optional>

#include "dbar/dbar_solver.hpp"
#include "dbar/dnmap.hpp"
#include "dbar/forward.hpp"
#include "dbar/recovery.hpp"
#include "dbar/scattering.hpp"

namespace dbar::pipeline {

struct ReconstructionConfig {
  Method method = Method::approach2;
  ImagingMode mode = ImagingMode::absolute;
  scattering::KGrid kgrid;
  int z_n = 64;
  double z_extent = 1.05;
  solver::SolverConfig solver;
  double reference_mesh_size = 0;  // homogeneous CEM reference, 0 = automatic

  void validate() const;
};

struct Reconstruction {
  recovery::AdmittivityImage image;
  scattering::ScatteringData scattering;
  solver::CGOField field;
  Complex gamma0;
  double r = 1;
  double seconds = 0;
};

// Target frame on the trig basis with the working layout substituted for the
// one it was recorded on.
forward::MeasurementFrame working_frame(const forward::MeasurementFrame& frame,
                                        const geometry::ElectrodeLayout& working);

// Everything up to the D-bar solves: basis change, ND → DN, γ0, scaling and
// scattering data.
struct ScatteringStage {
  scattering::ScatteringData scattering;
  Complex gamma0;
  double r = 1;
  geometry::ElectrodeLayout layout;
};

ScatteringStage scattering_stage(const forward::MeasurementFrame& target, const ReconstructionConfig& config,
                                 const forward::MeasurementFrame* reference = nullptr,
                                 const std::optional<geometry::ElectrodeLayout>& working = std::nullopt);

// Full chain: basis change, ND → DN, γ0, scaling, scattering data, D-bar
// solves and recovery. `working` is the geometry the reconstruction assumes
// (defaults to the frame's own layout). Difference mode needs `reference`.
// method=approach2 with mode=absolute runs without any forward simulation.
Reconstruction reconstruct(const forward::MeasurementFrame& target, const ReconstructionConfig& config,
                           const forward::MeasurementFrame* reference = nullptr,
                           const std::optional<geometry::ElectrodeLayout>& working = std::nullopt);

}  // namespace dbar::pipeline
