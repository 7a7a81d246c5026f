#include "dbar/pipeline.hpp"

#include <chrono>

namespace dbar::pipeline {

void ReconstructionConfig::validate() const {
  kgrid.validate();
  if (z_n < 3) throw Error(ErrorCode::Validation, "zgrid.n must be >= 3");
  if (!(z_extent > 0)) throw Error(ErrorCode::Validation, "zgrid.extent must be positive");
  if (!(solver.tolerance > 0)) throw Error(ErrorCode::Validation, "solver.tol must be positive");
  if (solver.max_iterations < 1) throw Error(ErrorCode::Validation, "solver.max_iter must be >= 1");
  if (reference_mesh_size < 0) throw Error(ErrorCode::Validation, "reference mesh size must be >= 0");
}

forward::MeasurementFrame working_frame(const forward::MeasurementFrame& frame,
                                        const geometry::ElectrodeLayout& working) {
  frame.validate();
  if (working.count() != frame.electrodes())
    throw Error(ErrorCode::Validation, "working layout has a different electrode count");
  auto trig = forward::trig_patterns(frame.electrodes(), frame.patterns.amplitude);
  forward::MeasurementFrame out =
      frame.patterns.basis == forward::PatternBasis::trig && frame.patterns.matrix == trig.matrix
          ? frame
          : forward::change_of_basis(frame, trig);
  out.layout = working;
  return out;
}

namespace {

dnmap::DNMap raw_dn(const forward::MeasurementFrame& f) { return dnmap::invert_to_dn(dnmap::assemble_nd(f)); }

}  // namespace

ScatteringStage scattering_stage(const forward::MeasurementFrame& target, const ReconstructionConfig& config,
                                 const forward::MeasurementFrame* reference,
                                 const std::optional<geometry::ElectrodeLayout>& working) {
  config.validate();
  const bool diff = config.mode == ImagingMode::difference;
  if (diff && !reference) throw Error(ErrorCode::Validation, "difference mode needs a reference dataset");
  if (config.method == Method::texp && (!target.is_real() || (diff && !reference->is_real())))
    throw Error(ErrorCode::RealMethodComplexData, "texp reconstructs real conductivities only");

  ScatteringStage out;
  out.layout = working ? *working : target.layout;
  const auto& layout = out.layout;
  const auto frame = working_frame(target, layout);
  const double r = layout.boundary.enclosing_radius();
  out.r = r;

  const bool needs_cem = !diff && config.method != Method::approach2;
  forward::CemReference cem(config.reference_mesh_size);
  dnmap::ElectrodeDiskReference disk;
  out.gamma0 = needs_cem ? dnmap::estimate_gamma0(frame, cem) : dnmap::estimate_gamma0(frame, disk);

  auto lambda = dnmap::scale_dn(raw_dn(frame), r, out.gamma0);
  if (!diff && config.method == Method::approach2) lambda.matrix += dnmap::electrode_correction(frame, r, disk);
  const auto q = scattering::make_quadrature(layout, dnmap::normalize(frame).phi, r);

  dnmap::DNMap other;
  if (diff) {
    if (reference->electrodes() != target.electrodes())
      throw Error(ErrorCode::Validation, "reference dataset has a different electrode count");
    other = dnmap::scale_dn(raw_dn(working_frame(*reference, layout)), r, out.gamma0);
  } else if (needs_cem) {
    auto one = working_frame(cem.frame(frame), layout);
    other = dnmap::scale_dn(raw_dn(one), r, 1.0);
  }

  switch (config.method) {
    case Method::texp:
      out.scattering = diff ? scattering::tdiff(lambda, other, config.kgrid, q)
                            : scattering::texp(lambda, other, config.kgrid, q);
      break;
    case Method::approach1:
      out.scattering = scattering::psi_exp_scattering(lambda, other, config.kgrid, q, config.mode);
      break;
    case Method::approach2:
      out.scattering = diff ? scattering::sdiff(lambda, other, config.kgrid, q)
                            : scattering::sexp(lambda, config.kgrid, q);
      break;
  }
  return out;
}

Reconstruction reconstruct(const forward::MeasurementFrame& target, const ReconstructionConfig& config,
                           const forward::MeasurementFrame* reference,
                           const std::optional<geometry::ElectrodeLayout>& working) {
  const auto t0 = std::chrono::steady_clock::now();
  auto stage = scattering_stage(target, config, reference, working);
  Reconstruction out;
  out.r = stage.r;
  out.gamma0 = stage.gamma0;
  out.scattering = std::move(stage.scattering);
  const auto grid = recovery::ZGrid::make(config.z_n, config.z_extent, stage.layout.boundary, stage.r);
  out.field = solver::solve_image(out.scattering, grid, config.solver);
  if (config.method == Method::texp) {
    out.image = recovery::sigma_from_mu(out.field, out.gamma0, config.mode);
  } else {
    out.image = recovery::gamma_from_q(recovery::q_from_m(out.field), grid, out.gamma0, config.mode);
  }
  out.image.method = config.method;
  out.image.scale_radius = stage.r;
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace dbar::pipeline
