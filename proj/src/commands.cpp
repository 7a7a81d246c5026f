#include "dbar/commands.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include <omp.h>

namespace dbar::commands {

namespace {

using io::json;

io::Config load_config(const CommandOptions& o) {
  return o.config.empty() ? io::Config::from_json(json::object(), "<defaults>") : io::Config::load(o.config);
}

// Effective configuration: file contents with command-line overrides applied.
json effective(const io::Config& c, const CommandOptions& o) {
  json j = c.root();
  if (o.method) j["method"] = *o.method;
  if (o.mode) j["mode"] = *o.mode;
  if (o.seed) j["seed"] = *o.seed;
  if (o.threads) j["solver"]["threads"] = *o.threads;
  if (!o.reference.empty()) j["reference_dataset"] = o.reference;
  if (!o.out.empty()) j["output"] = o.out;
  return j;
}

std::string file_hash(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return io::config_hash(json(ss.str()));
}

json manifest(const std::string& command, const json& config, double seconds, const json& inputs,
              const json& outputs) {
  return {{"tool", "dbar"},
          {"version", DBAR_VERSION},
          {"command", command},
          {"config", config},
          {"config_hash", io::config_hash(config)},
          {"seed", config.value("seed", json(0))},
          {"threads", omp_get_max_threads()},
          {"inputs", inputs},
          {"outputs", outputs},
          {"wall_time_s", seconds}};
}

double since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

SimulateResult cmd_simulate(const CommandOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  const io::Config file = load_config(opts);
  const json cfg = effective(file, opts);
  auto scenario = io::simulation_scenario(file);
  if (opts.seed) scenario.options.seed = *opts.seed;
  if (!opts.out.empty()) scenario.output = opts.out;

  SimulateResult res;
  res.frame = forward::simulate_frame(scenario.layout, scenario.phantom, scenario.patterns, scenario.options);
  const fs::path dir = scenario.output;
  fs::create_directories(dir);
  res.dataset = dir / (scenario.stem + ".json");
  io::write_dataset(res.dataset, res.frame);
  auto truth = io::truth_image(scenario.phantom, scenario.layout.boundary, scenario.truth_n, scenario.truth_extent);
  json extra = {{"phantom", io::phantom_to_json(scenario.phantom)},
                {"boundary", io::boundary_to_json(scenario.layout.boundary)},
                {"kind", "truth"}};
  res.truth = io::write_image(dir / (scenario.stem + "_truth"), truth, std::nullopt, std::nullopt, extra).meta;
  res.manifest = dir / (scenario.stem + "_manifest.json");
  io::write_json(res.manifest, manifest("simulate", cfg, since(t0), json::object(),
                                        {{"dataset", res.dataset.string()}, {"truth", res.truth.string()}}));
  return res;
}

ReconstructResult cmd_reconstruct(const CommandOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  const io::Config file = load_config(opts);
  const json cfg = effective(file, opts);
  // Flag overrides are validated against the file's locations where possible.
  io::RunConfig rc = io::run_config(file);
  const io::Config overridden = io::Config::from_json(cfg, file.source());
  rc.reconstruction.method = overridden.at("method", [&] { return parse_method(overridden.string("method", "approach2")); });
  rc.reconstruction.mode = overridden.at("mode", [&] { return parse_mode(overridden.string("mode", "absolute")); });
  if (opts.threads) {
    if (*opts.threads < 0) throw Error(ErrorCode::Validation, "--threads must be >= 0");
    rc.reconstruction.solver.threads = *opts.threads;
  }
  if (opts.seed) rc.seed = *opts.seed;
  if (!opts.reference.empty()) rc.reference_dataset = opts.reference;
  if (!opts.out.empty()) rc.output = opts.out;
  if (opts.dataset.empty()) throw Error(ErrorCode::Validation, "reconstruct needs --dataset");

  const auto target = io::read_dataset(opts.dataset);
  std::optional<forward::MeasurementFrame> reference;
  if (rc.reconstruction.mode == ImagingMode::difference) {
    if (rc.reference_dataset.empty())
      throw Error(ErrorCode::Validation, "difference mode needs --reference or reference_dataset");
    reference = io::read_dataset(rc.reference_dataset);
  }
  geometry::ElectrodeLayout working = target.layout;
  if (rc.working_boundary) working = geometry::on_boundary(working, *rc.working_boundary);
  if (rc.perturb_mode) working = geometry::perturb_angles(working, *rc.perturb_mode, rc.perturb_magnitude, rc.seed);

  ReconstructResult res;
  res.reconstruction =
      pipeline::reconstruct(target, rc.reconstruction, reference ? &*reference : nullptr, working);
  const auto& rec = res.reconstruction;

  const fs::path dir = rc.output;
  fs::create_directories(dir);
  std::optional<io::ColorScale> re_scale, im_scale;
  if (rc.color_re) re_scale = io::ColorScale{rc.color_re->first, rc.color_re->second};
  if (rc.color_im) im_scale = io::ColorScale{rc.color_im->first, rc.color_im->second};
  json extra = {{"kind", "reconstruction"},
                {"failures", rec.field.failures},
                {"boundary", io::boundary_to_json(working.boundary)}};
  res.image = io::write_image(dir / "image", rec.image, re_scale, im_scale, extra).meta;
  res.diagnostics = dir / "diagnostics.csv";
  io::write_diagnostics_csv(res.diagnostics, rec.field);
  if (rec.scattering.kind == scattering::ScatteringKind::real_t) {
    io::write_complex_csv(dir / "scattering_t", rec.scattering.t);
  } else {
    io::write_complex_csv(dir / "scattering_s12", rec.scattering.s12);
    io::write_complex_csv(dir / "scattering_s21", rec.scattering.s21);
  }
  json inputs = {{"dataset", opts.dataset}, {"dataset_hash", file_hash(opts.dataset)}};
  if (reference) inputs["reference"] = rc.reference_dataset, inputs["reference_hash"] = file_hash(rc.reference_dataset);
  res.manifest = dir / "manifest.json";
  json out = {{"image", res.image.string()},
              {"diagnostics", res.diagnostics.string()},
              {"gamma0", {rec.gamma0.real(), rec.gamma0.imag()}},
              {"scale_radius", rec.r},
              {"failed_pixels", rec.field.failures},
              {"reconstruction_s", rec.seconds}};
  io::write_json(res.manifest, manifest("reconstruct", cfg, since(t0), inputs, out));
  return res;
}

EvaluateResult cmd_evaluate(const CommandOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  const io::Config file = load_config(opts);
  const json cfg = effective(file, opts);
  const io::RunConfig rc = io::run_config(file);
  if (opts.image.empty() || opts.truth.empty()) throw Error(ErrorCode::Validation, "evaluate needs --image and --truth");
  const auto image = io::read_image(opts.image);
  const auto truth = io::read_image(opts.truth);
  if (image.grid.n != truth.grid.n || image.grid.extent != truth.grid.extent)
    throw Error(ErrorCode::GridMismatch, "image and truth grids differ");

  std::vector<evaluation::RegionMask> masks;
  if (!rc.regions.empty()) {
    for (const auto& [name, shape] : rc.regions)
      masks.push_back(evaluation::make_region(name, shape, image.grid, image.scale_radius));
  } else {
    const json meta = io::read_json(opts.truth);
    if (!meta.contains("phantom")) throw Error(ErrorCode::Validation, "no regions configured and truth has no phantom");
    masks = evaluation::phantom_regions(io::phantom_from_json(meta.at("phantom")), image.grid, image.scale_radius);
  }

  io::Metrics m;
  m.regions = evaluation::region_stats(image, masks);
  m.truth = evaluation::region_stats(truth, masks);
  m.true_max = -INFINITY;
  m.true_min = INFINITY;
  for (int i = 0; i < truth.grid.n * truth.grid.n; ++i)
    if (truth.grid.mask[i]) {
      m.true_max = std::max(m.true_max, truth.values(i).real());
      m.true_min = std::min(m.true_min, truth.values(i).real());
    }
  m.dynamic_range = evaluation::dynamic_range(image, m.true_max, m.true_min);
  if (!opts.compare.empty()) m.rotation = evaluation::rotation_estimate(io::read_image(opts.compare), image);

  EvaluateResult res;
  res.metrics = m;
  const fs::path dir = opts.out.empty() ? rc.output : opts.out;
  fs::create_directories(dir);
  res.report = dir / "metrics.json";
  res.table = dir / "metrics.csv";
  json report = io::metrics_to_json(m);
  report["image"] = opts.image;
  report["truth"] = opts.truth;
  report["method"] = std::string(to_string(image.method));
  io::write_json(res.report, report);
  io::write_metrics_csv(res.table, m, std::string(to_string(image.method)), file.string("scenario", "default"));
  res.manifest = dir / "manifest.json";
  io::write_json(res.manifest, manifest("evaluate", cfg, since(t0),
                                        {{"image", opts.image}, {"truth", opts.truth}, {"compare", opts.compare}},
                                        {{"report", res.report.string()}, {"table", res.table.string()}}));
  return res;
}

int exit_code(const std::exception& e) noexcept {
  if (const auto* err = dynamic_cast<const Error*>(&e)) return err->is_validation() ? 2 : 3;
  return 3;
}

}  // namespace dbar::commands
