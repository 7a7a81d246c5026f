#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dbar/evaluation.hpp"
#include "dbar/forward.hpp"
#include "dbar/pipeline.hpp"

namespace dbar::io {

using nlohmann::json;
namespace fs = std::filesystem;

inline constexpr int dataset_version = 1;

// ---------------------------------------------------------------- datasets

json boundary_to_json(const geometry::BoundaryGeometry& b);
geometry::BoundaryGeometry boundary_from_json(const json& j);
json layout_to_json(const geometry::ElectrodeLayout& l);
geometry::ElectrodeLayout layout_from_json(const json& j);
json frame_to_json(const forward::MeasurementFrame& f);
forward::MeasurementFrame frame_from_json(const json& j);
json phantom_to_json(const forward::Phantom& p);
forward::Phantom phantom_from_json(const json& j);
json region_to_json(const forward::Region& r);
forward::Region region_from_json(const json& j);

void write_dataset(const fs::path& path, const forward::MeasurementFrame& frame);
forward::MeasurementFrame read_dataset(const fs::path& path);

// ---------------------------------------------------------------- config

// Run configuration read from JSON or from a flat file of `dotted.key = value`
// lines ('#' starts a comment; values are JSON literals or bare strings).
// Every leaf remembers its source line so errors can point at it.
class Config {
 public:
  Config() = default;
  static Config parse(const std::string& text, std::string source = "<config>");
  static Config load(const fs::path& path);
  static Config from_json(json j, std::string source = "<config>");

  const json& root() const noexcept { return root_; }
  const std::string& source() const noexcept { return source_; }
  bool has(const std::string& path) const;
  const json* find(const std::string& path) const;
  // "source:line" of a dotted key, or the source alone if unknown.
  std::string where(const std::string& path) const;
  [[noreturn]] void fail(const std::string& path, const std::string& message,
                         ErrorCode code = ErrorCode::Validation) const;

  double number(const std::string& path, double fallback) const;
  int integer(const std::string& path, int fallback) const;
  std::string string(const std::string& path, const std::string& fallback) const;
  bool boolean(const std::string& path, bool fallback) const;
  Complex complex(const std::string& path, Complex fallback) const;

  // Runs `fn`; a dbar::Error escaping it is rethrown with the key's location.
  template <typename Fn>
  auto at(const std::string& path, Fn&& fn) const -> decltype(fn()) {
    try {
      return fn();
    } catch (const Error& e) {
      throw Error(e.code(), where(path) + ": " + path + ": " + e.message());
    }
  }

 private:
  json root_ = json::object();
  std::string source_ = "<config>";
  std::map<std::string, int> lines_;
};

struct RunConfig {
  pipeline::ReconstructionConfig reconstruction;
  std::string reference_dataset;
  std::string output = "out";
  // Geometry the reconstruction assumes instead of the dataset's own.
  std::optional<geometry::BoundaryGeometry> working_boundary;
  std::optional<geometry::PerturbMode> perturb_mode;
  double perturb_magnitude = 0;
  std::uint64_t seed = 0;
  std::optional<std::pair<double, double>> color_re, color_im;
  std::vector<std::pair<std::string, forward::Region>> regions;
};

RunConfig run_config(const Config& c);

struct SimulationScenario {
  geometry::ElectrodeLayout layout;
  forward::Phantom phantom;
  forward::CurrentPatternSet patterns;
  forward::SimulationOptions options;
  int truth_n = 64;
  double truth_extent = 1.05;
  std::string output = "out";
  std::string stem = "dataset";
};

SimulationScenario simulation_scenario(const Config& c);

// Canonical hash of a configuration (FNV-1a over the compact JSON dump).
std::string config_hash(const json& j);

// ---------------------------------------------------------------- images

// Planes are written with row j holding y = −extent + j·h and column i
// holding x = −extent + i·h (unit working frame).
void write_grid_csv(const fs::path& path, const Eigen::ArrayXXd& plane);
Eigen::ArrayXXd read_grid_csv(const fs::path& path);
void write_complex_csv(const fs::path& stem, const Eigen::ArrayXXcd& values);

struct ColorScale {
  double lo = 0, hi = 1;
};

// 8-bit PGM, gray = round(255·(v − lo)/(hi − lo)) clamped to [0, 255], top
// row = largest y. Pixels outside the domain mask are written as 0.
void write_pgm(const fs::path& path, const Eigen::ArrayXXd& plane, const std::vector<std::uint8_t>& mask,
               ColorScale scale);

struct ImageFiles {
  fs::path meta, re_csv, im_csv, re_pgm, im_pgm, sidecar;
};

// <stem>.json metadata, <stem>_re/_im.csv planes, <stem>_re/_im.pgm and the
// <stem>_pgm.json sidecar holding the gray mapping and color-scale bounds.
ImageFiles write_image(const fs::path& stem, const recovery::AdmittivityImage& image,
                       std::optional<ColorScale> re_scale = std::nullopt,
                       std::optional<ColorScale> im_scale = std::nullopt, const json& extra = json::object());
recovery::AdmittivityImage read_image(const fs::path& meta);

// Truth image: phantom sampled on the same unit-frame grid as reconstructions.
recovery::AdmittivityImage truth_image(const forward::Phantom& phantom, const geometry::BoundaryGeometry& boundary,
                                       int n, double extent);

void write_diagnostics_csv(const fs::path& path, const solver::CGOField& field);

// ---------------------------------------------------------------- metrics

struct Metrics {
  std::vector<evaluation::RegionStats> regions;
  std::vector<evaluation::RegionStats> truth;
  double dynamic_range = 0;
  double true_max = 0, true_min = 0;
  std::optional<double> rotation;
};

json metrics_to_json(const Metrics& m);
// Table rows: method,scenario,region,true_avg,avg,max,min (real parts) then
// the same for imaginary parts.
void write_metrics_csv(const fs::path& path, const Metrics& m, const std::string& method,
                       const std::string& scenario);

void write_json(const fs::path& path, const json& j);
json read_json(const fs::path& path);

}  // namespace dbar::io
