#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "dbar/io.hpp"
#include "dbar/pipeline.hpp"

namespace dbar::commands {

namespace fs = std::filesystem;

// Command-line level inputs. Flags override the matching config keys.
struct CommandOptions {
  std::string config;
  std::string dataset;
  std::string reference;
  std::string out;
  std::string image;
  std::string truth;
  std::string compare;
  std::optional<std::string> method;
  std::optional<std::string> mode;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

struct SimulateResult {
  fs::path dataset, truth, manifest;
  forward::MeasurementFrame frame;
};

struct ReconstructResult {
  fs::path image, diagnostics, manifest;
  pipeline::Reconstruction reconstruction;
};

struct EvaluateResult {
  fs::path report, table, manifest;
  io::Metrics metrics;
};

// Writes <stem>.json (dataset), <stem>_truth.* (truth image) and
// <stem>_manifest.json into the output directory.
SimulateResult cmd_simulate(const CommandOptions& opts);
// Writes image.*, diagnostics.csv, scattering planes and manifest.json.
ReconstructResult cmd_reconstruct(const CommandOptions& opts);
// Writes metrics.json, metrics.csv and manifest.json.
EvaluateResult cmd_evaluate(const CommandOptions& opts);

// Exit code for an exception escaping a command: 2 validation, 3 numerical.
int exit_code(const std::exception& e) noexcept;

}  // namespace dbar::commands
