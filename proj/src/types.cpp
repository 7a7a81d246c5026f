#include "dbar/types.hpp"

namespace dbar {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonPositiveRadius: return "NonPositiveRadius";
    case ErrorCode::ElectrodesOverlap: return "ElectrodesOverlap";
    case ErrorCode::DegenerateStep: return "DegenerateStep";
    case ErrorCode::OddElectrodeCount: return "OddElectrodeCount";
    case ErrorCode::MeshFailure: return "MeshFailure";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::RankDeficientPatterns: return "RankDeficientPatterns";
    case ErrorCode::ODESolverFailure: return "ODESolverFailure";
    case ErrorCode::ZeroPattern: return "ZeroPattern";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::NonPositiveEstimate: return "NonPositiveEstimate";
    case ErrorCode::ScalingMismatch: return "ScalingMismatch";
    case ErrorCode::ZeroK: return "ZeroK";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::DenominatorUnderflow: return "DenominatorUnderflow";
    case ErrorCode::EmptyRegion: return "EmptyRegion";
    case ErrorCode::DegenerateTruth: return "DegenerateTruth";
    case ErrorCode::FlatImage: return "FlatImage";
    case ErrorCode::RealMethodComplexData: return "RealMethodComplexData";
    case ErrorCode::Validation: return "Validation";
  }
  return "Unknown";
}

bool Error::is_validation() const noexcept {
  switch (code_) {
    case ErrorCode::Validation:
    case ErrorCode::OddElectrodeCount:
    case ErrorCode::ElectrodesOverlap:
    case ErrorCode::NonPositiveRadius:
    case ErrorCode::RealMethodComplexData:
    case ErrorCode::ZeroPattern:
    case ErrorCode::RankDeficientPatterns:
    case ErrorCode::GridMismatch:
    case ErrorCode::EmptyRegion:
    case ErrorCode::DegenerateTruth:
      return true;
    default:
      return false;
  }
}

std::string_view to_string(ImagingMode m) noexcept {
  return m == ImagingMode::absolute ? "absolute" : "difference";
}

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::texp: return "texp";
    case Method::approach1: return "approach1";
    case Method::approach2: return "approach2";
  }
  return "unknown";
}

ImagingMode parse_mode(std::string_view s) {
  if (s == "absolute") return ImagingMode::absolute;
  if (s == "difference") return ImagingMode::difference;
  throw Error(ErrorCode::Validation, "unknown mode '" + std::string(s) + "' (expected absolute|difference)");
}

Method parse_method(std::string_view s) {
  if (s == "texp") return Method::texp;
  if (s == "approach1") return Method::approach1;
  if (s == "approach2") return Method::approach2;
  throw Error(ErrorCode::Validation,
              "unknown method '" + std::string(s) + "' (expected texp|approach1|approach2)");
}

}  // namespace dbar
