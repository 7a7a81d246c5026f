#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace dbar {

using Complex = std::complex<double>;
inline constexpr double pi = 3.14159265358979323846;
inline constexpr Complex I{0.0, 1.0};

enum class ErrorCode {
  NonPositiveRadius,
  ElectrodesOverlap,
  DegenerateStep,
  OddElectrodeCount,
  MeshFailure,
  SingularSystem,
  NonConvergence,
  RankDeficientPatterns,
  ODESolverFailure,
  ZeroPattern,
  IllConditioned,
  NonPositiveEstimate,
  ScalingMismatch,
  ZeroK,
  GridMismatch,
  DenominatorUnderflow,
  EmptyRegion,
  DegenerateTruth,
  FlatImage,
  RealMethodComplexData,
  Validation,
};

std::string_view to_string(ErrorCode code) noexcept;

// Numerical and validation failures. The code is stable and machine readable,
// the message carries context.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), message_(what) {}

  ErrorCode code() const noexcept { return code_; }
  // Context message without the code prefix, for rethrowing with more context.
  const std::string& message() const noexcept { return message_; }

  // Validation-type failures map to CLI exit code 2, everything else to 3.
  bool is_validation() const noexcept;

 private:
  ErrorCode code_;
  std::string message_;
};

enum class ImagingMode { absolute, difference };
enum class Method { texp, approach1, approach2 };

std::string_view to_string(ImagingMode m) noexcept;
std::string_view to_string(Method m) noexcept;
ImagingMode parse_mode(std::string_view s);
Method parse_method(std::string_view s);

}  // namespace dbar
