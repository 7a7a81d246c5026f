#pragma once

#include <map>
#include <string>

#include <Eigen/Dense>

#include "dbar/geometry.hpp"

namespace dbar::forward {

enum class PatternBasis { trig, adjacent, custom };

std::string_view to_string(PatternBasis b) noexcept;
PatternBasis parse_basis(std::string_view s);

// L × (L−1) applied electrode currents (A), one pattern per column.
struct CurrentPatternSet {
  Eigen::MatrixXd matrix;
  double amplitude = 1.0;
  PatternBasis basis = PatternBasis::custom;

  int electrodes() const noexcept { return static_cast<int>(matrix.rows()); }
  int count() const noexcept { return static_cast<int>(matrix.cols()); }
  bool operator==(const CurrentPatternSet& o) const {
    return amplitude == o.amplitude && basis == o.basis && matrix == o.matrix;
  }
};

CurrentPatternSet trig_patterns(int electrodes, double amplitude);
CurrentPatternSet adjacent_patterns(int electrodes, double amplitude);

struct MeasurementFrame {
  CurrentPatternSet patterns;
  Eigen::MatrixXcd voltages;  // L × (L−1), V
  double frequency = 0.0;     // rad/s
  geometry::ElectrodeLayout layout;
  double contact_impedance = 2.4e-7;  // Ω·m²
  std::string label;
  std::map<std::string, std::string> provenance;

  int electrodes() const noexcept { return static_cast<int>(voltages.rows()); }
  // True when every voltage has |Im| <= tol·max|V|.
  bool is_real(double tol = 1e-12) const;
  void validate() const;
  bool operator==(const MeasurementFrame&) const = default;
};

}  // namespace dbar::forward
