#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "dbar/types.hpp"

namespace dbar::geometry {

enum class BoundaryPreset { circle, oval, chest, alternative, custom };

std::string_view to_string(BoundaryPreset p) noexcept;
BoundaryPreset parse_preset(std::string_view s);

// Star-shaped closed curve z(θ) = r(θ) e^{iθ}, with the radius given by a
// truncated Fourier series r(θ) = Re Σ_{n≥0} c_n e^{inθ}.
class BoundaryGeometry {
 public:
  static constexpr std::size_t max_coeffs = 32;

  // Unit circle.
  BoundaryGeometry() : BoundaryGeometry({Complex(1.0)}, BoundaryPreset::circle) {}
  explicit BoundaryGeometry(std::vector<Complex> coeffs,
                            BoundaryPreset preset = BoundaryPreset::custom);

  static BoundaryGeometry circle(double radius);
  // Semi-axes a along x and b along y, fitted by the leading Fourier modes of
  // the exact polar ellipse radius.
  static BoundaryGeometry oval(double a, double b);
  // Smooth chest-like cross-section, wider than deep, scaled to a perimeter
  // of 1.026 m.
  static BoundaryGeometry chest();
  // Mildly irregular near-circular curve standing in for a hand-traced outline.
  static BoundaryGeometry alternative(double radius = 0.15);

  double radius(double theta) const;
  double radius_derivative(double theta) const;
  Complex point(double theta) const;
  // dz/dθ
  Complex tangent_vector(double theta) const;

  double perimeter() const noexcept { return perimeter_; }
  double enclosing_radius() const noexcept { return r_enc_; }
  double area() const noexcept { return area_; }
  BoundaryPreset preset() const noexcept { return preset_; }
  std::span<const Complex> coeffs() const noexcept { return coeffs_; }

  // Arc length from θ=0 counter-clockwise to θ (θ is reduced mod 2π).
  double arc_length(double theta) const;
  // Inverse of arc_length on [0, P).
  double theta_at_arc(double s) const;

  // Point-in-domain test in physical coordinates.
  bool contains(Complex z) const;

  bool operator==(const BoundaryGeometry&) const = default;

 private:
  std::vector<Complex> coeffs_;
  BoundaryPreset preset_;
  double perimeter_ = 0;
  double r_enc_ = 0;
  double area_ = 0;
  std::vector<double> arc_table_;  // cumulative arc length on a uniform θ table
};

struct ElectrodeLayout {
  BoundaryGeometry boundary;
  std::vector<double> angles;    // rad
  std::vector<Complex> centers;  // m, on the boundary
  double width = 0;              // arc length, m
  double height = 0;             // tank height, m
  bool physical = true;

  int count() const noexcept { return static_cast<int>(angles.size()); }
  double area() const noexcept { return width * height; }
  // Boundary share of one electrode, (P/L)·height. This is the area that
  // converts electrode currents into the boundary current density seen by the
  // continuum model.
  double effective_area() const noexcept { return boundary.perimeter() / count() * height; }
  // Arc-length gaps between consecutive electrodes (gap ℓ sits after electrode ℓ).
  std::vector<double> gaps() const;

  bool operator==(const ElectrodeLayout&) const = default;
};

ElectrodeLayout place_electrodes(const BoundaryGeometry& boundary, int count, double width,
                                 double height, double offset = 0.0,
                                 bool require_physical = false);

// Same electrodes at new angles; centers and the physical flag are recomputed.
ElectrodeLayout with_angles(const ElectrodeLayout& layout, std::vector<double> angles);

// Same angles, width and height on another boundary curve.
ElectrodeLayout on_boundary(const ElectrodeLayout& layout, const BoundaryGeometry& boundary);

enum class PerturbMode { uniform_shift, noisy };

PerturbMode parse_perturb_mode(std::string_view s);

// uniform_shift adds `magnitude` to every angle; noisy adds i.i.d. uniform
// draws on [−magnitude, magnitude].
ElectrodeLayout perturb_angles(const ElectrodeLayout& layout, PerturbMode mode, double magnitude,
                               std::uint64_t seed);

struct NormalTangent {
  Complex normal;
  Complex tangent;
};

NormalTangent normal_tangent(const BoundaryGeometry& boundary, double theta, double eps = 1e-6);

}  // namespace dbar::geometry
