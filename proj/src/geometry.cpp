#include "dbar/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

namespace dbar::geometry {

namespace {

constexpr int table_size = 4096;
constexpr double two_pi = 2 * pi;

// 5-point Gauss-Legendre on [-1, 1].
constexpr std::array<double, 5> gl_x{-0.9061798459386640, -0.5384693101056831, 0.0,
                                     0.5384693101056831, 0.9061798459386640};
constexpr std::array<double, 5> gl_w{0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                     0.4786286704993665, 0.2369268850561891};

double wrap_angle(double theta) {
  double t = std::fmod(theta, two_pi);
  return t < 0 ? t + two_pi : t;
}

}  // namespace

std::string_view to_string(BoundaryPreset p) noexcept {
  switch (p) {
    case BoundaryPreset::circle: return "circle";
    case BoundaryPreset::oval: return "oval";
    case BoundaryPreset::chest: return "chest";
    case BoundaryPreset::alternative: return "alternative";
    case BoundaryPreset::custom: return "custom";
  }
  return "custom";
}

BoundaryPreset parse_preset(std::string_view s) {
  if (s == "circle") return BoundaryPreset::circle;
  if (s == "oval") return BoundaryPreset::oval;
  if (s == "chest") return BoundaryPreset::chest;
  if (s == "alternative") return BoundaryPreset::alternative;
  if (s == "custom") return BoundaryPreset::custom;
  throw Error(ErrorCode::Validation, "unknown boundary preset '" + std::string(s) + "'");
}

BoundaryGeometry::BoundaryGeometry(std::vector<Complex> coeffs, BoundaryPreset preset)
    : coeffs_(std::move(coeffs)), preset_(preset) {
  if (coeffs_.empty() || coeffs_.size() > max_coeffs)
    throw Error(ErrorCode::Validation, "boundary needs between 1 and 32 Fourier coefficients");

  const double dt = two_pi / table_size;
  double rmax = 0;
  int imax = 0;
  double area = 0;
  for (int i = 0; i < table_size; ++i) {
    double r = radius(i * dt);
    if (!(r > 0))
      throw Error(ErrorCode::NonPositiveRadius,
                  "r(theta) = " + std::to_string(r) + " at theta = " + std::to_string(i * dt));
    if (r > rmax) {
      rmax = r;
      imax = i;
    }
    area += 0.5 * r * r * dt;
  }
  area_ = area;

  // Golden-section refinement of the maximum radius around the best sample.
  double a = (imax - 1) * dt, b = (imax + 1) * dt;
  const double g = (std::sqrt(5.0) - 1) / 2;
  for (int it = 0; it < 80; ++it) {
    double c = b - g * (b - a), d = a + g * (b - a);
    if (radius(c) > radius(d))
      b = d;
    else
      a = c;
  }
  r_enc_ = std::max(rmax, radius(0.5 * (a + b)));

  arc_table_.assign(table_size + 1, 0.0);
  for (int i = 0; i < table_size; ++i) {
    double t0 = i * dt;
    double seg = 0;
    for (int q = 0; q < 5; ++q) seg += gl_w[q] * std::abs(tangent_vector(t0 + 0.5 * dt * (gl_x[q] + 1)));
    arc_table_[i + 1] = arc_table_[i] + 0.5 * dt * seg;
  }
  perimeter_ = arc_table_.back();
}

BoundaryGeometry BoundaryGeometry::circle(double radius) {
  if (!(radius > 0)) throw Error(ErrorCode::NonPositiveRadius, "circle radius must be positive");
  return BoundaryGeometry({Complex(radius, 0)}, BoundaryPreset::circle);
}

BoundaryGeometry BoundaryGeometry::oval(double a, double b) {
  if (!(a > 0 && b > 0)) throw Error(ErrorCode::NonPositiveRadius, "oval semi-axes must be positive");
  constexpr int n = 256;
  std::vector<double> samples(n);
  for (int j = 0; j < n; ++j) {
    double t = two_pi * j / n;
    double c = std::cos(t), s = std::sin(t);
    samples[j] = a * b / std::sqrt(b * b * c * c + a * a * s * s);
  }
  std::vector<Complex> coeffs(max_coeffs);
  for (std::size_t m = 0; m < max_coeffs; ++m) {
    Complex acc = 0;
    for (int j = 0; j < n; ++j) acc += samples[j] * std::polar(1.0, -two_pi * double(m * j) / n);
    coeffs[m] = (m == 0 ? 1.0 : 2.0) * acc / double(n);
  }
  return BoundaryGeometry(std::move(coeffs), BoundaryPreset::oval);
}

BoundaryGeometry BoundaryGeometry::chest() {
  // r(θ) ∝ 1 + 0.025 sinθ + 0.09 cos2θ − 0.01 sin3θ + 0.015 cos4θ
  std::vector<Complex> shape{{1.0, 0.0}, {0.0, -0.025}, {0.09, 0.0}, {0.0, 0.01}, {0.015, 0.0}};
  const double target = 1.026;
  double p = BoundaryGeometry(shape).perimeter();
  for (auto& c : shape) c *= target / p;
  return BoundaryGeometry(std::move(shape), BoundaryPreset::chest);
}

BoundaryGeometry BoundaryGeometry::alternative(double radius) {
  if (!(radius > 0)) throw Error(ErrorCode::NonPositiveRadius, "radius must be positive");
  std::vector<Complex> shape{{1.0, 0.0}, {0.0, -0.01}, {0.03, 0.0}, {0.0, 0.02}, {0.0, 0.0},
                             {-0.015, 0.0}};
  for (auto& c : shape) c *= radius;
  return BoundaryGeometry(std::move(shape), BoundaryPreset::alternative);
}

double BoundaryGeometry::radius(double theta) const {
  double r = 0;
  for (std::size_t n = 0; n < coeffs_.size(); ++n)
    r += coeffs_[n].real() * std::cos(n * theta) - coeffs_[n].imag() * std::sin(n * theta);
  return r;
}

double BoundaryGeometry::radius_derivative(double theta) const {
  double d = 0;
  for (std::size_t n = 1; n < coeffs_.size(); ++n)
    d += -double(n) * (coeffs_[n].real() * std::sin(n * theta) + coeffs_[n].imag() * std::cos(n * theta));
  return d;
}

Complex BoundaryGeometry::point(double theta) const { return std::polar(radius(theta), theta); }

Complex BoundaryGeometry::tangent_vector(double theta) const {
  Complex e = std::polar(1.0, theta);
  return (radius_derivative(theta) + I * radius(theta)) * e;
}

double BoundaryGeometry::arc_length(double theta) const {
  double t = wrap_angle(theta);
  const double dt = two_pi / table_size;
  int i = std::min(static_cast<int>(t / dt), table_size - 1);
  double t0 = i * dt, h = t - t0;
  double seg = 0;
  for (int q = 0; q < 5; ++q) seg += gl_w[q] * std::abs(tangent_vector(t0 + 0.5 * h * (gl_x[q] + 1)));
  return arc_table_[i] + 0.5 * h * seg;
}

double BoundaryGeometry::theta_at_arc(double s) const {
  s = std::fmod(s, perimeter_);
  if (s < 0) s += perimeter_;
  auto it = std::upper_bound(arc_table_.begin(), arc_table_.end(), s);
  int i = std::clamp(static_cast<int>(it - arc_table_.begin()) - 1, 0, table_size - 1);
  const double dt = two_pi / table_size;
  double lo = i * dt, hi = (i + 1) * dt;
  double t = lo + dt * (s - arc_table_[i]) / (arc_table_[i + 1] - arc_table_[i]);
  for (int it2 = 0; it2 < 30; ++it2) {
    double h = t - lo, seg = 0;
    for (int q = 0; q < 5; ++q) seg += gl_w[q] * std::abs(tangent_vector(lo + 0.5 * h * (gl_x[q] + 1)));
    double f = arc_table_[i] + 0.5 * h * seg - s;
    double step = f / std::abs(tangent_vector(t));
    t = std::clamp(t - step, lo, hi);
    if (std::abs(step) < 1e-15) break;
  }
  return t;
}

bool BoundaryGeometry::contains(Complex z) const {
  if (std::abs(z) == 0) return true;
  return std::abs(z) < radius(std::arg(z));
}

std::vector<double> ElectrodeLayout::gaps() const {
  const int L = count();
  std::vector<double> s(L);
  for (int l = 0; l < L; ++l) s[l] = boundary.arc_length(angles[l]);
  std::vector<int> order(L);
  for (int l = 0; l < L; ++l) order[l] = l;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return s[a] < s[b]; });
  std::vector<double> g(L);
  const double P = boundary.perimeter();
  for (int j = 0; j < L; ++j) {
    double next = j + 1 < L ? s[order[j + 1]] : s[order[0]] + P;
    g[order[j]] = next - s[order[j]] - width;
  }
  return g;
}

namespace {

ElectrodeLayout build_layout(const BoundaryGeometry& boundary, std::vector<double> angles,
                             double width, double height) {
  ElectrodeLayout layout{boundary, std::move(angles), {}, width, height, true};
  layout.centers.reserve(layout.angles.size());
  for (double t : layout.angles) layout.centers.push_back(boundary.point(t));
  auto g = layout.gaps();
  layout.physical = std::all_of(g.begin(), g.end(), [](double x) { return x > 0; });
  return layout;
}

}  // namespace

ElectrodeLayout place_electrodes(const BoundaryGeometry& boundary, int count, double width,
                                 double height, double offset, bool require_physical) {
  if (count <= 0 || count % 2 != 0)
    throw Error(ErrorCode::OddElectrodeCount, "electrode count must be positive and even, got " +
                                                  std::to_string(count));
  if (!(width > 0) || !(height > 0))
    throw Error(ErrorCode::Validation, "electrode width and height must be positive");
  if (width * count > boundary.perimeter())
    throw Error(ErrorCode::ElectrodesOverlap, "total electrode width exceeds the perimeter");
  std::vector<double> angles(count);
  for (int l = 0; l < count; ++l) angles[l] = offset + two_pi * l / count;
  auto layout = build_layout(boundary, std::move(angles), width, height);
  if (require_physical && !layout.physical)
    throw Error(ErrorCode::ElectrodesOverlap, "electrodes overlap in arc length");
  return layout;
}

ElectrodeLayout with_angles(const ElectrodeLayout& layout, std::vector<double> angles) {
  return build_layout(layout.boundary, std::move(angles), layout.width, layout.height);
}

ElectrodeLayout on_boundary(const ElectrodeLayout& layout, const BoundaryGeometry& boundary) {
  return build_layout(boundary, layout.angles, layout.width, layout.height);
}

PerturbMode parse_perturb_mode(std::string_view s) {
  if (s == "uniform_shift") return PerturbMode::uniform_shift;
  if (s == "noisy") return PerturbMode::noisy;
  throw Error(ErrorCode::Validation, "unknown perturbation mode '" + std::string(s) + "'");
}

ElectrodeLayout perturb_angles(const ElectrodeLayout& layout, PerturbMode mode, double magnitude,
                               std::uint64_t seed) {
  if (!(magnitude >= 0)) throw Error(ErrorCode::Validation, "perturbation magnitude must be >= 0");
  if (magnitude == 0) return layout;
  std::vector<double> angles = layout.angles;
  if (mode == PerturbMode::uniform_shift) {
    for (double& t : angles) t += magnitude;
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-magnitude, magnitude);
    for (double& t : angles) t += dist(rng);
  }
  return with_angles(layout, std::move(angles));
}

NormalTangent normal_tangent(const BoundaryGeometry& boundary, double theta, double eps) {
  if (!(eps > 0)) throw Error(ErrorCode::DegenerateStep, "step must be positive");
  Complex d = boundary.point(theta + eps) - boundary.point(theta);
  double len = std::abs(d);
  if (len < 1e-300) throw Error(ErrorCode::DegenerateStep, "forward difference vanished");
  Complex tau = d / len;
  return {Complex(tau.imag(), -tau.real()), tau};
}

}  // namespace dbar::geometry
