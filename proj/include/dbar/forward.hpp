#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "dbar/dnmap.hpp"
#include "dbar/frame.hpp"
#include "dbar/geometry.hpp"

namespace dbar::forward {

struct Ellipse {
  Complex center;
  double a = 0, b = 0;  // semi-axes, m
  double angle = 0;     // rad
  bool contains(Complex z) const;
};

struct Polygon {
  std::vector<Complex> vertices;
  bool contains(Complex z) const;
};

using Region = std::variant<Ellipse, Polygon>;

bool region_contains(const Region& region, Complex z);

struct Inclusion {
  Region region;
  Complex value;
  std::string name;
};

// Piecewise-constant admittivity. Later inclusions override earlier ones.
struct Phantom {
  Complex background{1.0, 0.0};
  std::vector<Inclusion> inclusions;

  Complex value_at(Complex z) const;
  bool is_real() const;
  void validate() const;

  static Phantom homogeneous(Complex value) { return Phantom{value, {}}; }
};

// Chest-like phantom: heart and two lungs as ellipses sized by the enclosing
// radius R. Inclusions are named heart, left_lung and right_lung.
Phantom heart_and_lungs(double R, Complex heart = 0.75, Complex lung = 0.24, Complex background = 0.424);

struct Mesh {
  struct BoundaryEdge {
    int a, b;
    int electrode;  // −1 for gap edges
  };
  std::vector<Complex> nodes;
  std::vector<std::array<int, 3>> triangles;
  std::vector<BoundaryEdge> boundary_edges;
  double element_size = 0;

  double min_angle_degrees() const;
  double electrode_length(int electrode) const;

  // Plain text: "nodes N", N lines "x y"; "triangles T", T lines "i j k";
  // "boundary_edges E", E lines "a b tag"; "element_size h".
  void write(std::ostream& os) const;
  static Mesh read(std::istream& is);
};

// Element size giving roughly `elements` triangles on the boundary's area.
double element_size_for(const geometry::BoundaryGeometry& boundary, int elements);

Mesh generate_mesh(const geometry::BoundaryGeometry& boundary,
                   const geometry::ElectrodeLayout& layout, double h);
// Longest-edge bisection towards the electrode ends, where the current density
// of a low-impedance electrode is singular. Angles drop to at most half of the
// input mesh's smallest angle.
void refine_electrode_ends(Mesh& mesh, const geometry::BoundaryGeometry& boundary,
                           const geometry::ElectrodeLayout& layout);

struct CemSolution {
  Eigen::VectorXcd electrode_voltages;
  Eigen::VectorXcd potential;
};

// Assembles and factorizes the CEM system once; solves for any number of
// current patterns. Solving is const and may run concurrently.
class CemSolver {
 public:
  CemSolver(const Mesh& mesh, const geometry::ElectrodeLayout& layout, const Phantom& phantom,
            double contact_impedance);
  ~CemSolver();
  CemSolver(CemSolver&&) noexcept;
  CemSolver& operator=(CemSolver&&) noexcept;

  CemSolution solve(const Eigen::VectorXd& currents) const;
  // Electrode voltages for every column of `currents`.
  Eigen::MatrixXcd electrode_voltages(const Eigen::MatrixXd& currents) const;
  // Current entering through each electrode, recomputed from a solution.
  Eigen::VectorXcd electrode_inflow(const CemSolution& sol) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

CemSolution solve_cem(const Mesh& mesh, const geometry::ElectrodeLayout& layout,
                      const Phantom& phantom, double contact_impedance,
                      const Eigen::VectorXd& pattern_column);

struct SimulationOptions {
  double contact_impedance = 2.4e-7;
  double mesh_size = 0;  // 0 selects about 4000 elements
  double noise_level = 0;
  bool refine_electrode_ends = true;
  std::uint64_t seed = 0;
  double frequency = 0;
  std::string label;
};

MeasurementFrame simulate_frame(const geometry::ElectrodeLayout& layout, const Phantom& phantom,
                                const CurrentPatternSet& patterns,
                                const SimulationOptions& options = {});

MeasurementFrame change_of_basis(const MeasurementFrame& frame, const CurrentPatternSet& target);

// Continuum ND eigenvalue of mode n on a disk of radius R0 for a radial
// conductivity profile. `breakpoints` lists radii where sigma may jump.
double radial_oracle(const std::function<double(double)>& sigma, std::span<const double> breakpoints,
                     int n, double R0);

// Number of mesh generations plus CEM factorizations performed so far.
std::uint64_t invocation_count() noexcept;

// Homogeneous (γ=1) CEM simulation on the frame's own layout and patterns,
// cached by geometry hash.
class CemReference final : public dnmap::ReferenceModel {
 public:
  explicit CemReference(double mesh_size = 0) : mesh_size_(mesh_size) {}
  Eigen::MatrixXcd normalized_voltages(const MeasurementFrame& frame) const override;
  MeasurementFrame frame(const MeasurementFrame& like) const;

 private:
  double mesh_size_;
};

}  // namespace dbar::forward
