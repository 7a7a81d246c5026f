#pragma once

#include <cstdint>
#include <vector>

#include "dbar/geometry.hpp"

namespace dbar::recovery {

// n×n nodes on [−extent, extent]² in the unit working frame (physical
// coordinates divided by r). Arrays are indexed (ix, iy), flattened ix + n·iy.
struct ZGrid {
  int n = 64;
  double extent = 1.05;
  std::vector<std::uint8_t> mask;

  double step() const noexcept { return 2 * extent / (n - 1); }
  Complex point(int ix, int iy) const noexcept { return {-extent + ix * step(), -extent + iy * step()}; }
  bool inside(int ix, int iy) const noexcept { return mask[ix + n * iy] != 0; }
  int masked_count() const;

  // Mask nodes whose physical position z·r lies inside the boundary.
  static ZGrid make(int n, double extent, const geometry::BoundaryGeometry& boundary, double r);
  static ZGrid unmasked(int n, double extent);

  bool operator==(const ZGrid&) const = default;
};

}  // namespace dbar::recovery
