#pragma once

#include <span>
#include <string>
#include <vector>

#include "dbar/forward.hpp"
#include "dbar/recovery.hpp"

namespace dbar::evaluation {

struct RegionMask {
  std::string name;
  std::vector<int> pixels;  // flattened ix + n·iy
};

// Pixels of the image grid whose physical position (unit-frame point · r)
// lies in `shape` and inside the domain mask.
RegionMask make_region(std::string name, const forward::Region& shape, const recovery::ZGrid& grid, double r);

// One region per named phantom inclusion (visible part only) plus
// "background" for the remaining domain pixels.
std::vector<RegionMask> phantom_regions(const forward::Phantom& phantom, const recovery::ZGrid& grid, double r);

struct PartStats {
  double avg = 0, max = 0, min = 0;
};

struct RegionStats {
  std::string name;
  PartStats re, im;
  int pixels = 0;
};

std::vector<RegionStats> region_stats(const recovery::AdmittivityImage& image, std::span<const RegionMask> masks);

// Percentage (recon_max − recon_min)/(true_max − true_min)·100 with recon
// extrema over the valid masked pixels of the real part.
double dynamic_range(const recovery::AdmittivityImage& image, double true_max, double true_min);
double dynamic_range(double recon_max, double recon_min, double true_max, double true_min);

// Angle α ∈ (−π, π] maximizing the polar cross-correlation of the real parts,
// in steps of 2π/256; b ≈ a rotated counter-clockwise by α.
double rotation_estimate(const recovery::AdmittivityImage& a, const recovery::AdmittivityImage& b);

// Image content rotated counter-clockwise by `angle` (bilinear resampling).
recovery::AdmittivityImage rotate_image(const recovery::AdmittivityImage& image, double angle);

}  // namespace dbar::evaluation
