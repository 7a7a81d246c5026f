#include "dbar/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dbar::evaluation {

RegionMask make_region(std::string name, const forward::Region& shape, const recovery::ZGrid& grid, double r) {
  RegionMask m{std::move(name), {}};
  for (int iy = 0; iy < grid.n; ++iy)
    for (int ix = 0; ix < grid.n; ++ix)
      if (grid.inside(ix, iy) && forward::region_contains(shape, grid.point(ix, iy) * r))
        m.pixels.push_back(ix + grid.n * iy);
  if (m.pixels.empty()) throw Error(ErrorCode::EmptyRegion, "region '" + m.name + "' covers no pixels");
  return m;
}

std::vector<RegionMask> phantom_regions(const forward::Phantom& phantom, const recovery::ZGrid& grid, double r) {
  const int k = static_cast<int>(phantom.inclusions.size());
  std::vector<RegionMask> out(k + 1);
  for (int i = 0; i < k; ++i)
    out[i].name = phantom.inclusions[i].name.empty() ? "inclusion" + std::to_string(i) : phantom.inclusions[i].name;
  out[k].name = "background";
  for (int iy = 0; iy < grid.n; ++iy)
    for (int ix = 0; ix < grid.n; ++ix) {
      if (!grid.inside(ix, iy)) continue;
      const Complex z = grid.point(ix, iy) * r;
      int owner = k;
      for (int i = 0; i < k; ++i)
        if (forward::region_contains(phantom.inclusions[i].region, z)) owner = i;
      out[owner].pixels.push_back(ix + grid.n * iy);
    }
  for (const auto& m : out)
    if (m.pixels.empty()) throw Error(ErrorCode::EmptyRegion, "region '" + m.name + "' covers no pixels");
  return out;
}

std::vector<RegionStats> region_stats(const recovery::AdmittivityImage& image, std::span<const RegionMask> masks) {
  std::vector<RegionStats> out;
  const int nn = image.grid.n * image.grid.n;
  for (const auto& mask : masks) {
    RegionStats s;
    s.name = mask.name;
    double sr = 0, si = 0;
    s.re = {0, -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    s.im = s.re;
    for (int p : mask.pixels) {
      if (p < 0 || p >= nn) throw Error(ErrorCode::GridMismatch, "region pixel outside the image grid");
      if (!image.valid.empty() && !image.valid[p]) continue;
      Complex v = image.values(p);
      sr += v.real();
      si += v.imag();
      s.re.max = std::max(s.re.max, v.real());
      s.re.min = std::min(s.re.min, v.real());
      s.im.max = std::max(s.im.max, v.imag());
      s.im.min = std::min(s.im.min, v.imag());
      ++s.pixels;
    }
    if (s.pixels == 0) throw Error(ErrorCode::EmptyRegion, "region '" + mask.name + "' has no valid pixels");
    s.re.avg = sr / s.pixels;
    s.im.avg = si / s.pixels;
    out.push_back(s);
  }
  return out;
}

double dynamic_range(double recon_max, double recon_min, double true_max, double true_min) {
  if (!(true_max > true_min)) throw Error(ErrorCode::DegenerateTruth, "true_max must exceed true_min");
  return (recon_max - recon_min) / (true_max - true_min) * 100.0;
}

double dynamic_range(const recovery::AdmittivityImage& image, double true_max, double true_min) {
  if (!(true_max > true_min)) throw Error(ErrorCode::DegenerateTruth, "true_max must exceed true_min");
  double hi = -std::numeric_limits<double>::infinity(), lo = std::numeric_limits<double>::infinity();
  const int n = image.grid.n;
  for (int i = 0; i < n * n; ++i) {
    if (!image.grid.mask[i] || (!image.valid.empty() && !image.valid[i])) continue;
    hi = std::max(hi, image.values(i).real());
    lo = std::min(lo, image.values(i).real());
  }
  if (!(hi >= lo)) throw Error(ErrorCode::EmptyRegion, "image has no valid pixels");
  return dynamic_range(hi, lo, true_max, true_min);
}

namespace {

// Bilinear sample of the real part; NaN outside the valid domain.
Complex sample(const recovery::AdmittivityImage& img, Complex z) {
  const auto& g = img.grid;
  const double h = g.step();
  double fx = (z.real() + g.extent) / h, fy = (z.imag() + g.extent) / h;
  int ix = static_cast<int>(std::floor(fx)), iy = static_cast<int>(std::floor(fy));
  if (ix < 0 || iy < 0 || ix + 1 >= g.n || iy + 1 >= g.n) return {NAN, NAN};
  double tx = fx - ix, ty = fy - iy;
  Complex acc = 0;
  double wsum = 0;
  for (int dy = 0; dy < 2; ++dy)
    for (int dx = 0; dx < 2; ++dx) {
      int i = ix + dx + g.n * (iy + dy);
      if (!g.mask[i] || (!img.valid.empty() && !img.valid[i])) continue;
      double w = (dx ? tx : 1 - tx) * (dy ? ty : 1 - ty);
      acc += w * img.values(i);
      wsum += w;
    }
  if (wsum < 0.5) return {NAN, NAN};
  return acc / wsum;
}

}  // namespace

double rotation_estimate(const recovery::AdmittivityImage& a, const recovery::AdmittivityImage& b) {
  if (a.grid.n != b.grid.n || a.grid.extent != b.grid.extent || a.grid.mask != b.grid.mask)
    throw Error(ErrorCode::GridMismatch, "images live on different grids");
  constexpr int bins = 256, rings = 24;
  // Largest radius whose full circle stays in the domain mask.
  const auto& g = a.grid;
  double rmax = g.extent;
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix)
      if (!g.inside(ix, iy)) rmax = std::min(rmax, std::abs(g.point(ix, iy)));
  rmax -= 1.5 * g.step();
  if (!(rmax > 2 * g.step())) throw Error(ErrorCode::FlatImage, "domain too small for polar sampling");

  std::vector<double> pa(static_cast<std::size_t>(rings) * bins), pb(pa.size());
  double var_a = 0, var_b = 0;
  for (int j = 0; j < rings; ++j) {
    double rho = (j + 0.5) / rings * rmax;
    double ma = 0, mb = 0;
    for (int t = 0; t < bins; ++t) {
      Complex z = std::polar(rho, 2 * pi * t / bins);
      Complex va = sample(a, z), vb = sample(b, z);
      pa[j * bins + t] = std::isnan(va.real()) ? 0 : va.real();
      pb[j * bins + t] = std::isnan(vb.real()) ? 0 : vb.real();
      ma += pa[j * bins + t];
      mb += pb[j * bins + t];
    }
    ma /= bins;
    mb /= bins;
    for (int t = 0; t < bins; ++t) {
      pa[j * bins + t] = (pa[j * bins + t] - ma) * std::sqrt(rho);
      pb[j * bins + t] = (pb[j * bins + t] - mb) * std::sqrt(rho);
      var_a += pa[j * bins + t] * pa[j * bins + t];
      var_b += pb[j * bins + t] * pb[j * bins + t];
    }
  }
  if (!(var_a > 1e-24) || !(var_b > 1e-24)) throw Error(ErrorCode::FlatImage, "no angular contrast to correlate");

  int best = 0;
  double best_c = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < bins; ++s) {
    double c = 0;
    for (int j = 0; j < rings; ++j)
      for (int t = 0; t < bins; ++t) c += pa[j * bins + t] * pb[j * bins + (t + s) % bins];
    if (c > best_c) best_c = c, best = s;
  }
  int signed_shift = best > bins / 2 ? best - bins : best;
  return 2 * pi * signed_shift / bins;
}

recovery::AdmittivityImage rotate_image(const recovery::AdmittivityImage& image, double angle) {
  recovery::AdmittivityImage out = image;
  const auto& g = image.grid;
  const Complex baseline = image.mode == ImagingMode::absolute ? image.gamma0 : Complex(0);
  const Complex back = std::polar(1.0, -angle);
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) {
      if (!g.inside(ix, iy)) continue;
      Complex v = sample(image, g.point(ix, iy) * back);
      out.values(ix, iy) = std::isnan(v.real()) ? baseline : v;
    }
  if (!out.valid.empty())
    for (int i = 0; i < g.n * g.n; ++i) out.valid[i] = g.mask[i];
  return out;
}

}  // namespace dbar::evaluation
