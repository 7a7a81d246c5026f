#include "dbar/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>
#include <vector>

namespace dbar::solver {

namespace {

// Planning is not thread safe in FFTW; execution on new arrays is.
std::mutex g_plan_mutex;

fftw_complex* as_fftw(Complex* p) { return reinterpret_cast<fftw_complex*>(p); }

}  // namespace

struct CauchyConvolution::Impl {
  int n = 0, m = 0;  // grid size and transform size
  double h = 0;
  std::vector<Complex> kernel_hat;  // h² · FFT(K) / m²
  fftw_plan forward = nullptr, backward = nullptr;

  ~Impl() {
    std::lock_guard lock(g_plan_mutex);
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
  }
};

CauchyConvolution::CauchyConvolution(int n, double h, Kernel kernel, bool linear)
    : impl_(std::make_unique<Impl>()) {
  if (n < 1 || !(h > 0)) throw Error(ErrorCode::GridMismatch, "convolution grid must be non-empty with h > 0");
  auto& d = *impl_;
  d.n = n;
  d.h = h;
  d.m = linear ? 2 * n : n;
  const int m = d.m;
  std::vector<Complex> a(static_cast<std::size_t>(m) * m), b(a.size());
  {
    std::lock_guard lock(g_plan_mutex);
    // Column-major (ix fastest) storage is row-major with dimensions (iy, ix).
    d.forward = fftw_plan_dft_2d(m, m, as_fftw(a.data()), as_fftw(b.data()), FFTW_FORWARD,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
    d.backward = fftw_plan_dft_2d(m, m, as_fftw(a.data()), as_fftw(b.data()), FFTW_BACKWARD,
                                  FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  if (!d.forward || !d.backward) throw Error(ErrorCode::GridMismatch, "FFT planning failed");

  // Kernel offsets: circular case wraps indices into [−⌊n/2⌋, ⌈n/2⌉−1];
  // linear case places offsets |d| ≤ n−1 into the 2n periodic layout.
  auto offset = [&](int i) {
    if (linear) return i < n ? i : i - m;
    return i <= (n - 1) / 2 ? i : i - n;
  };
  std::fill(a.begin(), a.end(), Complex(0));
  for (int iy = 0; iy < m; ++iy)
    for (int ix = 0; ix < m; ++ix) {
      int dx = offset(ix), dy = offset(iy);
      if (linear && (ix == n || iy == n)) continue;
      if (dx == 0 && dy == 0) continue;
      Complex dk(dx * h, dy * h);
      Complex val = kernel == Kernel::inv_pi_zbar ? 1.0 / (pi * std::conj(dk)) : 1.0 / (pi * dk);
      a[static_cast<std::size_t>(iy) * m + ix] = val;
    }
  fftw_execute_dft(d.forward, as_fftw(a.data()), as_fftw(b.data()));
  const double scale = h * h / (double(m) * m);
  d.kernel_hat.resize(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) d.kernel_hat[i] = b[i] * scale;
}

CauchyConvolution::~CauchyConvolution() = default;
CauchyConvolution::CauchyConvolution(CauchyConvolution&&) noexcept = default;
CauchyConvolution& CauchyConvolution::operator=(CauchyConvolution&&) noexcept = default;

int CauchyConvolution::size() const noexcept { return impl_->n; }
double CauchyConvolution::step() const noexcept { return impl_->h; }

void CauchyConvolution::apply(const Complex* in, Complex* out) const {
  const auto& d = *impl_;
  const int n = d.n, m = d.m;
  const std::size_t nn = static_cast<std::size_t>(n) * n;
  if (std::all_of(in, in + nn, [](Complex v) { return v == Complex(0); })) {
    std::fill(out, out + nn, Complex(0));
    return;
  }
  std::vector<Complex> a(static_cast<std::size_t>(m) * m, Complex(0)), b(a.size());
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) a[static_cast<std::size_t>(iy) * m + ix] = in[iy * n + ix];
  fftw_execute_dft(d.forward, as_fftw(a.data()), as_fftw(b.data()));
  for (std::size_t i = 0; i < b.size(); ++i) b[i] *= d.kernel_hat[i];
  fftw_execute_dft(d.backward, as_fftw(b.data()), as_fftw(a.data()));
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) out[iy * n + ix] = a[static_cast<std::size_t>(iy) * m + ix];
}

Eigen::ArrayXXcd CauchyConvolution::apply(const Eigen::ArrayXXcd& f) const {
  const int n = impl_->n;
  if (f.rows() != n || f.cols() != n)
    throw Error(ErrorCode::GridMismatch, "input grid is " + std::to_string(f.rows()) + "x" +
                                             std::to_string(f.cols()) + ", expected " + std::to_string(n));
  Eigen::ArrayXXcd out(n, n);
  apply(f.data(), out.data());
  return out;
}

}  // namespace dbar::solver
