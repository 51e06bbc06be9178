#pragma once

// Causal linear convolution truncated to the input length:
//   y[k] = sum_{l=0}^{k} kernel[l] * x[k - l],   k = 0..L-1
// FFT route pads both operands to the next power of two >= 2L-1 so the
// circular product never wraps. The naive route is the O(L^2) reference.

#include <fftw3.h>

#include <bit>
#include <cstddef>
#include <map>
#include <mutex>
#include <span>
#include <vector>

#include "sts/error.hpp"
#include "sts/grid.hpp"

namespace sts {

inline std::size_t fft_size_for(std::size_t length) {
  if (length == 0) return 0;
  return std::bit_ceil(2 * length - 1);
}

namespace detail {

// FFTW planning is not thread-safe; execution with the new-array interface is.
class FftPlanCache {
 public:
  struct Plans {
    fftw_plan forward;
    fftw_plan inverse;
  };

  static FftPlanCache& instance() {
    static FftPlanCache cache;
    return cache;
  }

  Plans get(std::size_t size) {
    std::lock_guard lock(mutex_);
    if (auto it = plans_.find(size); it != plans_.end()) return it->second;
    const int n = static_cast<int>(size);
    double* real = fftw_alloc_real(size);
    fftw_complex* spec = fftw_alloc_complex(size / 2 + 1);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    Plans p{fftw_plan_dft_r2c_1d(n, real, spec, flags), fftw_plan_dft_c2r_1d(n, spec, real, flags)};
    fftw_free(real);
    fftw_free(spec);
    plans_.emplace(size, p);
    return p;
  }

  FftPlanCache(const FftPlanCache&) = delete;
  FftPlanCache& operator=(const FftPlanCache&) = delete;

 private:
  FftPlanCache() = default;
  ~FftPlanCache() {
    for (auto& [size, p] : plans_) {
      fftw_destroy_plan(p.forward);
      fftw_destroy_plan(p.inverse);
    }
  }

  std::mutex mutex_;
  std::map<std::size_t, Plans> plans_;
};

inline fftw_complex* as_fftw(cplx* p) { return reinterpret_cast<fftw_complex*>(p); }

}  // namespace detail

inline void conv_causal_naive(std::span<const double> kernel, std::span<const double> x, std::span<double> y) {
  if (kernel.size() != x.size() || y.size() != x.size()) throw ContractError("conv_causal_naive: length mismatch");
  for (std::size_t k = 0; k < x.size(); ++k) {
    double acc = 0.0;
    for (std::size_t l = 0; l <= k; ++l) acc += kernel[l] * x[k - l];
    y[k] = acc;
  }
}

inline void conv_causal_fft(std::span<const double> kernel, std::span<const double> x, std::span<double> y) {
  if (kernel.size() != x.size() || y.size() != x.size()) throw ContractError("conv_causal_fft: length mismatch");
  const std::size_t L = x.size();
  if (L == 0) return;
  const std::size_t P = fft_size_for(L);
  const auto plans = detail::FftPlanCache::instance().get(P);

  std::vector<double> buf(P, 0.0);
  std::vector<cplx> kspec(P / 2 + 1), xspec(P / 2 + 1);
  std::copy(kernel.begin(), kernel.end(), buf.begin());
  fftw_execute_dft_r2c(plans.forward, buf.data(), detail::as_fftw(kspec.data()));
  std::fill(buf.begin(), buf.end(), 0.0);
  std::copy(x.begin(), x.end(), buf.begin());
  fftw_execute_dft_r2c(plans.forward, buf.data(), detail::as_fftw(xspec.data()));
  for (std::size_t i = 0; i < xspec.size(); ++i) xspec[i] = cmul(xspec[i], kspec[i]);
  fftw_execute_dft_c2r(plans.inverse, detail::as_fftw(xspec.data()), buf.data());
  const double scale = 1.0 / static_cast<double>(P);
  for (std::size_t k = 0; k < L; ++k) y[k] = buf[k] * scale;
}

// Row-wise versions over [H, L] grids.
inline Grid<double> conv_causal_naive(const Grid<double>& kernel, const Grid<double>& x) {
  if (kernel.rows() != x.rows() || kernel.cols() != x.cols()) throw ContractError("conv_causal_naive: shape mismatch");
  Grid<double> y(x.rows(), x.cols());
  for (std::size_t h = 0; h < x.rows(); ++h) conv_causal_naive(kernel.row(h), x.row(h), y.row(h));
  return y;
}

inline Grid<double> conv_causal_fft(const Grid<double>& kernel, const Grid<double>& x) {
  if (kernel.rows() != x.rows() || kernel.cols() != x.cols()) throw ContractError("conv_causal_fft: shape mismatch");
  Grid<double> y(x.rows(), x.cols());
  for (std::size_t h = 0; h < x.rows(); ++h) conv_causal_fft(kernel.row(h), x.row(h), y.row(h));
  return y;
}

}  // namespace sts
