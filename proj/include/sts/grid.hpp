#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "sts/error.hpp"

namespace sts {

using cplx = std::complex<double>;

// Row-major 2-D array. Rows are channels throughout this library.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<T> flat() { return data_; }
  std::span<const T> flat() const { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

// Plain component-wise complex arithmetic. std::complex operator* routes
// through the Annex G NaN-recovery path, which is slower and obscures the
// exact operation order the step/scan bit-equality relies on.
inline cplx cmul(cplx a, cplx b) noexcept {
  return {a.real() * b.real() - a.imag() * b.imag(),
          a.real() * b.imag() + a.imag() * b.real()};
}

// Re(a * b) without forming the imaginary part.
inline double cmul_re(cplx a, cplx b) noexcept {
  return a.real() * b.real() - a.imag() * b.imag();
}

inline cplx cscale(cplx a, double s) noexcept { return {a.real() * s, a.imag() * s}; }

inline bool is_finite(cplx z) noexcept { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

// max |a - b| / max |b|, the normalization used for every tolerance check.
// Falls back to the absolute error when the reference is identically zero.
template <typename T>
double max_relative_error(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) throw ContractError("max_relative_error: length mismatch");
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, static_cast<double>(std::abs(a[i] - b[i])));
    scale = std::max(scale, static_cast<double>(std::abs(b[i])));
  }
  if (std::isnan(diff)) return diff;
  return scale > 0.0 ? diff / scale : diff;
}

template <typename T>
double max_relative_error(const Grid<T>& a, const Grid<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ContractError("max_relative_error: shape mismatch");
  }
  return max_relative_error(a.flat(), b.flat());
}

}  // namespace sts
