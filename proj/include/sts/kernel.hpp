#pragma once

// Convolutional view of a diagonal SSM over a window of L timesteps.
//
//   out[l]      = Re(sum_n Cbar[n] Abar[n]^l Bbar[n])     output kernel
//   state[n][l] = Abar[n]^l Bbar[n]                        hidden-state kernel
//   corr[n][k]  = Cbar[n] Abar[n]^(k+1),  k = 0..L-1       initial-state readout
//   a_pow[n]    = Abar[n]^L                                segment propagator
//
// With the recurrence h_k = Abar h_{k-1} + Bbar x_k and a given h0, the window
// evaluates to (1-based k)
//   y_k = (out * x)_k + D x_k + Re(sum_n Cbar Abar^k h0)
//   h_L = sum_l state[l] x_{L-l} + Abar^L h0
// which reproduces the recurrence exactly at every position.

#include <bit>
#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "sts/convolution.hpp"
#include "sts/error.hpp"
#include "sts/grid.hpp"
#include "sts/ssm_core.hpp"

namespace sts {

class KernelSet {
 public:
  KernelSet(std::size_t channels, std::size_t state_size, std::size_t length)
      : length_(length),
        state_size_(state_size),
        out_(channels, length),
        state_(channels * state_size * length),
        corr_(channels * state_size * length),
        a_pow_(channels, state_size) {}

  std::size_t length() const noexcept { return length_; }
  std::size_t channels() const noexcept { return out_.rows(); }
  std::size_t state_size() const noexcept { return state_size_; }

  const Grid<double>& out() const noexcept { return out_; }
  std::span<const double> out(std::size_t h) const { return out_.row(h); }
  std::span<const cplx> state(std::size_t h, std::size_t n) const { return {state_.data() + offset(h, n), length_}; }
  std::span<const cplx> corr(std::size_t h, std::size_t n) const { return {corr_.data() + offset(h, n), length_}; }
  const Grid<cplx>& a_pow() const noexcept { return a_pow_; }

  std::size_t bytes() const noexcept {
    return out_.size() * sizeof(double) + (state_.size() + corr_.size() + a_pow_.size()) * sizeof(cplx);
  }

 private:
  friend KernelSet materialize_kernels(const DiscreteParams&, std::size_t);

  std::size_t offset(std::size_t h, std::size_t n) const noexcept { return (h * state_size_ + n) * length_; }

  std::size_t length_;
  std::size_t state_size_;
  Grid<double> out_;
  std::vector<cplx> state_;
  std::vector<cplx> corr_;
  Grid<cplx> a_pow_;
};

// Cumulative products of Abar; lag l of a length-L set is computed by the
// same operations as lag l of any longer set, so shorter sets are exact
// prefixes of longer ones.
inline KernelSet materialize_kernels(const DiscreteParams& params, std::size_t L) {
  if (L == 0) throw ContractError("materialize_kernels: L must be >= 1");
  params.validate();
  const std::size_t H = params.channels(), N = params.state_size();
  KernelSet ks(H, N, L);
  for (std::size_t h = 0; h < H; ++h) {
    auto out = ks.out_.row(h);
    for (std::size_t n = 0; n < N; ++n) {
      const cplx a = params.A_bar(h, n), b = params.B_bar(h, n), c = params.C_bar(h, n);
      cplx* st = ks.state_.data() + ks.offset(h, n);
      cplx* cr = ks.corr_.data() + ks.offset(h, n);
      cplx p{1.0, 0.0};
      for (std::size_t l = 0; l < L; ++l) {
        st[l] = cmul(p, b);
        p = cmul(p, a);
        cr[l] = cmul(c, p);
      }
      ks.a_pow_(h, n) = p;
    }
    for (std::size_t l = 0; l < L; ++l) {
      double acc = 0.0;
      for (std::size_t n = 0; n < N; ++n) acc += cmul_re(params.C_bar(h, n), ks.state_[ks.offset(h, n) + l]);
      out[l] = acc;
    }
  }
  for (const cplx& v : ks.a_pow_.flat()) {
    if (!is_finite(v)) throw NumericError("materialize_kernels: non-finite propagator");
  }
  return ks;
}

// Which power of Abar applies to the incoming state. `shifted` is the
// one-step-short reading (Abar^(k-1) in the readout, Abar^(L-1) for the
// propagator); it is wrong and exists only so the verification suite can
// prove it detects the difference.
enum class ExponentConvention { unrolled, shifted };

inline ScanResult eval_conv_path(const DiscreteParams& params, const KernelSet& kernels, const Grid<double>& x,
                                 const TransferState& h0,
                                 ExponentConvention convention = ExponentConvention::unrolled) {
  detail::check_shapes(params, h0);
  const std::size_t H = params.channels(), N = params.state_size(), L = x.cols();
  if (x.rows() != H) throw ContractError("eval_conv_path: channel mismatch");
  if (kernels.length() != L) {
    throw ContractError("eval_conv_path: input length " + std::to_string(L) + " != kernel length " +
                        std::to_string(kernels.length()));
  }
  if (kernels.channels() != H || kernels.state_size() != N) throw ContractError("eval_conv_path: kernel shape mismatch");
  for (std::size_t h = 0; h < H; ++h) {
    for (std::size_t k = 0; k < L; ++k) {
      if (!std::isfinite(x(h, k))) throw NumericError("eval_conv_path: non-finite input", static_cast<std::int64_t>(k));
    }
  }

  ScanResult r{Grid<double>(H, L), TransferState(H, N)};
  r.state.position = h0.position + L;
  const bool shifted = convention == ExponentConvention::shifted;
  for (std::size_t h = 0; h < H; ++h) {
    auto y = r.y.row(h);
    auto xs = x.row(h);
    conv_causal_fft(kernels.out(h), xs, y);
    for (std::size_t k = 0; k < L; ++k) y[k] += params.D[h] * xs[k];

    for (std::size_t n = 0; n < N; ++n) {
      const cplx g = h0.h(h, n);
      const auto st = kernels.state(h, n);
      cplx acc{0.0, 0.0};
      for (std::size_t l = 0; l < L; ++l) acc += cmul(st[l], cplx{xs[L - 1 - l], 0.0});

      cplx prop = kernels.a_pow()(h, n);
      if (g != cplx{0.0, 0.0}) {
        const auto cr = kernels.corr(h, n);
        if (!shifted) {
          for (std::size_t k = 0; k < L; ++k) y[k] += cmul_re(cr[k], g);
        } else {
          y[0] += cmul_re(params.C_bar(h, n), g);
          for (std::size_t k = 1; k < L; ++k) y[k] += cmul_re(cr[k - 1], g);
          const cplx a = params.A_bar(h, n);
          prop = a != cplx{0.0, 0.0} ? prop / a : cplx{L == 1 ? 1.0 : 0.0, 0.0};
        }
      }
      r.state.h(h, n) = acc + cmul(prop, g);
    }
    for (std::size_t k = 0; k < L; ++k) {
      if (!std::isfinite(y[k])) throw NumericError("eval_conv_path: non-finite output", static_cast<std::int64_t>(k));
    }
  }
  return r;
}

// Value hash over the bit patterns of every parameter entry.
inline std::uint64_t params_hash(const DiscreteParams& p) {
  std::uint64_t hash = 1469598103934665603ull;
  auto mix = [&hash](double v) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      hash ^= (bits >> (8 * i)) & 0xffu;
      hash *= 1099511628211ull;
    }
  };
  mix(static_cast<double>(p.channels()));
  mix(static_cast<double>(p.state_size()));
  for (const auto* g : {&p.A_bar, &p.B_bar, &p.C_bar}) {
    for (const cplx& v : g->flat()) {
      mix(v.real());
      mix(v.imag());
    }
  }
  for (double d : p.D) mix(d);
  return hash;
}

// Kernel sets keyed by (parameter values, length). Entries are immutable and
// shared; the oldest are dropped once the byte budget is exceeded, which does
// not invalidate sets still held by callers.
class KernelCache {
 public:
  explicit KernelCache(std::size_t max_bytes = std::size_t{1} << 30) : max_bytes_(max_bytes) {}

  std::shared_ptr<const KernelSet> get(const DiscreteParams& params, std::size_t L) {
    const std::uint64_t key = params_hash(params);
    {
      std::lock_guard lock(mutex_);
      for (const auto& e : entries_) {
        if (e.hash == key && e.length == L && *e.params == params) return e.kernels;
      }
    }
    // Materialize outside the lock; concurrent misses on the same key produce
    // identical sets and the later insert wins.
    auto ks = std::make_shared<const KernelSet>(materialize_kernels(params, L));
    auto copy = std::make_shared<const DiscreteParams>(params);
    std::lock_guard lock(mutex_);
    for (auto it = entries_.begin(); it != entries_.end();) {
      if (it->hash == key && it->length == L && *it->params == params) {
        bytes_ -= it->kernels->bytes();
        it = entries_.erase(it);
      } else {
        ++it;
      }
    }
    entries_.push_back({key, L, std::move(copy), ks});
    bytes_ += ks->bytes();
    while (bytes_ > max_bytes_ && entries_.size() > 1) {
      bytes_ -= entries_.front().kernels->bytes();
      entries_.pop_front();
    }
    return ks;
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
  }

  void clear() {
    std::lock_guard lock(mutex_);
    entries_.clear();
    bytes_ = 0;
  }

 private:
  struct Entry {
    std::uint64_t hash;
    std::size_t length;
    std::shared_ptr<const DiscreteParams> params;
    std::shared_ptr<const KernelSet> kernels;
  };

  mutable std::mutex mutex_;
  std::list<Entry> entries_;
  std::size_t bytes_ = 0;
  std::size_t max_bytes_;
};

inline KernelCache& default_kernel_cache() {
  static KernelCache cache;
  return cache;
}

}  // namespace sts
