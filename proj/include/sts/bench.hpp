#pragma once

// Analytic FLOP model and wall-clock scaling harness for the three SSM
// evaluation paths and a single-head softmax-attention baseline.
//
// FLOP conventions: complex multiply = 6, complex add = 2, real FFT of size
// P = 5 P log2 P. Counts cover the sequence-mixing core only.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <future>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "sts/alloc_tracker.hpp"
#include "sts/convolution.hpp"
#include "sts/error.hpp"
#include "sts/kernel.hpp"
#include "sts/ssm_core.hpp"
#include "sts/transfer.hpp"

namespace sts::bench {

enum class Method { recurrent, fft_full, sts_chunked, attention };

inline constexpr Method kAllMethods[] = {Method::recurrent, Method::fft_full, Method::sts_chunked, Method::attention};

inline const char* method_name(Method m) {
  switch (m) {
    case Method::recurrent: return "recurrent";
    case Method::fft_full: return "fft_full";
    case Method::sts_chunked: return "sts_chunked";
    case Method::attention: return "attention";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  for (Method m : kAllMethods) {
    if (s == method_name(m)) return m;
  }
  throw ConfigError("unknown bench method: " + s);
}

namespace detail {

inline std::uint64_t log2_exact(std::uint64_t p) { return static_cast<std::uint64_t>(std::countr_zero(p)); }

// One channel: three real FFTs of size P, the pointwise product, and the
// cumulative-product kernel materialization.
inline std::uint64_t fft_conv_channel(std::uint64_t N, std::uint64_t L) {
  const std::uint64_t P = fft_size_for(L);
  return 3 * (5 * P * log2_exact(P)) + 6 * P + 8 * N * L;
}

inline std::uint64_t sts_segment_channel(std::uint64_t N, std::uint64_t m) {
  return fft_conv_channel(N, m) + 8 * N * m + 8 * N * m;
}

}  // namespace detail

// Closed-form FLOP count. H, N, M are ignored where they do not apply
// (attention depends on L and d only).
inline std::uint64_t count_flops(Method method, std::uint64_t H, std::uint64_t N, std::uint64_t L, std::uint64_t M,
                                 std::uint64_t d) {
  if (L == 0) throw ContractError("count_flops: L must be >= 1");
  switch (method) {
    case Method::recurrent:
      return L * H * (8 * N + 8 * N + 2);
    case Method::fft_full:
      return H * detail::fft_conv_channel(N, L);
    case Method::sts_chunked: {
      if (M == 0 || M > L) throw ContractError("count_flops: sts_chunked needs 1 <= M <= L");
      std::uint64_t per_channel = (L / M) * detail::sts_segment_channel(N, M);
      if (L % M != 0) per_channel += detail::sts_segment_channel(N, L % M);
      return H * per_channel;
    }
    case Method::attention:
      return 2 * L * L * d + 5 * L * L + 2 * L * L * d;
  }
  throw ContractError("count_flops: unknown method");
}

// Bytes a materialized single-head attention needs: Q, K, V, the L x L score
// matrix and the output.
inline std::uint64_t attention_bytes(std::uint64_t L, std::uint64_t d) {
  return (L * L + 4 * L * d) * sizeof(double);
}

// Single-head scaled dot-product attention over x [H, L] with seeded
// projections to dimension d. Returns the sum of all outputs.
inline double attention_forward(const Grid<double>& x, std::size_t d, std::uint64_t seed) {
  const std::size_t H = x.rows(), L = x.cols();
  std::mt19937_64 rng(seed);
  const double proj_scale = 1.0 / std::sqrt(static_cast<double>(H));
  auto projection = [&] {
    Grid<double> w(d, H);
    for (double& v : w.flat()) v = sts::detail::standard_normal(rng) * proj_scale;
    return w;
  };
  const Grid<double> wq = projection(), wk = projection(), wv = projection();
  auto project = [&](const Grid<double>& w) {
    Grid<double> out(L, d);
    for (std::size_t t = 0; t < L; ++t) {
      for (std::size_t j = 0; j < d; ++j) {
        double acc = 0.0;
        for (std::size_t h = 0; h < H; ++h) acc += w(j, h) * x(h, t);
        out(t, j) = acc;
      }
    }
    return out;
  };
  const Grid<double> q = project(wq), k = project(wk), v = project(wv);

  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  Grid<double> scores(L, L);
  for (std::size_t i = 0; i < L; ++i) {
    auto qi = q.row(i);
    auto si = scores.row(i);
    for (std::size_t j = 0; j < L; ++j) {
      auto kj = k.row(j);
      double acc = 0.0;
      for (std::size_t c = 0; c < d; ++c) acc += qi[c] * kj[c];
      si[j] = acc * scale;
    }
  }
  for (std::size_t i = 0; i < L; ++i) {
    auto si = scores.row(i);
    const double mx = *std::max_element(si.begin(), si.end());
    double sum = 0.0;
    for (double& s : si) {
      s = std::exp(s - mx);
      sum += s;
    }
    const double inv = 1.0 / sum;
    for (double& s : si) s *= inv;
  }
  Grid<double> out(L, d);
  for (std::size_t i = 0; i < L; ++i) {
    auto si = scores.row(i);
    auto oi = out.row(i);
    for (std::size_t j = 0; j < L; ++j) {
      const double w = si[j];
      auto vj = v.row(j);
      for (std::size_t c = 0; c < d; ++c) oi[c] += w * vj[c];
    }
  }
  double checksum = 0.0;
  for (double o : out.flat()) checksum += o;
  return checksum;
}

struct BenchRecord {
  Method method;
  std::uint64_t L;
  std::uint64_t M;
  std::uint64_t flops;
  std::uint64_t wall_ns;     // median over repetitions
  std::uint64_t peak_bytes;  // heap growth during the run; 0 without tracking
  double checksum;           // sum of outputs
  bool skipped = false;      // exceeded the memory ceiling
};

struct ScalingOptions {
  std::vector<std::size_t> lengths;
  SsmConfig config{4, 16, 1e-3, 1e-1, 0};
  std::size_t segment_len = 4096;
  std::size_t attn_dim = 16;
  std::size_t repetitions = 3;
  std::uint64_t memory_ceiling = std::uint64_t{3} << 30;
  std::vector<Method> methods{std::begin(kAllMethods), std::end(kAllMethods)};
  std::uint64_t input_seed = 1;
  bool parallel = false;
};

namespace detail {

inline double sum_all(const Grid<double>& y) {
  double s = 0.0;
  for (double v : y.flat()) s += v;
  return s;
}

inline double run_once(Method method, const DiscreteParams& params,
                       const std::shared_ptr<const DiscreteParams>& shared, const Grid<double>& x, std::size_t M,
                       std::size_t d, std::uint64_t seed, KernelCache& cache) {
  const std::size_t H = x.rows(), L = x.cols();
  switch (method) {
    case Method::recurrent:
      return sum_all(scan_recurrent(params, x, TransferState::zeros(params)).y);
    case Method::fft_full: {
      const auto ks = cache.get(params, L);
      return sum_all(eval_conv_path(params, *ks, x, TransferState::zeros(params)).y);
    }
    case Method::sts_chunked: {
      Session s(shared, {M, true}, ReadoutPolicy::all_tokens, std::nullopt, &cache);
      double total = 0.0;
      Grid<double> seg(H, M);
      for (std::size_t start = 0; start < L; start += M) {
        const std::size_t m = std::min(M, L - start);
        if (m != seg.cols()) seg = Grid<double>(H, m);
        for (std::size_t h = 0; h < H; ++h) {
          std::copy_n(x.row(h).begin() + static_cast<std::ptrdiff_t>(start), m, seg.row(h).begin());
        }
        total += sum_all(s.advance(seg));
      }
      return total;
    }
    case Method::attention:
      return attention_forward(x, d, seed);
  }
  return 0.0;
}

inline std::vector<BenchRecord> run_method(Method method, const ScalingOptions& opt, const DiscreteParams& params) {
  const auto shared = std::make_shared<const DiscreteParams>(params);
  const std::size_t H = params.channels(), N = params.state_size();
  std::vector<BenchRecord> out;
  for (std::size_t L : opt.lengths) {
    const std::size_t M = std::min(opt.segment_len, L);
    BenchRecord rec{method, L, M, count_flops(method, H, N, L, M, opt.attn_dim), 0, 0, 0.0, false};
    if (method == Method::attention && attention_bytes(L, opt.attn_dim) > opt.memory_ceiling) {
      rec.skipped = true;
      rec.peak_bytes = attention_bytes(L, opt.attn_dim);
      out.push_back(rec);
      continue;
    }
    std::mt19937_64 rng(opt.input_seed + L);
    Grid<double> x(H, L);
    for (double& v : x.flat()) v = sts::detail::standard_normal(rng);

    KernelCache cache(std::uint64_t{2} << 30);
    const std::uint64_t seed = opt.input_seed ^ 0x9e3779b97f4a7c15ull;
    run_once(method, params, shared, x, M, opt.attn_dim, seed, cache);  // warm-up: plans, kernels, page faults

    std::vector<std::uint64_t> times;
    std::uint64_t peak = 0;
    for (std::size_t r = 0; r < opt.repetitions; ++r) {
      alloc::PeakScope scope;
      const auto t0 = std::chrono::steady_clock::now();
      rec.checksum = run_once(method, params, shared, x, M, opt.attn_dim, seed, cache);
      const auto t1 = std::chrono::steady_clock::now();
      times.push_back(static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count()));
      peak = std::max(peak, scope.peak_bytes());
    }
    std::nth_element(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(times.size() / 2), times.end());
    rec.wall_ns = times[times.size() / 2];
    rec.peak_bytes = peak;
    out.push_back(rec);
  }
  return out;
}

}  // namespace detail

// Runs every selected method over the sweep. Rows are ordered by method,
// then by L. Attention runs whose materialized size exceeds the memory
// ceiling are recorded as skipped.
inline std::vector<BenchRecord> run_scaling(const ScalingOptions& opt) {
  if (opt.lengths.empty()) throw ConfigError("run_scaling: empty sweep");
  if (!std::is_sorted(opt.lengths.begin(), opt.lengths.end())) throw ConfigError("run_scaling: sweep must be ascending");
  if (opt.lengths.front() == 0) throw ConfigError("run_scaling: lengths must be >= 1");
  if (opt.repetitions < 3) throw ConfigError("run_scaling: repetitions must be >= 3");
  if (opt.segment_len == 0) throw ConfigError("run_scaling: segment length must be >= 1");
  if (opt.attn_dim == 0) throw ConfigError("run_scaling: attention dimension must be >= 1");
  const DiscreteParams params = discretize(init_s4d_lin(opt.config));

  std::vector<Method> methods = opt.methods;
  std::sort(methods.begin(), methods.end());
  methods.erase(std::unique(methods.begin(), methods.end()), methods.end());

  std::vector<BenchRecord> out;
  if (opt.parallel) {
    // Peak-byte figures are not separable per method in this mode.
    std::vector<std::future<std::vector<BenchRecord>>> jobs;
    for (Method m : methods) jobs.push_back(std::async(std::launch::async, detail::run_method, m, opt, params));
    for (auto& j : jobs) {
      auto recs = j.get();
      out.insert(out.end(), recs.begin(), recs.end());
    }
  } else {
    for (Method m : methods) {
      auto recs = detail::run_method(m, opt, params);
      out.insert(out.end(), recs.begin(), recs.end());
    }
  }
  return out;
}

// Least-squares slope of log(wall time) against log(L) over the measured
// (non-skipped) records of one method. Empty when fewer than two points.
inline std::optional<double> loglog_slope(const std::vector<BenchRecord>& records, Method method) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : records) {
    if (r.method == method && !r.skipped && r.wall_ns > 0) {
      pts.emplace_back(std::log(static_cast<double>(r.L)), std::log(static_cast<double>(r.wall_ns)));
    }
  }
  if (pts.size() < 2) return std::nullopt;
  double mx = 0, my = 0;
  for (auto [a, b] : pts) {
    mx += a;
    my += b;
  }
  mx /= static_cast<double>(pts.size());
  my /= static_cast<double>(pts.size());
  double sxy = 0, sxx = 0;
  for (auto [a, b] : pts) {
    sxy += (a - mx) * (b - my);
    sxx += (a - mx) * (a - mx);
  }
  return sxy / sxx;
}

// CSV with header `method,L,M,flops,wall_ns,peak_bytes,checksum`. Skipped
// runs leave wall_ns and checksum empty and report the estimated bytes.
inline void write_csv(std::ostream& os, const std::vector<BenchRecord>& records) {
  os << "method,L,M,flops,wall_ns,peak_bytes,checksum\n";
  char buf[64];
  for (const auto& r : records) {
    os << method_name(r.method) << ',' << r.L << ',' << r.M << ',' << r.flops << ',';
    if (r.skipped) {
      os << ',' << r.peak_bytes << ",\n";
      continue;
    }
    std::snprintf(buf, sizeof buf, "%.17g", r.checksum);
    os << r.wall_ns << ',' << r.peak_bytes << ',' << buf << '\n';
  }
}

}  // namespace sts::bench
