#pragma once

// Property suite that checks every evaluation path against the step-by-step
// recurrence over seeded random systems. Drives `sts_cli verify` and the
// acceptance tests.

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <map>
#include <memory>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "sts/convolution.hpp"
#include "sts/kernel.hpp"
#include "sts/ssm_core.hpp"
#include "sts/transfer.hpp"

namespace sts::verify {

struct Shape {
  std::size_t channels;
  std::size_t state_size;
};

struct Options {
  std::vector<std::size_t> sizes{1, 2, 64, 1024, 4096, 131072};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::vector<Shape> shapes{{1, 4}, {1, 16}, {4, 4}, {4, 16}};
  ExponentConvention convention = ExponentConvention::unrolled;
  // Naive O(L^2) convolution is only cross-checked up to this length.
  std::size_t naive_conv_max = 4096;
};

struct Check {
  std::string property;
  std::uint64_t seed;
  Shape shape;
  std::size_t L;
  std::size_t M;  // 0 when the property has no partition
  double error;
  double tolerance;
  bool pass() const { return error <= tolerance; }
};

struct Report {
  std::vector<Check> checks;

  bool all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass(); });
  }

  double max_error(const std::string& property, std::size_t min_L = 0) const {
    double e = 0.0;
    for (const auto& c : checks) {
      if (c.property == property && c.L >= min_L) e = std::max(e, c.error);
    }
    return e;
  }
};

// Chunked/streamed equivalence tolerance by sequence length.
inline double chunk_tolerance(std::size_t L) { return L <= 4096 ? 1e-10 : 1e-7; }
// Single-pass kernel path with h0 = 0.
inline double kernel_tolerance(std::size_t L) { return L <= 65536 ? 1e-10 : 1e-7; }

inline std::vector<std::size_t> partitions(std::size_t L) {
  std::vector<std::size_t> ms;
  for (std::size_t m : {std::size_t{1}, std::size_t{7}, std::size_t{64}, L / 2, L}) {
    if (m >= 1 && m <= L && std::find(ms.begin(), ms.end(), m) == ms.end()) ms.push_back(m);
  }
  return ms;
}

inline std::uint64_t system_seed(std::uint64_t seed, const Shape& s) {
  return seed * 1000003ull + s.channels * 131ull + s.state_size;
}

namespace detail {

inline Grid<double> gaussian(std::size_t H, std::size_t L, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Grid<double> x(H, L);
  for (double& v : x.flat()) v = sts::detail::standard_normal(rng);
  return x;
}

inline TransferState gaussian_state(std::size_t H, std::size_t N, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  TransferState s(H, N);
  for (cplx& v : s.h.flat()) v = {sts::detail::standard_normal(rng), sts::detail::standard_normal(rng)};
  return s;
}

inline double combined_error(const ScanResult& got, const ScanResult& ref) {
  return std::max(max_relative_error(got.y, ref.y), max_relative_error(got.state.h, ref.state.h));
}

inline Grid<double> slice(const Grid<double>& x, std::size_t start, std::size_t len) {
  Grid<double> out(x.rows(), len);
  for (std::size_t h = 0; h < x.rows(); ++h) {
    std::copy_n(x.row(h).begin() + static_cast<std::ptrdiff_t>(start), len, out.row(h).begin());
  }
  return out;
}

// Streams x in segments of M, checkpointing to bytes and resuming in a fresh
// session at the segment boundary nearest L/2.
inline ScanResult run_with_resume(const std::shared_ptr<const DiscreteParams>& p, const Grid<double>& x,
                                  std::size_t M, KernelCache& cache, ExponentConvention conv) {
  const std::size_t H = x.rows(), L = x.cols();
  const std::size_t split = std::min(L, (L / 2 / M) * M);
  ScanResult r{Grid<double>(H, L), {}};
  auto feed = [&](Session& s, std::size_t from, std::size_t to) {
    for (std::size_t start = from; start < to; start += M) {
      const std::size_t m = std::min(M, to - start);
      const Grid<double> y = s.advance(slice(x, start, m));
      for (std::size_t h = 0; h < H; ++h) {
        std::copy(y.row(h).begin(), y.row(h).end(), r.y.row(h).begin() + static_cast<std::ptrdiff_t>(start));
      }
    }
  };
  Session first(p, {M, true}, ReadoutPolicy::all_tokens, std::nullopt, &cache);
  first.set_exponent_convention(conv);
  feed(first, 0, split);
  const auto bytes = first.save_state();
  Session second(p, {M, true}, ReadoutPolicy::all_tokens, std::nullopt, &cache);
  second.set_exponent_convention(conv);
  second.load_state(bytes);
  feed(second, split, L);
  r.state = second.state();
  return r;
}

}  // namespace detail

inline void check_system(const Options& opt, std::uint64_t seed, const Shape& shape, std::size_t L, Report& report) {
  const std::uint64_t sseed = system_seed(seed, shape);
  const auto params = std::make_shared<const DiscreteParams>(
      discretize(init_s4d_lin({shape.channels, shape.state_size, 1e-3, 1e-1, sseed})));
  const std::size_t H = shape.channels, N = shape.state_size;
  const Grid<double> x = detail::gaussian(H, L, sseed ^ 0xabcdefull);
  const TransferState zero = TransferState::zeros(*params);
  const TransferState h0 = detail::gaussian_state(H, N, sseed ^ 0x123457ull);
  auto add = [&](const char* prop, std::size_t M, double err, double tol) {
    report.checks.push_back({prop, seed, shape, L, M, err, tol});
  };

  KernelCache cache(std::size_t{1} << 30);
  const ScanResult ref = scan_recurrent(*params, x, zero);

  // Kernel path, single pass.
  {
    const auto ks = cache.get(*params, L);
    add("kernel_path", L, detail::combined_error(eval_conv_path(*params, *ks, x, zero), ref), kernel_tolerance(L));
    const ScanResult ref_h0 = scan_recurrent(*params, x, h0);
    add("kernel_path_h0", L, detail::combined_error(eval_conv_path(*params, *ks, x, h0, opt.convention), ref_h0),
        chunk_tolerance(L));

    double consistency = 0.0;
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t l = 0; l < L; ++l) {
        double via_state = 0.0;
        for (std::size_t n = 0; n < N; ++n) via_state += (params->C_bar(h, n) * ks->state(h, n)[l]).real();
        const double scale = std::max(1.0, std::abs(ks->out(h)[l]));
        consistency = std::max(consistency, std::abs(via_state - ks->out(h)[l]) / scale);
      }
    }
    add("kernel_consistency", 0, consistency, 1e-12);

    if (L <= opt.naive_conv_max) {
      const Grid<double> k = ks->out();
      add("fft_vs_naive", 0, max_relative_error(conv_causal_fft(k, x), conv_causal_naive(k, x)), 1e-10);
    }
  }

  // Chunking invariance over every partition, from h0 = 0.
  for (std::size_t M : partitions(L)) {
    const ScanResult got = run_chunked(params, x, M, &cache, opt.convention);
    if (M == 1) {
      add("unit_segments_vs_step", 1, detail::combined_error(got, ref), 1e-12);
    } else {
      add("chunking", M, detail::combined_error(got, ref), chunk_tolerance(L));
    }
  }
  cache.clear();

  // Checkpoint round trip mid-stream reproduces the uninterrupted run exactly.
  {
    const std::size_t M = std::min<std::size_t>(L, 64);
    const ScanResult straight = run_chunked(params, x, M, &cache, opt.convention);
    const ScanResult resumed = detail::run_with_resume(params, x, M, cache, opt.convention);
    const bool exact = straight.y == resumed.y && straight.state == resumed.state;
    add("checkpoint_resume", M, exact ? 0.0 : std::max(detail::combined_error(resumed, straight), 1e-300), 0.0);
  }
  cache.clear();

  // Linearity of the recurrence in the input.
  {
    const Grid<double> z = detail::gaussian(H, L, sseed ^ 0x55aaull);
    const double alpha = 0.75, beta = -1.25;
    Grid<double> mix(H, L);
    for (std::size_t i = 0; i < mix.size(); ++i) mix.flat()[i] = alpha * x.flat()[i] + beta * z.flat()[i];
    const Grid<double> yz = scan_recurrent(*params, z, zero).y;
    const Grid<double> ym = scan_recurrent(*params, mix, zero).y;
    Grid<double> combo(H, L);
    for (std::size_t i = 0; i < combo.size(); ++i) combo.flat()[i] = alpha * ref.y.flat()[i] + beta * yz.flat()[i];
    add("linearity", 0, max_relative_error(ym, combo), 1e-12);
  }

  // Causality: a perturbation at k leaves earlier outputs bit-identical,
  // through the recurrence and through whole segments of the chunked path.
  {
    const std::size_t k = L / 2;
    Grid<double> xp = x;
    xp(H - 1, k) += 1.0;
    const Grid<double> yp = scan_recurrent(*params, xp, zero).y;
    const std::size_t M = std::min<std::size_t>(L, 64);
    const Grid<double> yc = run_chunked(params, x, M, &cache, opt.convention).y;
    const Grid<double> ycp = run_chunked(params, xp, M, &cache, opt.convention).y;
    const std::size_t segment_start = (k / M) * M;
    double changed = 0.0;
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t j = 0; j < k; ++j) changed = std::max(changed, std::abs(yp(h, j) - ref.y(h, j)));
      for (std::size_t j = 0; j < segment_start; ++j) changed = std::max(changed, std::abs(ycp(h, j) - yc(h, j)));
    }
    add("causality", M, changed, 0.0);
  }
}

inline Report run(const Options& opt, std::ostream* progress = nullptr) {
  Report report;
  for (std::size_t L : opt.sizes) {
    if (L == 0) throw ConfigError("verify: sizes must be >= 1");
    for (std::uint64_t seed : opt.seeds) {
      for (const Shape& shape : opt.shapes) check_system(opt, seed, shape, L, report);
    }
    if (progress) *progress << "  L=" << L << " done\n" << std::flush;
  }
  return report;
}

// One row per (property, L) with the worst error over systems and
// partitions; failing checks are listed individually afterwards.
inline void print_table(std::ostream& os, const Report& report) {
  struct Agg {
    double error = 0.0;
    double tolerance = 0.0;
    std::size_t count = 0;
    std::size_t failures = 0;
  };
  std::map<std::pair<std::string, std::size_t>, Agg> rows;
  std::vector<std::string> order;
  for (const auto& c : report.checks) {
    if (std::find(order.begin(), order.end(), c.property) == order.end()) order.push_back(c.property);
    auto& a = rows[{c.property, c.L}];
    a.error = std::max(a.error, c.error);
    a.tolerance = c.tolerance;
    ++a.count;
    if (!c.pass()) ++a.failures;
  }
  os << std::left << std::setw(24) << "property" << std::right << std::setw(8) << "L" << std::setw(8) << "checks"
     << std::setw(14) << "max_rel_err" << std::setw(12) << "tolerance" << "  result\n";
  for (const auto& prop : order) {
    for (const auto& [key, a] : rows) {
      if (key.first != prop) continue;
      os << std::left << std::setw(24) << prop << std::right << std::setw(8) << key.second << std::setw(8) << a.count
         << std::setw(14) << std::setprecision(3) << std::scientific << a.error << std::setw(12) << a.tolerance
         << std::defaultfloat << "  " << (a.failures == 0 ? "PASS" : "FAIL") << '\n';
    }
  }
  for (const auto& c : report.checks) {
    if (c.pass()) continue;
    os << "FAIL " << c.property << ": seed=" << c.seed << " H=" << c.shape.channels << " N=" << c.shape.state_size
       << " L=" << c.L << " M=" << c.M << " max_rel_err=" << std::setprecision(3) << std::scientific << c.error
       << " tolerance=" << c.tolerance << std::defaultfloat << '\n';
  }
}

}  // namespace sts::verify
