#include <gtest/gtest.h>

#include <sstream>

#include "sts/alloc_tracker_impl.hpp"
#include "sts/bench.hpp"
#include "test_support.hpp"

namespace sts::bench {
namespace {

TEST(CountFlops, RecurrentUnitShape) { EXPECT_EQ(count_flops(Method::recurrent, 1, 1, 1, 1, 1), 18u); }

TEST(CountFlops, FftHandValue) {
  // P = 4: 3 * 5 * 4 * 2 + 6 * 4 + 8 * 1 * 2
  EXPECT_EQ(count_flops(Method::fft_full, 1, 1, 2, 2, 1), 160u);
  EXPECT_EQ(count_flops(Method::fft_full, 3, 1, 2, 2, 1), 480u);
}

TEST(CountFlops, SingleSegmentReducesToFftPlusStateTerms) {
  for (std::uint64_t L : {1u, 7u, 100u, 4096u}) {
    const std::uint64_t H = 4, N = 16;
    EXPECT_EQ(count_flops(Method::sts_chunked, H, N, L, L, 64),
              count_flops(Method::fft_full, H, N, L, L, 64) + H * 16 * N * L);
  }
}

TEST(CountFlops, PartialTailSegment) {
  const auto full = count_flops(Method::sts_chunked, 1, 4, 8, 4, 1);
  const auto tail = count_flops(Method::sts_chunked, 1, 4, 10, 4, 1);
  EXPECT_EQ(tail, full + count_flops(Method::sts_chunked, 1, 4, 2, 2, 1));
}

TEST(CountFlops, Errors) {
  EXPECT_THROW(count_flops(Method::sts_chunked, 1, 1, 10, 11, 1), ContractError);
  EXPECT_THROW(count_flops(Method::sts_chunked, 1, 1, 10, 0, 1), ContractError);
  EXPECT_THROW(count_flops(Method::recurrent, 1, 1, 0, 1, 1), ContractError);
}

TEST(CountFlops, MonotoneInLength) {
  for (Method m : kAllMethods) {
    std::uint64_t prev = 0;
    for (std::uint64_t L = 64; L <= (1u << 20); L *= 2) {
      const auto f = count_flops(m, 4, 16, L, 64, 64);
      EXPECT_GT(f, prev) << method_name(m);
      prev = f;
    }
  }
}

TEST(CountFlops, DoublingRatios) {
  for (std::uint64_t L = 1u << 14; L <= (1u << 20); L *= 2) {
    const double attn = static_cast<double>(count_flops(Method::attention, 64, 16, 2 * L, 4096, 64)) /
                        static_cast<double>(count_flops(Method::attention, 64, 16, L, 4096, 64));
    const double sts = static_cast<double>(count_flops(Method::sts_chunked, 64, 16, 2 * L, 4096, 64)) /
                       static_cast<double>(count_flops(Method::sts_chunked, 64, 16, L, 4096, 64));
    EXPECT_GE(attn, 3.5);
    EXPECT_LE(attn, 4.0);
    EXPECT_LE(sts, 2.2);
  }
}

TEST(CountFlops, AttentionToStsRatioAtLongContext) {
  const double attn = static_cast<double>(count_flops(Method::attention, 64, 16, 262144, 4096, 64));
  const double sts = static_cast<double>(count_flops(Method::sts_chunked, 64, 16, 262144, 4096, 64));
  EXPECT_GE(attn / sts, 7.0);
}

TEST(Attention, ChecksumIsPermutationInvariant) {
  // Without positional information attention is permutation-equivariant, so
  // the sum of all outputs ignores token order.
  const auto x = sts::testing::random_input(3, 97, 1);
  Grid<double> reversed(3, 97);
  for (std::size_t h = 0; h < 3; ++h) {
    for (std::size_t t = 0; t < 97; ++t) reversed(h, t) = x(h, 96 - t);
  }
  const double a = attention_forward(x, 8, 5), b = attention_forward(reversed, 8, 5);
  EXPECT_NEAR(a, b, 1e-12 * std::max(1.0, std::abs(a)));
}

TEST(Attention, SingleTokenIsLinearInInput) {
  // One token: softmax weight is 1 and the output is the value projection.
  const auto x = sts::testing::random_input(4, 1, 2);
  Grid<double> scaled = x;
  for (double& v : scaled.flat()) v *= -3.0;
  EXPECT_NEAR(attention_forward(scaled, 8, 9), -3.0 * attention_forward(x, 8, 9), 1e-12);
}

TEST(LoglogSlope, RecoversPowerLaw) {
  std::vector<BenchRecord> recs;
  for (std::uint64_t L : {1000u, 2000u, 4000u}) {
    recs.push_back({Method::attention, L, L, 0, L * L, 0, 0.0, false});
    recs.push_back({Method::sts_chunked, L, L, 0, 5 * L, 0, 0.0, false});
  }
  recs.push_back({Method::attention, 8000, 8000, 0, 0, 0, 0.0, true});
  EXPECT_NEAR(*loglog_slope(recs, Method::attention), 2.0, 1e-12);
  EXPECT_NEAR(*loglog_slope(recs, Method::sts_chunked), 1.0, 1e-12);
  EXPECT_FALSE(loglog_slope(recs, Method::recurrent).has_value());
}

TEST(RunScaling, SmallSweep) {
  ASSERT_TRUE(alloc::active());
  ScalingOptions opt;
  opt.lengths = {512, 1024, 2048};
  opt.config = {2, 8, 1e-3, 1e-1, 3};
  opt.segment_len = 256;
  opt.attn_dim = 8;
  opt.memory_ceiling = attention_bytes(1024, 8);
  const auto recs = run_scaling(opt);
  ASSERT_EQ(recs.size(), 12u);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(recs[i].method, kAllMethods[i / 3]);
    EXPECT_EQ(recs[i].L, opt.lengths[i % 3]);
    EXPECT_EQ(recs[i].flops, count_flops(recs[i].method, 2, 8, recs[i].L, 256, 8));
  }
  // Equivalent computations: checksums agree across the SSM paths.
  for (std::size_t j = 0; j < 3; ++j) {
    const double ref = recs[j].checksum;
    for (std::size_t m = 1; m < 3; ++m) {
      EXPECT_NEAR(recs[3 * m + j].checksum, ref, 1e-7 * std::max(1.0, std::abs(ref)));
    }
  }
  // Fixed memory for the streamed path.
  EXPECT_GT(recs[6].peak_bytes, 0u);
  EXPECT_EQ(recs[6].peak_bytes, recs[7].peak_bytes);
  EXPECT_EQ(recs[7].peak_bytes, recs[8].peak_bytes);
  // Attention above the ceiling is skipped, not failed.
  EXPECT_FALSE(recs[10].skipped);
  EXPECT_TRUE(recs[11].skipped);

  std::ostringstream csv;
  write_csv(csv, recs);
  std::istringstream lines(csv.str());
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "method,L,M,flops,wall_ns,peak_bytes,checksum");
  std::size_t rows = 0;
  std::string last;
  while (std::getline(lines, line)) {
    ++rows;
    last = line;
  }
  EXPECT_EQ(rows, 12u);
  EXPECT_EQ(last, "attention,2048,256," + std::to_string(recs[11].flops) + ",," +
                      std::to_string(attention_bytes(2048, 8)) + ",");
}

TEST(RunScaling, RejectsBadOptions) {
  ScalingOptions opt;
  opt.lengths = {1024, 512};
  EXPECT_THROW(run_scaling(opt), ConfigError);
  opt.lengths = {512};
  opt.repetitions = 2;
  EXPECT_THROW(run_scaling(opt), ConfigError);
  opt.repetitions = 3;
  opt.lengths = {};
  EXPECT_THROW(run_scaling(opt), ConfigError);
  EXPECT_THROW(parse_method("transformer"), ConfigError);
  EXPECT_EQ(parse_method("sts_chunked"), Method::sts_chunked);
}

}  // namespace
}  // namespace sts::bench
