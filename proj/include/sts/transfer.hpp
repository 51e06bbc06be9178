#pragma once

// Streaming evaluation with a transferred hidden state.
//
// A Session consumes a stream one segment at a time. Each segment is
// evaluated through the kernel path seeded with the state left by the
// previous segment, so the concatenated outputs equal a single pass over the
// whole stream while only one segment's worth of memory is ever live.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sts/checkpoint.hpp"
#include "sts/error.hpp"
#include "sts/grid.hpp"
#include "sts/kernel.hpp"
#include "sts/ssm_core.hpp"

namespace sts {

struct SegmentPlan {
  std::size_t segment_len = 1;  // M
  bool allow_partial_tail = true;
};

struct Segment {
  std::uint64_t start;
  std::uint64_t length;
  friend bool operator==(const Segment&, const Segment&) = default;
};

inline std::vector<Segment> plan_segments(std::uint64_t total_len, const SegmentPlan& plan) {
  if (plan.segment_len == 0) throw ContractError("plan_segments: segment length must be >= 1");
  const std::uint64_t M = plan.segment_len;
  if (total_len % M != 0 && !plan.allow_partial_tail) {
    throw PlanError("plan_segments: total length " + std::to_string(total_len) + " is not a multiple of " +
                    std::to_string(M));
  }
  std::vector<Segment> out;
  out.reserve(total_len / M + 1);
  for (std::uint64_t start = 0; start < total_len; start += M) out.push_back({start, std::min(M, total_len - start)});
  return out;
}

enum class ReadoutPolicy { all_tokens, last_token_per_segment, final_token_only };

// floor(t * buckets / total), clamped to the last bucket.
inline std::uint32_t bucketize_time(std::uint64_t t, std::uint64_t total, std::uint32_t buckets = 32) {
  if (total == 0) throw ContractError("bucketize_time: total must be >= 1");
  if (buckets == 0) throw ContractError("bucketize_time: buckets must be >= 1");
  if (t > total) throw ContractError("bucketize_time: t exceeds total");
  const auto b = static_cast<unsigned __int128>(t) * buckets / total;
  return static_cast<std::uint32_t>(std::min<unsigned __int128>(b, buckets - 1));
}

struct Emission {
  std::uint64_t position;               // 0-based index of the emitted timestep
  std::optional<std::uint32_t> bucket;  // set when the stream length is declared
  std::vector<double> values;           // [H]
};

class Session {
 public:
  Session(std::shared_ptr<const DiscreteParams> params, SegmentPlan plan,
          ReadoutPolicy policy = ReadoutPolicy::last_token_per_segment,
          std::optional<std::uint64_t> declared_total = std::nullopt, KernelCache* cache = nullptr)
      : params_(std::move(params)),
        plan_(plan),
        policy_(policy),
        declared_total_(declared_total),
        cache_(cache ? cache : &default_kernel_cache()) {
    if (!params_) throw ContractError("Session: null params");
    params_->validate();
    if (plan_.segment_len == 0) throw ContractError("Session: segment length must be >= 1");
    if (declared_total_ && *declared_total_ == 0) throw ContractError("Session: declared total must be >= 1");
    state_ = TransferState::zeros(*params_);
    if (plan_.segment_len > 1) kernels_ = cache_->get(*params_, plan_.segment_len);
    last_y_.resize(params_->channels());
  }

  const DiscreteParams& params() const noexcept { return *params_; }
  const SegmentPlan& plan() const noexcept { return plan_; }
  ReadoutPolicy policy() const noexcept { return policy_; }
  const TransferState& state() const noexcept { return state_; }
  std::uint64_t segment_index() const noexcept { return segment_index_; }
  bool closed() const noexcept { return closed_; }

  // Evaluates x_seg [H, m], m <= M, advances the state by m timesteps and
  // returns every output of the segment regardless of the readout policy.
  Grid<double> advance(const Grid<double>& x_seg) {
    if (closed_) throw ContractError("process_segment: session is closed");
    if (tail_consumed_) throw ContractError("process_segment: a partial tail segment already ended the stream");
    if (x_seg.rows() != params_->channels()) {
      throw ContractError("process_segment: segment has " + std::to_string(x_seg.rows()) + " channels, expected " +
                          std::to_string(params_->channels()));
    }
    const std::size_t m = x_seg.cols();
    const std::size_t M = plan_.segment_len;
    if (m == 0) throw ContractError("process_segment: empty segment");
    if (m > M) throw ContractError("process_segment: segment longer than the plan's segment length");
    if (m < M && !plan_.allow_partial_tail) throw PlanError("process_segment: partial segment not allowed by plan");

    const std::size_t H = params_->channels();
    Grid<double> y;
    if (M == 1) {
      y = Grid<double>(H, 1);
      std::vector<double> xt(H), yt(H);
      for (std::size_t h = 0; h < H; ++h) xt[h] = x_seg(h, 0);
      step_inplace(*params_, xt, state_, yt);
      for (std::size_t h = 0; h < H; ++h) y(h, 0) = yt[h];
    } else {
      const auto kernels = m == M ? kernels_ : cache_->get(*params_, m);
      auto r = eval_conv_path(*params_, *kernels, x_seg, state_, convention_);
      state_ = std::move(r.state);
      y = std::move(r.y);
    }
    if (m < M) tail_consumed_ = true;
    else ++segment_index_;
    for (std::size_t h = 0; h < H; ++h) last_y_[h] = y(h, m - 1);
    have_last_ = true;
    return y;
  }

  // advance() followed by the readout policy.
  std::vector<Emission> process_segment(const Grid<double>& x_seg) {
    const std::uint64_t start = state_.position;
    const Grid<double> y = advance(x_seg);
    const std::size_t H = y.rows(), m = y.cols();

    std::vector<Emission> out;
    switch (policy_) {
      case ReadoutPolicy::all_tokens:
        out.reserve(m);
        for (std::size_t k = 0; k < m; ++k) {
          Emission e = make_emission(start + k);
          for (std::size_t h = 0; h < H; ++h) e.values[h] = y(h, k);
          out.push_back(std::move(e));
        }
        break;
      case ReadoutPolicy::last_token_per_segment: {
        Emission e = make_emission(start + m - 1);
        e.values = last_y_;
        out.push_back(std::move(e));
        break;
      }
      case ReadoutPolicy::final_token_only:
        break;
    }
    return out;
  }

  // Ends the stream. FinalTokenOnly emits its single output here.
  std::vector<Emission> close() {
    if (closed_) throw ContractError("close: session already closed");
    closed_ = true;
    std::vector<Emission> out;
    if (policy_ == ReadoutPolicy::final_token_only && have_last_) {
      Emission e = make_emission(state_.position - 1);
      e.values = last_y_;
      out.push_back(std::move(e));
    }
    return out;
  }

  std::vector<std::uint8_t> save_state() const { return encode_checkpoint(state_); }

  // Resumes from a checkpointed state. The segment counter is derived from
  // the position; a position off a segment boundary means the checkpointed
  // stream ended on a partial tail.
  void restore(TransferState state) {
    if (closed_) throw ContractError("restore: session is closed");
    detail::check_shapes(*params_, state);
    if (state.position < state_.position) throw ContractError("restore: position would move backwards");
    state_ = std::move(state);
    segment_index_ = state_.position / plan_.segment_len;
    tail_consumed_ = state_.position % plan_.segment_len != 0;
    have_last_ = false;
  }

  void load_state(std::span<const std::uint8_t> bytes) { restore(decode_checkpoint(bytes, *params_)); }

  // Fault injection for the verification suite only.
  void set_exponent_convention(ExponentConvention c) noexcept { convention_ = c; }

 private:
  Emission make_emission(std::uint64_t position) const {
    Emission e{position, std::nullopt, std::vector<double>(params_->channels())};
    if (declared_total_) e.bucket = bucketize_time(position, *declared_total_);
    return e;
  }

  std::shared_ptr<const DiscreteParams> params_;
  SegmentPlan plan_;
  ReadoutPolicy policy_;
  std::optional<std::uint64_t> declared_total_;
  KernelCache* cache_;
  std::shared_ptr<const KernelSet> kernels_;
  TransferState state_;
  std::vector<double> last_y_;
  std::uint64_t segment_index_ = 0;
  bool tail_consumed_ = false;
  bool have_last_ = false;
  bool closed_ = false;
  ExponentConvention convention_ = ExponentConvention::unrolled;
};

// Runs x [H, L] through a fresh session in segments of M and stitches the
// segment outputs back into [H, L]. Used by verification and benchmarks.
inline ScanResult run_chunked(std::shared_ptr<const DiscreteParams> params, const Grid<double>& x, std::size_t M,
                              KernelCache* cache = nullptr,
                              ExponentConvention convention = ExponentConvention::unrolled) {
  Session s(std::move(params), {M, true}, ReadoutPolicy::all_tokens, std::nullopt, cache);
  s.set_exponent_convention(convention);
  const std::size_t H = x.rows(), L = x.cols();
  ScanResult r{Grid<double>(H, L), {}};
  for (const Segment& seg : plan_segments(L, {M, true})) {
    Grid<double> xs(H, seg.length);
    for (std::size_t h = 0; h < H; ++h) {
      std::copy_n(x.row(h).begin() + static_cast<std::ptrdiff_t>(seg.start), seg.length, xs.row(h).begin());
    }
    const Grid<double> ys = s.advance(xs);
    for (std::size_t h = 0; h < H; ++h) {
      std::copy(ys.row(h).begin(), ys.row(h).end(), r.y.row(h).begin() + static_cast<std::ptrdiff_t>(seg.start));
    }
  }
  r.state = s.state();
  return r;
}

}  // namespace sts
