#pragma once

// Command implementations behind `sts_cli`. Each returns the process exit
// code: 0 success, 1 verification failure, 2 usage or format error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sts/alloc_tracker.hpp"
#include "sts/bench.hpp"
#include "sts/checkpoint.hpp"
#include "sts/run_config.hpp"
#include "sts/stream_file.hpp"
#include "sts/transfer.hpp"
#include "sts/verify.hpp"

namespace sts::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitVerifyFailed = 1;
inline constexpr int kExitUsage = 2;

enum class SignalKind { noise, sine_mix, piecewise_events };

inline SignalKind parse_kind(const std::string& s) {
  if (s == "noise") return SignalKind::noise;
  if (s == "sine_mix") return SignalKind::sine_mix;
  if (s == "piecewise_events") return SignalKind::piecewise_events;
  throw ConfigError("unknown stream kind \"" + s + "\" (expected noise, sine_mix or piecewise_events)");
}

struct GenOptions {
  std::string out_path;
  std::uint32_t channels = 1;
  std::uint64_t frames = 0;
  SignalKind kind = SignalKind::noise;
  std::uint64_t seed = 0;
  bool allow_empty = false;
};

namespace detail {

// Frame generator with all randomness drawn in stream order, so output for a
// seed does not depend on the chunk size.
class SignalSource {
 public:
  SignalSource(const GenOptions& opt, std::ostream& events) : opt_(opt), rng_(opt.seed), events_(events) {
    const std::size_t H = opt.channels;
    if (opt.kind == SignalKind::sine_mix) {
      for (std::size_t h = 0; h < H; ++h) {
        for (int c = 0; c < 3; ++c) {
          const double u = sts::detail::uniform01(rng_);
          const double freq = std::exp(std::log(1.0 / 1000.0) + u * (std::log(1.0 / 8.0) - std::log(1.0 / 1000.0)));
          tones_.push_back({sts::detail::standard_normal(rng_), 2.0 * std::numbers::pi * freq,
                            2.0 * std::numbers::pi * sts::detail::uniform01(rng_)});
        }
      }
    }
    means_.assign(H, 0.0);
  }

  void fill(Grid<double>& frames, std::uint64_t first) {
    const std::size_t H = frames.rows();
    for (std::size_t k = 0; k < frames.cols(); ++k) {
      const std::uint64_t t = first + k;
      switch (opt_.kind) {
        case SignalKind::noise:
          for (std::size_t h = 0; h < H; ++h) frames(h, k) = sts::detail::standard_normal(rng_);
          break;
        case SignalKind::sine_mix:
          for (std::size_t h = 0; h < H; ++h) {
            double v = 0.0;
            for (int c = 0; c < 3; ++c) {
              const Tone& tn = tones_[h * 3 + c];
              v += tn.amplitude * std::sin(tn.omega * static_cast<double>(t) + tn.phase);
            }
            frames(h, k) = v + 0.1 * sts::detail::standard_normal(rng_);
          }
          break;
        case SignalKind::piecewise_events:
          if (t == next_change_) {
            if (t != 0) events_ << "change_point " << t << '\n';
            for (double& m : means_) m = 2.0 * sts::detail::standard_normal(rng_);
            next_change_ = t + 16 + rng_() % 497;
          }
          for (std::size_t h = 0; h < H; ++h) frames(h, k) = means_[h] + 0.25 * sts::detail::standard_normal(rng_);
          break;
      }
    }
  }

 private:
  struct Tone {
    double amplitude, omega, phase;
  };
  GenOptions opt_;
  std::mt19937_64 rng_;
  std::ostream& events_;
  std::vector<Tone> tones_;
  std::vector<double> means_;
  std::uint64_t next_change_ = 0;
};

inline void write_rows(std::ostream& os, const std::vector<Emission>& emissions) {
  char buf[96];
  for (const Emission& e : emissions) {
    for (std::size_t h = 0; h < e.values.size(); ++h) {
      int n;
      if (e.bucket) {
        n = std::snprintf(buf, sizeof buf, "%llu,%u,%zu,%.17g\n", static_cast<unsigned long long>(e.position),
                          *e.bucket, h, e.values[h]);
      } else {
        n = std::snprintf(buf, sizeof buf, "%llu,,%zu,%.17g\n", static_cast<unsigned long long>(e.position), h,
                          e.values[h]);
      }
      os.write(buf, n);
    }
  }
}

}  // namespace detail

inline int cmd_gen(const GenOptions& opt, std::ostream& out, std::ostream& err) {
  if (opt.channels == 0) throw ConfigError("gen: channels must be >= 1");
  if (opt.frames == 0 && !opt.allow_empty) throw ConfigError("gen: zero frames requires --allow-empty");
  StreamWriter writer(opt.out_path, {opt.channels, opt.frames});
  detail::SignalSource source(opt, err);
  constexpr std::size_t kChunk = 1 << 14;
  Grid<double> frames;
  for (std::uint64_t t = 0; t < opt.frames; t += kChunk) {
    const std::size_t n = static_cast<std::size_t>(std::min<std::uint64_t>(kChunk, opt.frames - t));
    if (frames.cols() != n) frames = Grid<double>(opt.channels, n);
    source.fill(frames, t);
    writer.write(frames);
  }
  writer.close();
  out << "frames " << writer.frames_written() << '\n';
  return kExitOk;
}

struct RunOptions {
  std::string config_path;
  std::string in_path;
  std::string out_path;
  std::optional<std::string> resume_path;
  std::optional<std::string> save_state_path;
  // Stop after this many segments without closing the session, as if the
  // run had been interrupted. Used together with --save-state.
  std::optional<std::uint64_t> stop_after_segments;
};

struct RunSummary {
  std::uint64_t frames = 0;
  std::uint64_t segments = 0;
  std::uint64_t rows = 0;
  bool interrupted = false;
};

inline RunSummary run_stream(const RunOptions& opt) {
  const RunConfig cfg = load_run_config(opt.config_path);
  StreamReader reader(opt.in_path);
  if (reader.header().channels != cfg.channels) {
    throw FormatError("channels",
                      "stream has " + std::to_string(reader.header().channels) + " channels, config expects " +
                          std::to_string(cfg.channels),
                      8);
  }
  std::optional<std::uint64_t> total = cfg.declared_total;
  if (!total && reader.header().frame_count != 0) total = reader.header().frame_count;

  auto params = std::make_shared<const DiscreteParams>(discretize(init_s4d_lin(cfg.ssm())));
  Session session(params, {cfg.segment_len, true}, cfg.readout_policy, total);

  if (opt.resume_path) {
    TransferState state = read_checkpoint_file(*opt.resume_path, *params);
    const std::uint64_t p = state.position;
    const bool at_end = reader.header().frame_count != 0 && p == reader.header().frame_count;
    if (p % cfg.segment_len != 0 && !at_end) {
      throw FormatError("position", "checkpoint position " + std::to_string(p) + " is not on a segment boundary", 16);
    }
    session.restore(std::move(state));
    reader.seek_frame(p);
  }

  std::ofstream csv(opt.out_path, std::ios::binary | std::ios::trunc);
  if (!csv) throw Error("cannot open output: " + opt.out_path);
  if (!opt.resume_path) csv << "position,bucket,channel,value\n";

  RunSummary summary;
  Grid<double> segment;
  while (true) {
    if (opt.stop_after_segments && summary.segments == *opt.stop_after_segments) {
      summary.interrupted = true;
      break;
    }
    const std::size_t n = reader.read(cfg.segment_len, segment);
    if (n == 0) break;
    const auto emissions = session.process_segment(segment);
    detail::write_rows(csv, emissions);
    summary.rows += emissions.size() * cfg.channels;
    summary.frames += n;
    ++summary.segments;
  }
  if (!summary.interrupted) {
    const auto emissions = session.close();
    detail::write_rows(csv, emissions);
    summary.rows += emissions.size() * cfg.channels;
  }
  csv.close();
  if (!csv) throw Error("failed writing output: " + opt.out_path);
  if (opt.save_state_path) write_checkpoint_file(*opt.save_state_path, session.state());
  return summary;
}

inline int cmd_run(const RunOptions& opt, std::ostream& log) {
  alloc::PeakScope scope;
  const RunSummary s = run_stream(opt);
  log << "frames " << s.frames << " segments " << s.segments << " rows " << s.rows
      << (s.interrupted ? " (stopped early)" : "") << '\n';
  if (alloc::active()) log << "peak_heap_bytes " << scope.peak_bytes() << '\n';
  return kExitOk;
}

inline int cmd_verify(const verify::Options& opt, std::ostream& out) {
  const verify::Report report = verify::run(opt, &out);
  verify::print_table(out, report);
  const bool ok = report.all_pass();
  out << (ok ? "verify: all properties hold\n" : "verify: FAILED\n");
  return ok ? kExitOk : kExitVerifyFailed;
}

inline int cmd_bench(const bench::ScalingOptions& opt, std::ostream& csv, std::ostream& log) {
  const auto records = bench::run_scaling(opt);
  bench::write_csv(csv, records);
  log << "# FLOP counts are an analytic model of the sequence-mixing core only\n";
  for (bench::Method m : opt.methods) {
    if (const auto slope = bench::loglog_slope(records, m)) {
      log << "# log-log wall-time slope " << bench::method_name(m) << ": " << *slope << '\n';
    }
  }
  return kExitOk;
}

}  // namespace sts::cli
