// sts_cli: stream generation, streaming evaluation with checkpoint/resume,
// the equivalence verification suite, and the scaling benchmark.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "sts/alloc_tracker_impl.hpp"
#include "sts/cli.hpp"

namespace {

std::vector<std::size_t> default_sweep() { return {1u << 12, 1u << 14, 1u << 16}; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming diagonal state-space engine"};
  app.require_subcommand(1);

  sts::cli::GenOptions gen;
  std::string gen_kind = "noise";
  auto* gen_cmd = app.add_subcommand("gen", "Write a synthetic StreamFile");
  gen_cmd->add_option("out", gen.out_path, "Output path")->required();
  gen_cmd->add_option("-H,--channels", gen.channels, "Channels")->required();
  gen_cmd->add_option("-L,--frames", gen.frames, "Frame count")->required();
  gen_cmd->add_option("--kind", gen_kind, "noise | sine_mix | piecewise_events");
  gen_cmd->add_option("--seed", gen.seed, "Generator seed");
  gen_cmd->add_flag("--allow-empty", gen.allow_empty, "Permit a header-only file with zero frames");

  sts::cli::RunOptions run;
  std::string resume, save_state;
  std::uint64_t stop_after = 0;
  auto* run_cmd = app.add_subcommand("run", "Stream a file through a session and write emissions as CSV");
  run_cmd->add_option("config", run.config_path, "RunConfig JSON")->required();
  run_cmd->add_option("input", run.in_path, "StreamFile")->required();
  run_cmd->add_option("output", run.out_path, "CSV output")->required();
  auto* resume_opt = run_cmd->add_option("--resume", resume, "Continue from a StateCheckpoint");
  auto* save_opt = run_cmd->add_option("--save-state", save_state, "Write a StateCheckpoint when the run ends");
  auto* stop_opt = run_cmd->add_option("--stop-after", stop_after, "Stop after this many segments (simulated interruption)");

  sts::verify::Options verify;
  std::vector<std::size_t> sizes;
  std::vector<std::uint64_t> seeds;
  std::string sabotage;
  auto* verify_cmd = app.add_subcommand("verify", "Run the path-equivalence property suite");
  verify_cmd->add_option("--sizes", sizes, "Sequence lengths");
  verify_cmd->add_option("--seeds", seeds, "System seeds");
  verify_cmd->add_option("--sabotage", sabotage, "Fault injection: off-by-one")
      ->check(CLI::IsMember({"off-by-one"}));

  sts::bench::ScalingOptions bench;
  bench.lengths = default_sweep();
  std::vector<std::string> methods;
  std::string bench_out;
  auto* bench_cmd = app.add_subcommand("bench", "Measure scaling of the SSM paths and the attention baseline");
  bench_cmd->add_option("--lengths", bench.lengths, "Ascending L sweep");
  bench_cmd->add_option("--methods", methods, "recurrent fft_full sts_chunked attention");
  bench_cmd->add_option("-M,--segment-len", bench.segment_len, "Segment length for sts_chunked");
  bench_cmd->add_option("-d,--attn-dim", bench.attn_dim, "Attention head dimension");
  bench_cmd->add_option("-H,--channels", bench.config.channels, "SSM channels");
  bench_cmd->add_option("-N,--state-size", bench.config.state_size, "SSM state size");
  bench_cmd->add_option("--repetitions", bench.repetitions, "Timed repetitions (median reported, >= 3)");
  bench_cmd->add_option("--memory-ceiling", bench.memory_ceiling, "Bytes; larger attention runs are skipped");
  bench_cmd->add_option("--seed", bench.input_seed, "Input seed");
  bench_cmd->add_flag("--parallel", bench.parallel, "Run methods concurrently");
  bench_cmd->add_option("-o,--output", bench_out, "CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : sts::cli::kExitUsage;
  }

  try {
    if (*gen_cmd) {
      gen.kind = sts::cli::parse_kind(gen_kind);
      return sts::cli::cmd_gen(gen, std::cout, std::cerr);
    }
    if (*run_cmd) {
      if (*resume_opt) run.resume_path = resume;
      if (*save_opt) run.save_state_path = save_state;
      if (*stop_opt) run.stop_after_segments = stop_after;
      return sts::cli::cmd_run(run, std::cerr);
    }
    if (*verify_cmd) {
      if (!sizes.empty()) verify.sizes = sizes;
      if (!seeds.empty()) verify.seeds = seeds;
      if (!sabotage.empty()) verify.convention = sts::ExponentConvention::shifted;
      return sts::cli::cmd_verify(verify, std::cout);
    }
    if (*bench_cmd) {
      if (!methods.empty()) {
        bench.methods.clear();
        for (const auto& m : methods) bench.methods.push_back(sts::bench::parse_method(m));
      }
      if (bench_out.empty()) return sts::cli::cmd_bench(bench, std::cout, std::cerr);
      std::ofstream csv(bench_out);
      if (!csv) throw sts::Error("cannot open " + bench_out);
      return sts::cli::cmd_bench(bench, csv, std::cerr);
    }
  } catch (const sts::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return sts::cli::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return sts::cli::kExitUsage;
  }
  return sts::cli::kExitUsage;
}
