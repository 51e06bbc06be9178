#pragma once

// StateCheckpoint layout (all little-endian):
//   0  "STST"        4 bytes
//   4  version       u32 = 1
//   8  H             u32
//   12 N             u32
//   16 position      u64
//   24 payload       H*N x (re f64, im f64)
// Parameters are not stored; loading validates the shape against them.

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "sts/byte_order.hpp"
#include "sts/error.hpp"
#include "sts/ssm_core.hpp"

namespace sts {

inline constexpr std::array<char, 4> kCheckpointMagic{'S', 'T', 'S', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::size_t kCheckpointHeaderBytes = 24;

inline std::vector<std::uint8_t> encode_checkpoint(const TransferState& state) {
  std::vector<std::uint8_t> out;
  out.reserve(kCheckpointHeaderBytes + state.h.size() * 16);
  out.insert(out.end(), kCheckpointMagic.begin(), kCheckpointMagic.end());
  le::put<std::uint32_t>(out, kCheckpointVersion);
  le::put<std::uint32_t>(out, static_cast<std::uint32_t>(state.h.rows()));
  le::put<std::uint32_t>(out, static_cast<std::uint32_t>(state.h.cols()));
  le::put<std::uint64_t>(out, state.position);
  for (const cplx& v : state.h.flat()) {
    le::put_f64(out, v.real());
    le::put_f64(out, v.imag());
  }
  return out;
}

inline TransferState decode_checkpoint(std::span<const std::uint8_t> bytes, const DiscreteParams& params) {
  auto need = [&](std::size_t end, const char* field, std::size_t at) {
    if (bytes.size() < end) throw FormatError(field, "truncated checkpoint", static_cast<std::int64_t>(at));
  };
  need(4, "magic", 0);
  if (std::memcmp(bytes.data(), kCheckpointMagic.data(), 4) != 0) throw FormatError("magic", "expected \"STST\"", 0);
  need(8, "version", 4);
  if (const auto v = le::load<std::uint32_t>(bytes.data() + 4); v != kCheckpointVersion) {
    throw FormatError("version", "unsupported version " + std::to_string(v), 4);
  }
  need(12, "H", 8);
  const auto H = le::load<std::uint32_t>(bytes.data() + 8);
  if (H != params.channels()) {
    throw FormatError("H", "checkpoint has " + std::to_string(H) + " channels, params have " +
                               std::to_string(params.channels()), 8);
  }
  need(16, "N", 12);
  const auto N = le::load<std::uint32_t>(bytes.data() + 12);
  if (N != params.state_size()) {
    throw FormatError("N", "checkpoint has state size " + std::to_string(N) + ", params have " +
                               std::to_string(params.state_size()), 12);
  }
  need(24, "position", 16);
  TransferState s(H, N);
  s.position = le::load<std::uint64_t>(bytes.data() + 16);
  const std::size_t end = kCheckpointHeaderBytes + std::size_t{H} * N * 16;
  need(end, "payload", kCheckpointHeaderBytes);
  if (bytes.size() != end) throw FormatError("payload", "trailing bytes after payload", static_cast<std::int64_t>(end));
  const std::uint8_t* p = bytes.data() + kCheckpointHeaderBytes;
  for (cplx& v : s.h.flat()) {
    v = {le::load_f64(p), le::load_f64(p + 8)};
    p += 16;
  }
  return s;
}

inline void write_checkpoint_file(const std::string& path, const TransferState& state) {
  const auto bytes = encode_checkpoint(state);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open checkpoint for writing: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("failed writing checkpoint: " + path);
}

inline TransferState read_checkpoint_file(const std::string& path, const DiscreteParams& params) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open checkpoint: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes, params);
}

}  // namespace sts
