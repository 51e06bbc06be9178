#pragma once

// StreamFile layout (all little-endian):
//   0  "STSS"         4 bytes
//   4  version        u32 = 1
//   8  channels H     u32
//   12 frame_count    u64 (0 = open-ended, read to end of stream)
//   20 frames         H x f32 each, tightly packed
//
// The reader pulls a bounded number of frames per call so memory use does not
// depend on the stream length.

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "sts/byte_order.hpp"
#include "sts/error.hpp"
#include "sts/grid.hpp"

namespace sts {

inline constexpr std::array<char, 4> kStreamMagic{'S', 'T', 'S', 'S'};
inline constexpr std::uint32_t kStreamVersion = 1;
inline constexpr std::size_t kStreamHeaderBytes = 20;

struct StreamHeader {
  std::uint32_t channels = 0;
  std::uint64_t frame_count = 0;
};

class StreamWriter {
 public:
  StreamWriter(const std::string& path, StreamHeader header) : header_(header), path_(path) {
    if (header_.channels == 0) throw ConfigError("stream must have at least one channel");
    file_.open(path, std::ios::binary | std::ios::trunc);
    if (!file_) throw Error("cannot open stream for writing: " + path);
    std::vector<std::uint8_t> head(kStreamMagic.begin(), kStreamMagic.end());
    le::put<std::uint32_t>(head, kStreamVersion);
    le::put<std::uint32_t>(head, header_.channels);
    le::put<std::uint64_t>(head, header_.frame_count);
    file_.write(reinterpret_cast<const char*>(head.data()), static_cast<std::streamsize>(head.size()));
  }

  // Appends frames from a [H, m] grid, column by column.
  void write(const Grid<double>& frames) {
    if (frames.rows() != header_.channels) throw ContractError("StreamWriter: channel mismatch");
    const std::size_t H = frames.rows();
    buf_.resize(frames.cols() * H * 4);
    std::uint8_t* p = buf_.data();
    for (std::size_t t = 0; t < frames.cols(); ++t) {
      for (std::size_t h = 0; h < H; ++h, p += 4) le::store_f32(p, static_cast<float>(frames(h, t)));
    }
    file_.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
    written_ += frames.cols();
  }

  std::uint64_t frames_written() const noexcept { return written_; }

  void close() {
    if (!file_.is_open()) return;
    if (header_.frame_count != 0 && written_ != header_.frame_count) {
      throw ContractError("StreamWriter: wrote " + std::to_string(written_) + " frames, header declares " +
                          std::to_string(header_.frame_count));
    }
    file_.close();
    if (!file_) throw Error("failed writing stream: " + path_);
  }

 private:
  StreamHeader header_;
  std::string path_;
  std::ofstream file_;
  std::vector<std::uint8_t> buf_;
  std::uint64_t written_ = 0;
};

class StreamReader {
 public:
  explicit StreamReader(const std::string& path) : file_(path, std::ios::binary) {
    if (!file_) throw Error("cannot open stream: " + path);
    std::array<std::uint8_t, kStreamHeaderBytes> head{};
    file_.read(reinterpret_cast<char*>(head.data()), head.size());
    const auto got = static_cast<std::size_t>(file_.gcount());
    auto need = [&](std::size_t end, const char* field, std::int64_t at) {
      if (got < end) throw FormatError(field, "truncated stream header", at);
    };
    need(4, "magic", 0);
    if (std::memcmp(head.data(), kStreamMagic.data(), 4) != 0) throw FormatError("magic", "expected \"STSS\"", 0);
    need(8, "version", 4);
    if (const auto v = le::load<std::uint32_t>(head.data() + 4); v != kStreamVersion) {
      throw FormatError("version", "unsupported version " + std::to_string(v), 4);
    }
    need(12, "channels", 8);
    header_.channels = le::load<std::uint32_t>(head.data() + 8);
    if (header_.channels == 0) throw FormatError("channels", "must be >= 1", 8);
    need(20, "frame_count", 12);
    header_.frame_count = le::load<std::uint64_t>(head.data() + 12);
  }

  const StreamHeader& header() const noexcept { return header_; }
  std::uint64_t frames_read() const noexcept { return read_; }
  std::uint64_t byte_offset() const noexcept { return kStreamHeaderBytes + read_ * frame_bytes(); }

  // Reads up to max_frames frames into `out` ([H, n], reshaped when n
  // differs). Returns n; 0 at end of stream.
  std::size_t read(std::size_t max_frames, Grid<double>& out) {
    const std::size_t H = header_.channels;
    if (header_.frame_count != 0) {
      max_frames = static_cast<std::size_t>(std::min<std::uint64_t>(max_frames, header_.frame_count - read_));
    }
    buf_.resize(max_frames * frame_bytes());
    std::size_t got = 0;
    if (max_frames > 0) {
      file_.read(reinterpret_cast<char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
      got = static_cast<std::size_t>(file_.gcount());
    }
    if (got % frame_bytes() != 0) {
      throw FormatError("payload", "partial frame at end of stream",
                        static_cast<std::int64_t>(byte_offset() + got / frame_bytes() * frame_bytes()));
    }
    const std::size_t n = got / frame_bytes();
    if (n < max_frames && header_.frame_count != 0) {
      throw FormatError("frame_count",
                        "header declares " + std::to_string(header_.frame_count) + " frames, stream ends after " +
                            std::to_string(read_ + n),
                        static_cast<std::int64_t>(kStreamHeaderBytes + (read_ + n) * frame_bytes()));
    }
    if (n == 0 && header_.frame_count != 0 && read_ == header_.frame_count) check_no_trailing_bytes();
    if (out.rows() != H || out.cols() != n) out = Grid<double>(H, n);
    const std::uint8_t* p = buf_.data();
    for (std::size_t t = 0; t < n; ++t) {
      for (std::size_t h = 0; h < H; ++h, p += 4) out(h, t) = static_cast<double>(le::load_f32(p));
    }
    read_ += n;
    return n;
  }

  // Positions the reader at frame `frame` from the start of the payload.
  void seek_frame(std::uint64_t frame) {
    if (header_.frame_count != 0 && frame > header_.frame_count) {
      throw FormatError("frame_count", "cannot seek past declared frame count",
                        static_cast<std::int64_t>(kStreamHeaderBytes));
    }
    file_.clear();
    file_.seekg(static_cast<std::streamoff>(kStreamHeaderBytes + frame * frame_bytes()));
    if (!file_) throw FormatError("payload", "seek past end of stream", static_cast<std::int64_t>(kStreamHeaderBytes));
    read_ = frame;
  }

 private:
  std::size_t frame_bytes() const noexcept { return std::size_t{header_.channels} * 4; }

  void check_no_trailing_bytes() {
    char c;
    file_.read(&c, 1);
    if (file_.gcount() != 0) {
      throw FormatError("frame_count", "payload longer than the declared frame count",
                        static_cast<std::int64_t>(byte_offset()));
    }
  }

  std::ifstream file_;
  StreamHeader header_;
  std::vector<std::uint8_t> buf_;
  std::uint64_t read_ = 0;
};

}  // namespace sts
