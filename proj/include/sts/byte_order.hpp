#pragma once

// Explicit little-endian encoding, independent of host byte order.

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <type_traits>
#include <vector>

namespace sts::le {

template <typename U>
void put(std::vector<std::uint8_t>& out, U value) {
  static_assert(std::is_unsigned_v<U>);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

template <typename U>
void store(std::uint8_t* dst, U value) {
  static_assert(std::is_unsigned_v<U>);
  for (std::size_t i = 0; i < sizeof(U); ++i) dst[i] = static_cast<std::uint8_t>(value >> (8 * i));
}

template <typename U>
U load(const std::uint8_t* src) {
  static_assert(std::is_unsigned_v<U>);
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(src[i]) << (8 * i);
  return v;
}

inline void put_f64(std::vector<std::uint8_t>& out, double v) { put(out, std::bit_cast<std::uint64_t>(v)); }
inline double load_f64(const std::uint8_t* src) { return std::bit_cast<double>(load<std::uint64_t>(src)); }
inline void store_f32(std::uint8_t* dst, float v) { store(dst, std::bit_cast<std::uint32_t>(v)); }
inline float load_f32(const std::uint8_t* src) { return std::bit_cast<float>(load<std::uint32_t>(src)); }

}  // namespace sts::le
