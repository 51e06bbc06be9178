#pragma once

// Heap accounting for the fixed-memory checks. Counters are only fed when a
// translation unit of the final binary includes alloc_tracker_impl.hpp, which
// replaces the global operator new/delete; otherwise `active()` is false and
// every measurement reads zero.

#include <atomic>
#include <cstddef>
#include <cstdint>

namespace sts::alloc {

inline std::atomic<std::int64_t> g_current{0};
inline std::atomic<std::int64_t> g_peak{0};
inline std::atomic<bool> g_active{false};

inline bool active() noexcept { return g_active.load(std::memory_order_relaxed); }
inline std::int64_t current_bytes() noexcept { return g_current.load(std::memory_order_relaxed); }

inline void on_alloc(std::size_t n) noexcept {
  const auto now = g_current.fetch_add(static_cast<std::int64_t>(n), std::memory_order_relaxed) +
                   static_cast<std::int64_t>(n);
  auto prev = g_peak.load(std::memory_order_relaxed);
  while (now > prev && !g_peak.compare_exchange_weak(prev, now, std::memory_order_relaxed)) {
  }
}

inline void on_free(std::size_t n) noexcept {
  g_current.fetch_sub(static_cast<std::int64_t>(n), std::memory_order_relaxed);
}

// Peak heap growth above the level at construction.
class PeakScope {
 public:
  PeakScope() noexcept : base_(current_bytes()) { g_peak.store(base_, std::memory_order_relaxed); }
  std::uint64_t peak_bytes() const noexcept {
    const auto p = g_peak.load(std::memory_order_relaxed) - base_;
    return p > 0 ? static_cast<std::uint64_t>(p) : 0;
  }

 private:
  std::int64_t base_;
};

}  // namespace sts::alloc
