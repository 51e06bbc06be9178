#pragma once

// Include in exactly one translation unit of a binary to enable heap
// accounting. Each block carries a 16-byte size prefix, which keeps the
// default new alignment.

#include <cstdlib>
#include <new>

#include "sts/alloc_tracker.hpp"

namespace sts::alloc::detail {

inline constexpr std::size_t kPrefix = 16;

[[gnu::noinline]] inline void* tracked_alloc(std::size_t n) {
  void* raw = std::malloc(n + kPrefix);
  if (!raw) return nullptr;
  *static_cast<std::size_t*>(raw) = n;
  on_alloc(n);
  return static_cast<char*>(raw) + kPrefix;
}

[[gnu::noinline]] inline void tracked_free(void* p) noexcept {
  if (!p) return;
  void* raw = static_cast<char*>(p) - kPrefix;
  on_free(*static_cast<std::size_t*>(raw));
  std::free(raw);
}

struct Activate {
  Activate() noexcept { g_active.store(true); }
};
inline Activate activate_tracking;

}  // namespace sts::alloc::detail

void* operator new(std::size_t n) {
  if (void* p = sts::alloc::detail::tracked_alloc(n)) return p;
  throw std::bad_alloc();
}
void* operator new[](std::size_t n) {
  if (void* p = sts::alloc::detail::tracked_alloc(n)) return p;
  throw std::bad_alloc();
}
void* operator new(std::size_t n, const std::nothrow_t&) noexcept { return sts::alloc::detail::tracked_alloc(n); }
void* operator new[](std::size_t n, const std::nothrow_t&) noexcept { return sts::alloc::detail::tracked_alloc(n); }
void operator delete(void* p) noexcept { sts::alloc::detail::tracked_free(p); }
void operator delete[](void* p) noexcept { sts::alloc::detail::tracked_free(p); }
void operator delete(void* p, std::size_t) noexcept { sts::alloc::detail::tracked_free(p); }
void operator delete[](void* p, std::size_t) noexcept { sts::alloc::detail::tracked_free(p); }
void operator delete(void* p, const std::nothrow_t&) noexcept { sts::alloc::detail::tracked_free(p); }
void operator delete[](void* p, const std::nothrow_t&) noexcept { sts::alloc::detail::tracked_free(p); }
