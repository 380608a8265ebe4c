#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace fsv::detail {

inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 14695981039346656037ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s, std::uint64_t h = 14695981039346656037ULL) {
  return fnv1a64(s.data(), s.size(), h);
}

}  // namespace fsv::detail
