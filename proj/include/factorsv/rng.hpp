#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace fsv {

// Identifies one reproducible draw stream. Same (seed, stream_id) on the same
// build gives the same sequence; distinct stream_ids give independent streams
// that may be consumed concurrently.
struct RngHandle {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
};

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t stream_id) {
  std::uint64_t x = seed;
  const std::uint64_t a = splitmix64(x);
  x ^= 0xD1B54A32D192ED03ULL * (stream_id + 1);
  const std::uint64_t b = splitmix64(x);
  return a ^ (b + 0x632BE59BD9B4E019ULL + (a << 6) + (a >> 2));
}
}  // namespace detail

// Single-owner pseudo-random stream. Uniform bits come from mt19937_64; all
// variate transforms are done here so sequences are identical across standard
// library implementations.
class Rng {
 public:
  explicit Rng(RngHandle handle)
      : engine_(detail::derive_stream_seed(handle.seed, handle.stream_id)) {}
  Rng(std::uint64_t seed, std::uint64_t stream_id) : Rng(RngHandle{seed, stream_id}) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on the open interval (0,1); safe under log() at both ends.
  double u01() {
    return (static_cast<double>(engine_() >> 12) + 0.5) * 0x1.0p-52;
  }

  // Standard normal via Box-Muller; second value of each pair is cached.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = u01();
    const double u2 = u01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 6.283185307179586476925286766559 * u2;
    cached_ = radius * std::sin(angle);
    have_cached_ = true;
    return radius * std::cos(angle);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

 private:
  std::mt19937_64 engine_;
  bool have_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace fsv
