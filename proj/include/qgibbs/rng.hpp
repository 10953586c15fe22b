#pragma once
#include <cstdint>
#include <cmath>

namespace qgibbs {

// Counter-free deterministic substream RNG.
//
// Every stream is keyed by (master seed, trajectory index, stream id) through
// splitmix64 chaining, so trajectory k always sees the same random sequence no
// matter how trajectories are scheduled across workers. Independent substreams
// (initial state, coupling geometry, randomization depth, measurements) keep
// draw counts from interfering between protocol stages.
enum class Stream : std::uint64_t {
  init = 1,
  geometry = 2,
  reset_depth = 3,
  measure = 4,
  generic = 5,
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class SubstreamRng {
 public:
  SubstreamRng(std::uint64_t master_seed, std::uint64_t trajectory, Stream s) {
    // Fold the three keys through the mixer so nearby seeds decorrelate.
    state_ = master_seed;
    (void)splitmix64(state_);
    state_ ^= 0x9e3779b97f4a7c15ULL * (trajectory + 1);
    (void)splitmix64(state_);
    state_ ^= 0xd1b54a32d192ed03ULL * static_cast<std::uint64_t>(s);
    (void)splitmix64(state_);
  }

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform in [0,1) with 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in (0,1] — safe under log().
  double next_double_open() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Standard normal via Box–Muller (pair cached).
  double next_gaussian() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = next_double_open();
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(phi);
    have_cached_ = true;
    return r * std::cos(phi);
  }

 private:
  std::uint64_t state_ = 0;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace qgibbs
