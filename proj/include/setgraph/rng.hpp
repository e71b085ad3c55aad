#pragma once

#include <cstdint>

namespace setgraph {

// splitmix64 generator. Streams are derived from (seed, stream id) so that
// per-seed work can be distributed across threads and still reproduce the
// single-threaded result bit for bit.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // decorrelate trivially related seeds
    next_u64();
    next_u64();
  }

  static Rng stream(std::uint64_t seed, std::uint64_t stream_id) {
    return Rng(seed + 0x9E3779B97F4A7C15ULL * (stream_id + 1));
  }

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, bound); bound must be > 0
  std::uint32_t next_below(std::uint32_t bound) {
    return static_cast<std::uint32_t>(next_u64() % bound);
  }

  // uniform in [0, 1)
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

}  // namespace setgraph
