#pragma once

#include <cstdint>
#include <random>

namespace dnc {

// Named substreams. Each gets its own engine seeded from (seed, stream)
// through splitmix64, so adding draws to one stream never shifts another.
enum class Stream : std::uint64_t {
  anchors = 0,
  noise = 1,
  init = 2,
  power = 3,
  quadratic = 4,
  sampling = 5,
};

std::uint64_t splitmix64(std::uint64_t& state);

class Rng {
 public:
  Rng(std::uint64_t seed, Stream stream);
  Rng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Standard normal, Box-Muller.
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dnc
