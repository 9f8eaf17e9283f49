#pragma once

#include <cstdint>
#include <random>

namespace sepfilter {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Per-path random stream. The state is derived only from (seed, stream_id),
/// so a path's draws are identical no matter how paths are scheduled across
/// workers.
class PathRng {
 public:
  PathRng(std::uint64_t seed, std::uint64_t stream_id)
      : engine_(splitmix64(splitmix64(seed) ^ splitmix64(stream_id + 1))) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace sepfilter
