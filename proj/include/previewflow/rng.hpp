#pragma once

#include <array>
#include <cstdint>

namespace pflow {

// Named random streams. Every consumer of randomness draws from its own
// stream so that e.g. changing the candidate permutations never shifts the
// initial noise of a seed.
namespace streams {
inline constexpr std::uint64_t kNoise = 1;
inline constexpr std::uint64_t kFamily = 2;
inline constexpr std::uint64_t kCondition = 3;
inline constexpr std::uint64_t kData = 4;
inline constexpr std::uint64_t kInit = 5;
inline constexpr std::uint64_t kWarpNoise = 6;
inline constexpr std::uint64_t kRandomSelect = 7;
inline constexpr std::uint64_t kProbe = 8;
inline constexpr std::uint64_t kTest = 99;
}  // namespace streams

/// Counter-based generator (Philox4x32-10). The output sequence depends only
/// on (seed, stream) and the number of draws, never on the platform's
/// standard library.
class SeededRng {
 public:
  SeededRng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  /// Uniform in the open interval (0, 1), 53-bit resolution.
  double uniform();
  /// Standard normal via Box-Muller; caches the second variate.
  double normal();
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace pflow
