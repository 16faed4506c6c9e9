#pragma once

#include <cstdint>
#include <random>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

namespace drate {

/// Fixed stream identifiers so that independent consumers of one seed never
/// share random numbers.
enum class StreamKind : std::uint64_t {
  Replicate = 1,
  Calibration = 2,
  EfficiencyOracle = 3,
  Verification = 4,
};

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Deterministic random stream keyed by (seed, kind, index).
///
/// mt19937_64 has a standard-mandated output sequence and the Boost
/// distributions are implemented in headers, so draws are identical across
/// standard libraries for a given Boost version.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, StreamKind kind, std::uint64_t index = 0)
      : engine_(derive(seed, kind, index)) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  bool bernoulli(double p) { return uniform() < p; }

 private:
  static std::uint64_t derive(std::uint64_t seed, StreamKind kind, std::uint64_t index) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ static_cast<std::uint64_t>(kind));
    return splitmix64(h ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
  }

  std::mt19937_64 engine_;
  boost::random::normal_distribution<double> normal_{0.0, 1.0};
  boost::random::uniform_01<double> uniform_;
};

}  // namespace drate
