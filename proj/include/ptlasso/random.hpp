#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace ptlasso {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Named RNG streams of one replication. Each stream gets its own seed so
/// that, e.g., privacy noise draws never shift the context stream.
enum class Stream : std::uint64_t {
  kInstance = 1,
  kEnvironment = 2,
  kMechanism = 3,
  kPolicy = 4,
  kProbe = 5,
};

/// Counter-based seed: mix(mix(mix(base) ^ replication) ^ stream).
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t replication,
                                    Stream stream) {
  return mix64(mix64(mix64(base) ^ replication) ^ static_cast<std::uint64_t>(stream));
}

inline Rng make_rng(std::uint64_t base, std::uint64_t replication, Stream stream) {
  return Rng(derive_seed(base, replication, stream));
}

/// Uniform draw on the open interval (0, 1).
inline double uniform_open(Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = 0.0;
  do {
    u = unif(rng);
  } while (u <= 0.0);
  return u;
}

}  // namespace ptlasso
