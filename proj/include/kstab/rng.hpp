#ifndef KSTAB_RNG_HPP
#define KSTAB_RNG_HPP

#include <cstdint>

namespace kstab {

// Counter-based generator: every variate is a pure function of
// (seed, stream, counter), so parallel replications can draw in any
// order and still produce identical streams.
namespace rng {

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t keyed(std::uint64_t seed, std::uint64_t stream,
                           std::uint64_t counter) {
  std::uint64_t h = mix64(seed ^ 0x6a09e667f3bcc908ull);
  h = mix64(h ^ mix64(stream));
  h = mix64(h ^ mix64(counter));
  return h;
}

// uniform in [0,1), 53-bit resolution
inline double uniform(std::uint64_t seed, std::uint64_t stream,
                      std::uint64_t counter) {
  return static_cast<double>(keyed(seed, stream, counter) >> 11) *
         0x1.0p-53;
}

// derive a child seed, used to hand a sub-experiment its own stream space
inline std::uint64_t derive(std::uint64_t seed, std::uint64_t tag) {
  return mix64(seed ^ mix64(tag));
}

}  // namespace rng

}  // namespace kstab

#endif  // KSTAB_RNG_HPP
