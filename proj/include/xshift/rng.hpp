#ifndef XSHIFT_RNG_HPP_
#define XSHIFT_RNG_HPP_

#include <boost/math/distributions/normal.hpp>

#include <cstdint>
#include <random>
#include <string_view>

namespace xshift {

// Seed splitting rule:
//   child = splitmix64(parent ^ splitmix64(fnv1a64(label)))
// and for indexed streams the index is folded in with one more splitmix64 round.
// The underlying engine is std::mt19937_64, whose output sequence is fixed by
// the standard, so streams are identical across platforms and compilers.

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::string_view label) {
  return splitmix64(parent ^ splitmix64(fnv1a64(label)));
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::string_view label,
                                    std::uint64_t index) {
  return splitmix64(derive_seed(parent, label) + splitmix64(index));
}

/// Deterministic stream of uniforms and standard normals.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on the open interval (0, 1); 53 bits of resolution.
  double uniform() {
    const std::uint64_t bits = engine_() >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal by inverse-CDF of one uniform draw.
  double normal() {
    static const boost::math::normal_distribution<double> kStd(0.0, 1.0);
    return boost::math::quantile(kStd, uniform());
  }

  /// Uniform integer in [0, n) by rejection, exact for any n > 0.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace xshift

#endif  // XSHIFT_RNG_HPP_
