#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace caf {

// splitmix64 finalizer (Vigna). Used both as the sequential generator step
// and as a stateless key mixer for counter-based draws, so every stream in
// the project is reproducible from (seed, tag, counter) alone.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t a,
                                std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t k = mix64(seed);
  k = mix64(k ^ a);
  k = mix64(k ^ b);
  k = mix64(k ^ c);
  return k;
}

namespace detail {
// [0,1) from the top 53 bits.
inline double unit_from_bits(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}
// (0,1] so log() is always defined.
inline double unit_pos_from_bits(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}
}  // namespace detail

// Standard normal from a key and counter, via Box-Muller on two mixed words.
inline double keyed_normal(std::uint64_t key, std::uint64_t counter) {
  const double u1 = detail::unit_pos_from_bits(mix64(key ^ mix64(2 * counter + 1)));
  const double u2 = detail::unit_from_bits(mix64(key ^ mix64(2 * counter + 2)));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Sequential deterministic generator. Draw counts are fixed per call
// (normal() always consumes two words) so streams never depend on cached
// state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  double uniform() { return detail::unit_from_bits(next()); }

  double normal() {
    const double u1 = detail::unit_pos_from_bits(next());
    const double u2 = detail::unit_from_bits(next());
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Unbiased integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = bound * ((~std::uint64_t{0}) / bound);
    std::uint64_t v = next();
    while (v >= limit) v = next();
    return v % bound;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  Rng substream(std::uint64_t tag) const { return Rng(stream_key(state_, tag)); }

 private:
  std::uint64_t state_;
};

}  // namespace caf
