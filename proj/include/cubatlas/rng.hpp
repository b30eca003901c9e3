// Platform-independent pseudorandom numbers.
//
// SplitMix64 (Steele, Lea & Flood 2014) is fully specified by its constants,
// so a seed produces the same stream on every compiler and standard
// library. Bounded integers use Lemire's multiply-shift with rejection,
// which is exactly uniform.

#ifndef CUBATLAS_RNG_HPP_
#define CUBATLAS_RNG_HPP_

#include <cstdint>
#include <span>
#include <utility>

namespace cubatlas {

inline constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class SplitMix64 {
public:
  static constexpr std::uint64_t golden = 0x9e3779b97f4a7c15ULL;

  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += golden;
    return splitmix64_mix(state_);
  }

  // uniform in [0, bound)
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0)
      return 0;
    unsigned __int128 m = static_cast<unsigned __int128>(next()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(next()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // uniform in [0, 1) with 53 random bits
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Fisher-Yates, last element first.
  template <typename T>
  void shuffle(std::span<T> v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      auto j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(v[i - 1], v[j]);
    }
  }

private:
  std::uint64_t state_;
};

// Independent stream key derived from a base seed and a small tag.
inline constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  return splitmix64_mix(base ^ splitmix64_mix(tag + SplitMix64::golden));
}

} // namespace cubatlas

#endif
