#ifndef MFLD_RNG_HPP
#define MFLD_RNG_HPP

// Counter-based random streams. A stream is identified by
// (seed, iteration, index, tag); the draws it yields depend on nothing else,
// so particle updates can be evaluated in any order and still reproduce.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace mfld {

enum class StreamTag : std::uint64_t {
  init = 1,
  noise = 2,
  sampler = 3,
  importance = 4,
  teacher = 5,
  data = 6,
  jitter = 7,
  test = 99,
};

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t combine(std::uint64_t h, std::uint64_t v) {
  return splitmix64(h ^ splitmix64(v + 0x632BE59BD9B4E019ULL));
}

}  // namespace detail

/// A finite sequence of draws addressed by a 64-bit counter.
class Stream {
 public:
  explicit constexpr Stream(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64() { return detail::splitmix64(key_ ^ detail::splitmix64(counter_++)); }

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  void fill_normal(std::span<double> out, double scale = 1.0) {
    for (double& v : out) v = scale * normal();
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Root of all randomness for a run.
struct RngSpec {
  std::uint64_t seed = 2022;

  Stream stream(std::int64_t iteration, std::uint64_t index, StreamTag tag) const {
    std::uint64_t h = detail::splitmix64(seed);
    h = detail::combine(h, static_cast<std::uint64_t>(iteration));
    h = detail::combine(h, index);
    h = detail::combine(h, static_cast<std::uint64_t>(tag));
    return Stream(h);
  }
};

}  // namespace mfld

#endif  // MFLD_RNG_HPP
