#ifndef TIDE_RNG_HPP
#define TIDE_RNG_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace tide {

/// Deterministic random source with fixed-algorithm distributions.
///
/// The standard library leaves distribution algorithms implementation
/// defined, which breaks seed reproducibility across compilers. This class
/// pins both the generator (splitmix64) and the transforms (53-bit uniform,
/// Box-Muller normal), so a seed identifies one stream of draws everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed + kGolden) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += kGolden);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform draw in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; the spare value is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * kPi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Uniform integer in [0, n). Modulo bias is negligible for n << 2^64.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
    return next_u64() % n;
  }

  /// Fisher-Yates shuffle driven by this stream.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Child stream derived from the current state; advances this stream once.
  Rng fork() { return Rng(next_u64()); }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
  static constexpr double kPi = 3.14159265358979323846;

  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Stable sub-seed for a named purpose (init, masks, shuffling, noise).
/// Keeps consumers independent: inserting a draw in one stream does not
/// shift any other.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  Rng r(seed ^ (0xd1342543de82ef95ULL * (tag + 1)));
  return r.next_u64();
}

}  // namespace tide

#endif  // TIDE_RNG_HPP
