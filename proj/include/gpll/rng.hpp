#pragma once

#include <cmath>
#include <cstdint>

namespace gpll {

// SplitMix64 finalizer. Used both as a seed mixer and as the core of the
// counter-based generator below.
inline constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Derive a child seed from (seed, stream). Chaining calls gives a seed tree:
// derive_seed(derive_seed(s, rep), block) etc. Collision-free enough for
// experiment replication and stable across platforms.
inline constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix64(seed ^ (0x9e3779b97f4a7c15ull + mix64(stream + 0x853c49e6748fea9bull)));
}

// Counter-based generator: draw i of a stream is a pure function of
// (key, i), so results cannot depend on scheduling. Gaussian variates use
// the Marsaglia polar method (sqrt/log only, no trig) for cross-platform
// value stability.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(derive_seed(seed, stream)) {}

  std::uint64_t next_u64() noexcept { return mix64(key_ + counter_++ * 0x9e3779b97f4a7c15ull); }

  // Uniform on the open interval (0,1); never returns 0 or 1.
  double uniform01() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double gaussian() noexcept {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    have_spare_ = true;
    return u * f;
  }

  // Fair sign in {-1.0, +1.0}.
  double sign() noexcept { return (next_u64() & 1ull) ? 1.0 : -1.0; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace gpll
