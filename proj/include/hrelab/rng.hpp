#pragma once

#include <cmath>
#include <cstdint>

namespace hrelab {

inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Counter-derived random stream: the state is a pure function of
/// (seed, stream), so replica streams are identical no matter how work is
/// scheduled across threads. Core generator is xoshiro256++.
class StreamRng {
 public:
  explicit StreamRng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::uint64_t x = seed;
    (void)splitmix64(x);
    x ^= 0xD1B54A32D192ED03ULL * (stream + 0x632BE59BD9B4E019ULL);
    for (auto& s : state_) s = splitmix64(x);
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform on [0,1), 53-bit resolution.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on (0,1); never returns an endpoint.
  double next_unit_open() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  bool next_bit() { return (next_u64() >> 63) != 0; }

  /// Standard normal via the polar (Marsaglia) method, one spare cached.
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * next_unit() - 1.0;
      v = 2.0 * next_unit() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// Stream-id namespaces, so that auxiliary draws (e.g. an independent copy of
/// a sequence for symmetrization) never collide with primary replica streams.
enum class StreamRole : std::uint64_t {
  primary = 0,
  secondary = 1,
  permutation = 2,
  scratch = 3,
};

inline std::uint64_t stream_id(std::uint64_t replica, StreamRole role = StreamRole::primary) {
  return (static_cast<std::uint64_t>(role) << 48) | (replica & 0xFFFFFFFFFFFFULL);
}

}  // namespace hrelab
