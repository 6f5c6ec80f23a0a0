#pragma once
// Seedable 64-bit generator (splitmix64) with explicit stream derivation so
// every consumer (weight init, dataset noise, epoch shuffling) gets its own
// reproducible stream from one user-facing seed.
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace compconv {

class SplitMix64 {
public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1), 53-bit resolution
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // uniform integer in [0, bound) without modulo bias (bound > 0)
  std::uint64_t next_below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("next_below: bound must be positive");
    std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  // standard normal via the polar method (deterministic given the stream)
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * next_double() - 1.0;
      v = 2.0 * next_double() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Stream ids used across the project.  derive_stream(seed, id) seeds an
// independent SplitMix64; the mixing step keeps nearby seeds/ids apart.
enum class Stream : std::uint64_t {
  weight_init = 1,
  data_noise = 2,
  epoch_shuffle = 3,
  split = 4,
  misc = 5,
};

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream_id) {
  SplitMix64 g(seed ^ (0xA0761D6478BD642FULL * (stream_id + 1)));
  return g.next_u64();
}

inline SplitMix64 derive_stream(std::uint64_t seed, Stream s) {
  return SplitMix64(mix_seed(seed, static_cast<std::uint64_t>(s)));
}

// substream for the i-th tensor / epoch / sample group within a stream
inline SplitMix64 derive_substream(std::uint64_t seed, Stream s, std::uint64_t index) {
  return SplitMix64(mix_seed(mix_seed(seed, static_cast<std::uint64_t>(s)), index));
}

inline void fisher_yates(std::vector<std::size_t>& idx, SplitMix64& g) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    std::size_t j = std::size_t(g.next_below(i));
    std::swap(idx[i - 1], idx[j]);
  }
}

}  // namespace compconv
