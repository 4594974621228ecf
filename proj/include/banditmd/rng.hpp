#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace banditmd {

// Counter-based generator (splitmix64 finalizer over an incrementing state).
// Streams derived via split() are statistically independent for distinct ids,
// so every (player, seed) pair can own its own reproducible stream.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1]; safe as a log() argument.
  double next_double_pos() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

  // Box-Muller, second value cached. Implemented locally so traces are
  // bit-reproducible regardless of the standard library in use.
  double next_gaussian() {
    if (has_cache_) {
      has_cache_ = false;
      return cache_;
    }
    double u1 = next_double_pos();
    double u2 = next_double();
    double rad = std::sqrt(-2.0 * std::log(u1));
    double ang = 6.283185307179586476925286766559 * u2;
    cache_ = rad * std::sin(ang);
    has_cache_ = true;
    return rad * std::cos(ang);
  }

  SplitMix64 split(std::uint64_t stream_id) const {
    // Decorrelate child state from the parent seed with one finalizer round.
    std::uint64_t z = state_ ^ (0xA0761D6478BD642FULL * (stream_id + 1));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return SplitMix64(z ^ (z >> 31));
  }

 private:
  std::uint64_t state_;
  double cache_ = 0.0;
  bool has_cache_ = false;
};

// Per-run bundle: one stream per player for query directions, one for
// payoff/gradient noise. Keeps player randomness independent of how often
// other players' streams are consumed.
struct RngBundle {
  SplitMix64 noise;
  std::vector<SplitMix64> players;

  RngBundle(std::uint64_t seed, int n_players) : noise(SplitMix64(seed).split(0)) {
    SplitMix64 root(seed);
    players.reserve(static_cast<std::size_t>(n_players));
    for (int i = 0; i < n_players; ++i) players.push_back(root.split(static_cast<std::uint64_t>(i) + 1));
  }
};

}  // namespace banditmd
