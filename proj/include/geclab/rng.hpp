#pragma once

#include <cstdint>
#include <limits>
#include <span>

namespace geclab {

inline std::uint64_t mix64(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based generator: output i is a hash of (key, i).
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key = 0) : key_(key) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix64(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL); }

  // Uniform double in [0, 1).
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

inline std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream, std::uint64_t episode) {
  std::uint64_t k = mix64(seed + 0x632be59bd9b4e019ULL);
  k = mix64(k ^ (stream * 0x9e3779b97f4a7c15ULL + 0x8cb92ba72f3d8dd7ULL));
  return mix64(k ^ (episode * 0xd1b54a32d192ed03ULL + 0xabc98388fb8fac03ULL));
}

// Reproducible source of per-episode generators split by (seed, stream, episode).
class SeededSampler {
 public:
  SeededSampler(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

  CounterRng next_episode() { return CounterRng(derive_key(seed_, stream_, episode_++)); }
  CounterRng episode_rng(std::uint64_t episode) const {
    return CounterRng(derive_key(seed_, stream_, episode));
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t episodes_drawn() const { return episode_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t episode_ = 0;
};

// Inverse-CDF draw from nonnegative weights (need not be normalized).
inline int sample_index(std::span<const double> weights, CounterRng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = rng.uniform() * total;
  int last_positive = -1;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last_positive = static_cast<int>(i);
    if (u < weights[i]) return last_positive;
    u -= weights[i];
  }
  return last_positive;
}

}  // namespace geclab
