#pragma once

#include <cstdint>
#include <vector>

namespace optvalue {

// Counter-based generator. Every draw is a pure function of
// (seed, stream, counter), so independent streams can be consumed
// concurrently and results do not depend on scheduling.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix(mix(seed ^ 0x6a09e667f3bcc909ULL) +
                 stream * 0x9e3779b97f4a7c15ULL)) {}

  std::uint64_t next_u64() {
    return mix(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL);
  }

  // uniform on [0, 1)
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // uniform on {0, ..., bound - 1}
  std::uint64_t below(std::uint64_t bound) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
  }

  bool bernoulli(double p) { return next_double() < p; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Named sub-streams per replicate; keeps sampling, fold assignment,
// permutations, and bootstrap draws on disjoint streams.
enum class RngPurpose : std::uint64_t {
  Sample = 1,
  Folds = 2,
  Permute = 3,
  Bootstrap = 4,
  Fit = 5,
};

inline std::uint64_t stream_id(std::uint64_t index, RngPurpose purpose) {
  return index * 8 + static_cast<std::uint64_t>(purpose);
}

// Fisher-Yates with our own generator; std::shuffle is
// implementation-defined and would break cross-platform determinism.
template <class T>
void deterministic_shuffle(std::vector<T>& v, CounterRng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace optvalue
