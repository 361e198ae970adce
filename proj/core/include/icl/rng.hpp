#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace icl {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stream families. Every random quantity in the lab is drawn from a stream
// keyed by (master seed, family, counter...), so results never depend on the
// order in which work is scheduled.
enum class Stream : std::uint64_t {
  task = 1,
  prompt = 2,
  test_task = 3,
  test_prompt = 4,
  shuffle = 5,
  init = 6,
  mc_task = 7,
  mc_prompt = 8,
  concentration = 9,
  sweep = 10,
};

constexpr std::uint64_t stream_seed(std::uint64_t master, Stream family,
                                    std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = mix64(master);
  h = mix64(h ^ static_cast<std::uint64_t>(family));
  h = mix64(h ^ a);
  return mix64(h ^ (b + 0x632be59bd9b4e019ULL));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits; portable across standard libraries.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::size_t below(std::size_t n);

 private:
  std::mt19937_64 engine_;
};

}  // namespace icl
