#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace relq {

// Substream identifiers. Every run draws from independent generators keyed
// by (master_seed, run_index, stream) so that results do not depend on
// scheduling.
enum class Stream : std::uint32_t { policy = 1, transition = 2, init = 3, stub = 4, generator = 5 };

class Rng {
 public:
  Rng(std::uint64_t master_seed, std::uint64_t run_index, Stream stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                      static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(run_index),
                      static_cast<std::uint32_t>(run_index >> 32),
                      static_cast<std::uint32_t>(stream)};
    engine_.seed(seq);
  }

  std::uint64_t next() { return engine_(); }

  // Uniform on [0,1) with 53 random bits. Written out so the value stream is
  // identical for every standard library.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  // Standard normal by Box-Muller; the second variate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * M_PI * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace relq
