#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mtlsp {

// One master seed fans out to named substreams (train/init/sampler/eval...)
// so adding a new consumer never shifts the draws of an existing one.
class SeedSplitter {
 public:
  explicit SeedSplitter(uint64_t master) : master_(master) {}

  uint64_t stream(std::string_view name) const {
    // FNV-1a over the name, then a splitmix64 finalizer mix with the master.
    uint64_t h = 14695981039346656037ull;
    for (char c : name) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
    uint64_t z = master_ + 0x9e3779b97f4a7c15ull + h;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  uint64_t master() const { return master_; }

 private:
  uint64_t master_;
};

// mt19937_64 with hand-rolled double/normal construction. The engine's
// bitstream is pinned by the standard; distributions are not, so we never
// use std::*_distribution.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // [0,1), 53-bit resolution
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // Box-Muller; 1-u keeps the log argument strictly positive
    const double u = 1.0 - uniform();
    const double v = uniform();
    const double r = std::sqrt(-2.0 * std::log(u));
    const double a = 6.283185307179586 * v;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // [0,n) by rejection, unbiased
  uint64_t below(uint64_t n) {
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mtlsp
