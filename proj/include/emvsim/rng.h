#ifndef EMVSIM_RNG_H_
#define EMVSIM_RNG_H_

#include <cstdint>
#include <random>
#include <string_view>

#include "emvsim/datamodel.h"

namespace emvsim {

// One generator per scenario; every nonce and key is drawn from it. Bounded
// draws use rejection on the raw engine output so results do not depend on
// the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next() { return engine_(); }
  uint32_t u32() { return static_cast<uint32_t>(engine_() >> 32); }

  // Uniform in [0, n). n must be nonzero.
  uint64_t below(uint64_t n) {
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % n;
  }

  Bytes bytes(size_t n) {
    Bytes out(n);
    for (auto& b : out) b = static_cast<uint8_t>(engine_() >> 56);
    return out;
  }

 private:
  std::mt19937_64 engine_;
};

// FNV-1a; mixes a scenario id into the user seed.
inline uint64_t mix_seed(uint64_t seed, std::string_view label) {
  uint64_t h = 1469598103934665603ULL ^ seed;
  for (char c : label) {
    h ^= static_cast<uint8_t>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace emvsim

#endif  // EMVSIM_RNG_H_
