#pragma once

#include <cstdint>
#include <random>

namespace qfl {

// Finalizer-style mixer; used to derive independent replication seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(master ^ splitmix64(stream + 0x9E3779B97F4A7C15ull));
}

// Deterministic draws with hand-rolled output mappings, so sequences do not
// depend on standard library distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() {  // [0, 1)
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double normal() {  // Box-Muller, two uniforms per draw
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  double cauchy() {  // location 0, scale 1
    return std::tan(3.141592653589793238462643 * (uniform() - 0.5));
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace qfl
