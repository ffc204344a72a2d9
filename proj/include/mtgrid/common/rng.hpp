#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>

namespace mtgrid {

// Combines seeds and stream identifiers into one 64-bit seed (splitmix64
// finalizer applied per component).
std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts);

// Stable 64-bit FNV-1a hash of a string, for deriving seeds from ids.
std::uint64_t hash_string(std::string_view text);

// Seeded random source over std::mt19937_64 with its own floating point and
// bounded-integer conversions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform in (0, 1).
  double uniform_open() {
    return (static_cast<double>(engine_() >> 12) + 0.5) * 0x1.0p-52;
  }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  // Standard normal via Box-Muller.
  double normal();

  // Standard Gumbel(0, 1).
  double gumbel();

  std::string save_state() const;
  void load_state(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

}  // namespace mtgrid
