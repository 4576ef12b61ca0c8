#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "canopy/bytes.hpp"

namespace canopy::sim {

// Deterministic per-actor random stream. Streams are split from the scenario
// seed by a stable label derivation, so adding an actor never perturbs the
// draws of existing actors. All distributions are hand-rolled: standard
// library distribution objects are implementation-defined and would break
// cross-platform replay.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  static std::uint64_t derive_seed(std::uint64_t root, std::string_view label);
  static Rng for_actor(std::uint64_t root, std::string_view label) {
    return Rng(derive_seed(root, label));
  }

  std::uint64_t next_u64() { return gen_(); }
  std::uint64_t below(std::uint64_t bound);   // uniform in [0, bound)
  std::uint64_t range(std::uint64_t lo, std::uint64_t hi);  // uniform in [lo, hi]
  double unit();                              // [0, 1)
  double gauss();                             // standard normal
  Bytes bytes(std::size_t n);

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0;
};

}  // namespace canopy::sim
