#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace etklab {

using Rng = std::mt19937_64;

// Derives an independent stream seed from a master seed and a list of
// coordinates (model id, n, instance, ...), via splitmix64 mixing.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> coords);

inline Rng make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> coords) {
  return Rng(derive_seed(master, coords));
}

}  // namespace etklab
