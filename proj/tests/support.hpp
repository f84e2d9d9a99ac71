#pragma once

#include <random>

#include "kl/sampling.hpp"
#include "kl/slit.hpp"

namespace kl::test {

inline SlitVector single_slit(double y, double x, double xr) {
  return SlitVector::validate({y, x, xr});
}

/// The canonical unit configuration: one slit from -1+i to 1+i.
inline SlitVector unit_slit() { return single_slit(1.0, -1.0, 1.0); }

inline std::mt19937_64 rng(std::uint64_t seed = 20240901) {
  return std::mt19937_64(seed);
}

}  // namespace kl::test
