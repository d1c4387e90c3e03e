#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "rpcomb/datamodel.hpp"

namespace rpcomb {

/// One of the five synthetic regression models: X ~ U([-1, 1]^d),
/// Y = signal(X) + N(0, 1).
struct SimModelSpec {
  int model_id = 1;
  std::size_t n = 0;  // 0 selects the model default
  std::size_t d = 0;  // 0 selects the model default
  std::uint64_t seed = 0;

  /// Default (n, d): (600, 10), (800, 30), (800, 50), (800, 100), (800, 100).
  static SimModelSpec defaults(int model_id, std::uint64_t seed = 0);
};

/// Largest 1-based coordinate referenced by the model's formula.
std::size_t min_dimension(int model_id);

/// Noise-free regression function; `x` holds at least min_dimension(id) values.
double signal(int model_id, std::span<const double> x);

/// Features depend only on (seed, n, d); noise uses a separate stream, so two
/// models with the same seed and d share their inputs.
Dataset generate(const SimModelSpec& spec);

}  // namespace rpcomb
