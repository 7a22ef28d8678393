#pragma once

#include <cstdint>
#include <random>

#include "cgan/ndcore.hpp"

namespace cgan {

using Rng = std::mt19937_64;

/// Seed for an independent stream derived from a master seed (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// rows x cols matrix of independent N(0, stddev^2) draws.
inline Tensor normal_matrix(Rng& rng, std::size_t rows, std::size_t cols, double stddev = 1.0) {
  std::normal_distribution<double> normal(0.0, stddev);
  Tensor t = Tensor::zeros(rows, cols);
  for (double& v : t.values()) v = normal(rng);
  return t;
}

}  // namespace cgan
