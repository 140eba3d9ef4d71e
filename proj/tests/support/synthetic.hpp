#pragma once

// Deterministic synthetic binary-classification data in libsvm format.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "aogd/ingest.hpp"

namespace synthetic {

/// n rows, d features; each feature is present with probability `density`
/// and uniform in [-1, 1]. Labels follow a logistic model with a weight vector
/// whose first `active` coordinates are nonzero.
inline void write_libsvm(const std::filesystem::path& path, std::size_t n, std::size_t d, std::uint64_t seed,
                         double density = 0.6, std::size_t active = 7) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0), coin(0.0, 1.0);
  std::vector<double> w(d, 0.0);
  for (std::size_t j = 0; j < std::min(active, d); ++j) w[j] = 3.0 * u(rng);
  std::ofstream out(path);
  for (std::size_t i = 0; i < n; ++i) {
    aogd::SparseExample ex;
    double margin = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      if (coin(rng) >= density) continue;
      const double v = u(rng);
      ex.features.emplace_back(j + 1, v);
      margin += w[j] * v;
    }
    ex.label = coin(rng) < 1.0 / (1.0 + std::exp(-margin)) ? 1 : -1;
    out << aogd::serialize_libsvm_line(ex) << '\n';
  }
}

}  // namespace synthetic
