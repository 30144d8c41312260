#pragma once

#include <array>
#include <cstddef>

#include "gridssl/tensor.hpp"

namespace gridssl {

// Projection of population states onto one phase axis: point s is
// (sum_i cos(phi_i) g_si, sum_i sin(phi_i) g_si). A toroidal code traces a
// ring; ringness is (radial std) / (mean radius). Degenerate when the mean
// radius vanishes or the points cover < 75% of 48 angular sectors.
struct RingProjection {
  Tensor<double> points;  // (S, 2)
  double ringness = 0.0;
  double coverage = 0.0;  // fraction of angular sectors hit
  bool degenerate = true;
};

struct TorusResult {
  Tensor<double> embedding;  // (samples_embedded, 3) spectral embedding
  std::array<RingProjection, 3> rings;
  bool flagged = false;  // states carry no usable structure
  std::size_t samples_embedded = 0;
};

// Manifold analysis of one module's states: PCA to 6 dimensions, Laplacian
// eigenmaps (symmetric-normalized, k-nearest-neighbor graph) to 3 on a
// strided subsample of at most max_embed rows, and the three phase-axis ring
// projections over every sample. phases is (N, 3) per-unit phase triples.
// Throws ConfigError when fewer than min_samples rows are supplied.
TorusResult torus_analysis(const Tensor<double>& states,  // (S, N)
                           const Tensor<double>& phases,  // (N, 3)
                           std::size_t knn = 15, std::size_t max_embed = 2000,
                           std::size_t min_samples = 5000);

}  // namespace gridssl
