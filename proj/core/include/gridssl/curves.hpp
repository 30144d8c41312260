#pragma once

#include <cstdint>
#include <vector>

#include "gridssl/tensor.hpp"

namespace gridssl {

struct DistanceCurve {
  std::vector<double> centers;      // separation bin centers
  std::vector<double> mean_dist;    // mean ||g - g'|| per bin
  std::vector<double> mean_sqdist;  // mean ||g - g'||^2 per bin
  std::vector<std::size_t> counts;  // pairs per bin
};

// State distance binned by spatial separation over sampled position pairs;
// n_pairs == 0 enumerates every pair. Pairs beyond max_sep are dropped.
DistanceCurve spatial_distance_curve(const Tensor<double>& states,     // (S,N)
                                     const Tensor<double>& positions,  // (S,2)
                                     double max_sep, std::size_t n_bins,
                                     std::size_t n_pairs, std::uint64_t seed);

// State distance at temporal lags 1..max_lag along one trajectory.
DistanceCurve temporal_distance_curve(const Tensor<double>& states,
                                      std::size_t max_lag);

// Sorted sample of pairwise spatial distances (empirical CDF support);
// n_pairs == 0 enumerates every pair.
std::vector<double> pairwise_distance_sample(const Tensor<double>& positions,
                                             std::size_t n_pairs,
                                             std::uint64_t seed);

}  // namespace gridssl
