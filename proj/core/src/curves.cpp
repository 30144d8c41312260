#include "gridssl/curves.hpp"

#include <algorithm>
#include <cmath>

#include "gridssl/error.hpp"
#include "gridssl/rng.hpp"

namespace gridssl {

namespace {

double state_dist_sq(const Tensor<double>& states, std::size_t i,
                     std::size_t j) {
  const std::size_t n = states.shape.dim(1);
  const double* a = states.data() + i * n;
  const double* b = states.data() + j * n;
  double s = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

}  // namespace

DistanceCurve spatial_distance_curve(const Tensor<double>& states,
                                     const Tensor<double>& positions,
                                     double max_sep, std::size_t n_bins,
                                     std::size_t n_pairs, std::uint64_t seed) {
  const std::size_t S = states.shape.rows();
  if (positions.shape.rows() != S)
    throw ConfigError("distance curve: states/positions row mismatch");
  if (S < 2) throw ConfigError("distance curve: need at least two samples");
  if (!(max_sep > 0) || n_bins == 0)
    throw ConfigError("distance curve: bad binning");

  DistanceCurve c;
  c.centers.resize(n_bins);
  c.mean_dist.assign(n_bins, 0.0);
  c.mean_sqdist.assign(n_bins, 0.0);
  c.counts.assign(n_bins, 0);
  const double w = max_sep / static_cast<double>(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b)
    c.centers[b] = (static_cast<double>(b) + 0.5) * w;

  auto visit = [&](std::size_t i, std::size_t j) {
    const double dx = positions.at(i, 0) - positions.at(j, 0);
    const double dy = positions.at(i, 1) - positions.at(j, 1);
    const double sep = std::hypot(dx, dy);
    if (sep >= max_sep) return;
    const auto b = static_cast<std::size_t>(sep / w);
    const double d2 = state_dist_sq(states, i, j);
    c.mean_dist[b] += std::sqrt(d2);
    c.mean_sqdist[b] += d2;
    ++c.counts[b];
  };

  if (n_pairs == 0) {
    for (std::size_t i = 0; i < S; ++i)
      for (std::size_t j = i + 1; j < S; ++j) visit(i, j);
  } else {
    Rng rng(seed);
    for (std::size_t k = 0; k < n_pairs; ++k) {
      const auto i = static_cast<std::size_t>(rng.uniform() *
                                              static_cast<double>(S)) %
                     S;
      auto j = static_cast<std::size_t>(rng.uniform() *
                                        static_cast<double>(S - 1)) %
               (S - 1);
      if (j >= i) ++j;
      visit(i, j);
    }
  }

  for (std::size_t b = 0; b < n_bins; ++b)
    if (c.counts[b] > 0) {
      c.mean_dist[b] /= static_cast<double>(c.counts[b]);
      c.mean_sqdist[b] /= static_cast<double>(c.counts[b]);
    }
  return c;
}

DistanceCurve temporal_distance_curve(const Tensor<double>& states,
                                      std::size_t max_lag) {
  const std::size_t S = states.shape.rows();
  if (max_lag == 0 || max_lag >= S)
    throw ConfigError("temporal curve: lag out of range");

  DistanceCurve c;
  c.centers.resize(max_lag);
  c.mean_dist.assign(max_lag, 0.0);
  c.mean_sqdist.assign(max_lag, 0.0);
  c.counts.assign(max_lag, 0);
  for (std::size_t lag = 1; lag <= max_lag; ++lag) {
    c.centers[lag - 1] = static_cast<double>(lag);
    for (std::size_t t = 0; t + lag < S; ++t) {
      const double d2 = state_dist_sq(states, t, t + lag);
      c.mean_dist[lag - 1] += std::sqrt(d2);
      c.mean_sqdist[lag - 1] += d2;
      ++c.counts[lag - 1];
    }
    c.mean_dist[lag - 1] /= static_cast<double>(c.counts[lag - 1]);
    c.mean_sqdist[lag - 1] /= static_cast<double>(c.counts[lag - 1]);
  }
  return c;
}

std::vector<double> pairwise_distance_sample(const Tensor<double>& positions,
                                             std::size_t n_pairs,
                                             std::uint64_t seed) {
  const std::size_t S = positions.shape.rows();
  if (S < 2) throw ConfigError("distance sample: need at least two positions");
  std::vector<double> out;
  auto dist = [&](std::size_t i, std::size_t j) {
    return std::hypot(positions.at(i, 0) - positions.at(j, 0),
                      positions.at(i, 1) - positions.at(j, 1));
  };
  if (n_pairs == 0) {
    out.reserve(S * (S - 1) / 2);
    for (std::size_t i = 0; i < S; ++i)
      for (std::size_t j = i + 1; j < S; ++j) out.push_back(dist(i, j));
  } else {
    Rng rng(seed);
    out.reserve(n_pairs);
    for (std::size_t k = 0; k < n_pairs; ++k) {
      const auto i = static_cast<std::size_t>(rng.uniform() *
                                              static_cast<double>(S)) %
                     S;
      auto j = static_cast<std::size_t>(rng.uniform() *
                                        static_cast<double>(S - 1)) %
               (S - 1);
      if (j >= i) ++j;
      out.push_back(dist(i, j));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace gridssl
