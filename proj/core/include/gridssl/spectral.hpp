#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "gridssl/ratemap.hpp"
#include "gridssl/tensor.hpp"

namespace gridssl {

// Reduce an angle to [0, period).
double wrap_angle(double a, double period);

// Masked Pearson spatial autocorrelogram: correlation of the map with itself
// at every 2-D bin offset, over the bins where both copies are valid. Output
// is (2*ny-1, 2*nx-1) with zero offset at the center; offsets whose overlap
// has fewer than min_overlap bins (or a degenerate variance) are NaN.
// Throws NumericError when fewer than half the bins are valid or the valid
// bins are constant.
Tensor<double> autocorrelogram(const Ratemap& map, std::size_t min_overlap = 20);

// Strict 8-neighbor local maxima of a correlogram with value >= min_value,
// excluding the central peak, as (dy, dx) bin offsets sorted by radius.
std::vector<std::array<double, 2>> correlogram_peaks(const Tensor<double>& acorr,
                                                     double min_value = 0.1);

// Rotational-symmetry gridness: Pearson correlation between the correlogram
// annulus around the first peak ring (0.5x to 1.5x the ring radius) and its
// bilinear-resampled rotations; score = min(corr 60, corr 120) -
// max(corr 30, corr 90, corr 150). Undefined when no ring is found.
struct GridScore {
  double score = 0.0;
  double ring_radius = 0.0;  // bins
  bool defined = false;
};
GridScore grid_score(const Tensor<double>& acorr);

struct UnitSpectralSummary {
  std::size_t unit = 0;
  bool dead = false;
  bool classified = false;      // hexagonal wavevector triple found
  double period = 0.0;          // meters
  double orientation = 0.0;     // lattice orientation, radians in [0, pi/3)
  std::array<double, 3> phase = {0.0, 0.0, 0.0};  // sum = 0 mod 2pi
  std::array<double, 2> k1 = {0.0, 0.0};  // cycles/m
  std::array<double, 2> k2 = {0.0, 0.0};
  double gridness = 0.0;
  bool gridness_defined = false;
};

// Spectral identification of one unit: dominant power-spectrum peak, its
// 120-degree partner (so k1 + k2 + k3 = 0 with k3 implied), subpixel
// refinement by direct transform evaluation, phases read off the transform
// at the refined wavevectors with the third fixed by the zero-sum
// constraint. Unclassified when no consistent triple exists. Passing the
// unit's autocorrelogram skips recomputing it for the gridness field.
UnitSpectralSummary fourier_summary(const Ratemap& map,
                                    const Tensor<double>* acorr = nullptr);

}  // namespace gridssl
