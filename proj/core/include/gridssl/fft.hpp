#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "gridssl/tensor.hpp"

namespace gridssl {

// In-place iterative radix-2 transform; size must be a power of two.
// The inverse includes the 1/n scale.
void fft_inplace(std::vector<std::complex<double>>& a, bool inverse);

// Row-major 2-D transform over a rows x cols buffer (both powers of two).
void fft_2d(std::vector<std::complex<double>>& a, std::size_t rows,
            std::size_t cols, bool inverse);

std::size_t next_pow2(std::size_t n);

// Full linear cross-correlation C(dy,dx) = sum_u A(u) * B(u + d) of two
// real grids of identical shape, computed by zero-padded FFTs. The result
// is (2*rows-1) x (2*cols-1) with zero offset at (rows-1, cols-1).
Tensor<double> cross_correlate(const Tensor<double>& a,
                               const Tensor<double>& b);

}  // namespace gridssl
