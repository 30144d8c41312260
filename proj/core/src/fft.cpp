#include "gridssl/fft.hpp"

#include <cmath>
#include <numbers>

#include "gridssl/error.hpp"

namespace gridssl {

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0)
    throw ConfigError("fft size must be a power of two");

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang =
        (inverse ? 2.0 : -2.0) * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }

  if (inverse) {
    const double s = 1.0 / static_cast<double>(n);
    for (auto& z : a) z *= s;
  }
}

void fft_2d(std::vector<std::complex<double>>& a, std::size_t rows,
            std::size_t cols, bool inverse) {
  if (a.size() != rows * cols) throw ConfigError("fft_2d buffer size mismatch");
  std::vector<std::complex<double>> tmp(std::max(rows, cols));

  for (std::size_t r = 0; r < rows; ++r) {
    tmp.assign(a.begin() + static_cast<std::ptrdiff_t>(r * cols),
               a.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols));
    fft_inplace(tmp, inverse);
    std::copy(tmp.begin(), tmp.end(),
              a.begin() + static_cast<std::ptrdiff_t>(r * cols));
  }
  for (std::size_t c = 0; c < cols; ++c) {
    tmp.resize(rows);
    for (std::size_t r = 0; r < rows; ++r) tmp[r] = a[r * cols + c];
    fft_inplace(tmp, inverse);
    for (std::size_t r = 0; r < rows; ++r) a[r * cols + c] = tmp[r];
  }
}

Tensor<double> cross_correlate(const Tensor<double>& a,
                               const Tensor<double>& b) {
  const std::size_t rows = a.shape.rows(), cols = a.shape.dim(1);
  if (b.shape.rows() != rows || b.shape.dim(1) != cols)
    throw ConfigError("cross_correlate shape mismatch");

  const std::size_t pr = next_pow2(2 * rows), pc = next_pow2(2 * cols);
  std::vector<std::complex<double>> fa(pr * pc), fb(pr * pc);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      fa[r * pc + c] = a.at(r, c);
      fb[r * pc + c] = b.at(r, c);
    }
  fft_2d(fa, pr, pc, false);
  fft_2d(fb, pr, pc, false);
  for (std::size_t i = 0; i < fa.size(); ++i) fa[i] = std::conj(fa[i]) * fb[i];
  fft_2d(fa, pr, pc, true);

  // C(d) lands at index d mod padded size; offsets run -(n-1) .. n-1
  Tensor<double> out(Shape::mat(2 * rows - 1, 2 * cols - 1));
  for (std::size_t r = 0; r < 2 * rows - 1; ++r)
    for (std::size_t c = 0; c < 2 * cols - 1; ++c) {
      const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(r) -
                                static_cast<std::ptrdiff_t>(rows - 1);
      const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(c) -
                                static_cast<std::ptrdiff_t>(cols - 1);
      const std::size_t ry =
          static_cast<std::size_t>(dy < 0 ? dy + static_cast<std::ptrdiff_t>(pr)
                                          : dy);
      const std::size_t rx =
          static_cast<std::size_t>(dx < 0 ? dx + static_cast<std::ptrdiff_t>(pc)
                                          : dx);
      out.at(r, c) = fa[ry * pc + rx].real();
    }
  return out;
}

}  // namespace gridssl
