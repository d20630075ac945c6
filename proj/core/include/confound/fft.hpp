#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "confound/image.hpp"

namespace confound {

using Complex = std::complex<double>;

/// 2D frequency-domain coefficients, unshifted: DC lives at (0, 0).
struct Spectrum {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<Complex> coefficients;

  Complex& at(std::size_t row, std::size_t col) { return coefficients[row * width + col]; }
  Complex at(std::size_t row, std::size_t col) const { return coefficients[row * width + col]; }
};

/// In-place 1D DFT of any length (FFTW). The inverse includes the 1/n
/// normalisation.
void fft_inplace(std::span<Complex> data, bool inverse = false);

Spectrum dft2(const Image& img);
/// Inverse transform; the imaginary residue is discarded.
Image idft2(const Spectrum& spec);

/// Signed frequency index of bin k in an n-point transform (fftshift order).
inline double centered_frequency(std::size_t k, std::size_t n) {
  return (2 * k <= n) ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n);
}

}  // namespace confound
