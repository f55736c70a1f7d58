#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "ftscope/tensor.hpp"

namespace ftscope {

using Complex = std::complex<double>;

/// In-place unnormalized DFT of any length: X[k] = sum_n x[n] exp(-+2 pi i k n / N),
/// sign + for `inverse`. Power-of-two lengths use radix-2; others use Bluestein.
void fft_inplace(std::vector<Complex>& data, bool inverse);

inline std::size_t half_width(std::size_t width) { return width / 2 + 1; }

/// Real-input 2D DFT of an [H, W] image. Returns the non-redundant half spectrum
/// as [H, W/2+1, 2] with (re, im) in the last axis.
Tensor fft2(const Tensor& image);

/// Inverse of fft2: [H, W/2+1, 2] half spectrum -> real [H, W] image, including
/// the 1/(H*W) normalization. Bins that have no Hermitian partner (DC and Nyquist
/// columns) contribute through their real part.
Tensor ifft2(const Tensor& spectrum, std::size_t height, std::size_t width);

}  // namespace ftscope
