#include "ftscope/fft.hpp"

#include <bit>
#include <cmath>
#include <numbers>

#include "ftscope/error.hpp"

namespace ftscope {
namespace {

void radix2(std::vector<Complex>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double angle = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
    const std::size_t half = len / 2;
    std::vector<Complex> twiddle(half);
    for (std::size_t k = 0; k < half; ++k) twiddle[k] = std::polar(1.0, angle * static_cast<double>(k));
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const Complex u = a[i + k];
        const Complex v = a[i + k + half] * twiddle[k];
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

// Chirp-z: expresses a length-n DFT as a convolution evaluated with power-of-two FFTs.
void bluestein(std::vector<Complex>& a, bool inverse) {
  const std::size_t n = a.size();
  const std::size_t m = std::bit_ceil(2 * n - 1);
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<Complex> chirp(n);
  for (std::size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the angle argument small for accuracy.
    const std::size_t k2 = (k * k) % (2 * n);
    chirp[k] = std::polar(1.0, sign * std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n));
  }
  std::vector<Complex> u(m), v(m);
  for (std::size_t k = 0; k < n; ++k) u[k] = a[k] * chirp[k];
  v[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k) v[k] = v[m - k] = std::conj(chirp[k]);
  radix2(u, false);
  radix2(v, false);
  for (std::size_t k = 0; k < m; ++k) u[k] *= v[k];
  radix2(u, true);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n; ++k) a[k] = u[k] * inv_m * chirp[k];
}

}  // namespace

void fft_inplace(std::vector<Complex>& data, bool inverse) {
  const std::size_t n = data.size();
  if (n <= 1) return;
  if (std::has_single_bit(n)) {
    radix2(data, inverse);
  } else {
    bluestein(data, inverse);
  }
}

Tensor fft2(const Tensor& image) {
  if (image.rank() != 2) throw ShapeError("fft2 expects [H, W], got " + shape_str(image.shape()));
  const std::size_t h = image.dim(0), w = image.dim(1), wh = half_width(w);
  std::vector<Complex> rows(h * wh);
  std::vector<Complex> line(w);
  auto px = image.data();
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) line[x] = px[y * w + x];
    fft_inplace(line, false);
    for (std::size_t k = 0; k < wh; ++k) rows[y * wh + k] = line[k];
  }
  Tensor out({h, wh, 2});
  auto o = out.mutable_data();
  std::vector<Complex> col(h);
  for (std::size_t k = 0; k < wh; ++k) {
    for (std::size_t y = 0; y < h; ++y) col[y] = rows[y * wh + k];
    fft_inplace(col, false);
    for (std::size_t y = 0; y < h; ++y) {
      o[(y * wh + k) * 2] = col[y].real();
      o[(y * wh + k) * 2 + 1] = col[y].imag();
    }
  }
  return out;
}

Tensor ifft2(const Tensor& spectrum, std::size_t height, std::size_t width) {
  const std::size_t wh = half_width(width);
  if (spectrum.shape() != Shape{height, wh, 2}) {
    throw ShapeError("ifft2 expects [" + std::to_string(height) + "," + std::to_string(wh) +
                     ",2] for a " + std::to_string(height) + "x" + std::to_string(width) +
                     " image, got " + shape_str(spectrum.shape()));
  }
  auto s = spectrum.data();
  std::vector<Complex> cols(height * wh);
  std::vector<Complex> col(height);
  for (std::size_t k = 0; k < wh; ++k) {
    for (std::size_t y = 0; y < height; ++y) col[y] = {s[(y * wh + k) * 2], s[(y * wh + k) * 2 + 1]};
    fft_inplace(col, true);
    for (std::size_t y = 0; y < height; ++y) cols[y * wh + k] = col[y];
  }
  Tensor out({height, width});
  auto o = out.mutable_data();
  std::vector<Complex> line(width);
  const double norm = 1.0 / static_cast<double>(height * width);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t k = 0; k < wh; ++k) line[k] = cols[y * wh + k];
    for (std::size_t k = wh; k < width; ++k) line[k] = std::conj(cols[y * wh + (width - k)]);
    fft_inplace(line, true);
    for (std::size_t x = 0; x < width; ++x) o[y * width + x] = line[x].real() * norm;
  }
  return out;
}

}  // namespace ftscope
