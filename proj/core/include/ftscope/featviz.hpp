#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ftscope/autodiff.hpp"
#include "ftscope/data.hpp"
#include "ftscope/model.hpp"

namespace ftscope {

/// Maps decorrelated color coordinates to RGB. `matrix` is the lower Cholesky
/// factor of the pixel covariance divided by its largest singular value, which
/// is kept in `scale`: matrix * matrix^T * scale^2 == covariance.
struct DecorrelationMatrix {
  std::array<double, 9> matrix{1, 0, 0, 0, 1, 0, 0, 0, 1};  // row-major
  double scale = 1.0;
  bool fallback = false;  // identity used because the covariance was singular
  std::string warning;
  std::string provenance;

  static DecorrelationMatrix identity() { return {}; }
};

/// Fits the matrix from pixels [P, 3] (population covariance). Needs P >= 100.
DecorrelationMatrix fit_decorrelation_pixels(const Tensor& pixels);
/// Pools every pixel of the selected images.
DecorrelationMatrix fit_decorrelation(const Dataset& dataset, std::span<const std::size_t> index);

/// Per color channel half-spectrum coefficients: [3, H, W/2+1, 2].
struct SpectralParams {
  Tensor coeffs;
  std::size_t height = 0;
  std::size_t width = 0;

  static SpectralParams zeros(std::size_t height, std::size_t width);
  static SpectralParams random(std::size_t height, std::size_t width, std::uint64_t seed, double stddev = 0.01);
};

/// 1 / max(f, 1 / max(H, W)) for each half-spectrum bin, [H, W/2+1]; f is the
/// radial frequency in cycles per pixel.
Tensor spectrum_scale(std::size_t height, std::size_t width);

/// Scaled coefficients -> orthonormal inverse FFT -> color matrix -> sigmoid.
/// Returns [3, H, W] in (0, 1).
Tensor decode(const SpectralParams& params, const DecorrelationMatrix& m);
/// Differentiable form; `coeffs` is [3, H, W/2+1, 2]; the result is [1, 3, H, W].
Var decode_var(Var coeffs, std::size_t height, std::size_t width, const DecorrelationMatrix& m);

struct ChannelRef {
  std::string layer;
  std::size_t index = 0;
};

/// Throws ConfigError when the layer or channel does not exist.
void check_channel(const ModelSpec& spec, const ChannelRef& channel);

/// Spatial mean of the channel's pre-activation response to one image [3, H, W].
double channel_objective(const ModelCheckpoint& model, const ChannelRef& channel, const Tensor& image);

struct VizOptions {
  int steps = 2048;
  double step_size = 0.05;
  std::uint64_t seed = 0;
  double init_stddev = 0.01;
};

struct OptimizedImage {
  SpectralParams params;
  Tensor image;  // [3, H, W]
  std::vector<double> trace;  // steps + 1 objective values, initial first
  ChannelRef channel;
  int steps = 0;
};

/// Gradient ascent (Adam) on the channel objective in the spectral domain.
OptimizedImage optimize_channel(const ModelCheckpoint& model, const ChannelRef& channel,
                                const DecorrelationMatrix& m, const VizOptions& options = {});

/// Mean objective of `count` decoded random initializations.
double random_baseline(const ModelCheckpoint& model, const ChannelRef& channel, const DecorrelationMatrix& m,
                       std::size_t count, std::uint64_t seed, double stddev = 0.01);

}  // namespace ftscope
