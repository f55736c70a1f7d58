#include "ftscope/featviz.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "ftscope/error.hpp"
#include "ftscope/fft.hpp"
#include "ftscope/ops.hpp"
#include "ftscope/rng.hpp"

namespace ftscope {

DecorrelationMatrix fit_decorrelation_pixels(const Tensor& pixels) {
  if (pixels.rank() != 2 || pixels.dim(1) != 3) throw ShapeError("decorrelation needs [P, 3] pixels");
  if (pixels.dim(0) < 100) {
    throw DegenerateInputError("decorrelation needs at least 100 pixels, got " + std::to_string(pixels.dim(0)));
  }
  const std::size_t p = pixels.dim(0);
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < p; ++i)
    for (int c = 0; c < 3; ++c) mean[c] += pixels[i * 3 + static_cast<std::size_t>(c)];
  mean /= static_cast<double>(p);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < p; ++i) {
    Eigen::Vector3d d;
    for (int c = 0; c < 3; ++c) d[c] = pixels[i * 3 + static_cast<std::size_t>(c)] - mean[c];
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(p);

  DecorrelationMatrix out;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  const double top = eig.eigenvalues().maxCoeff();
  const double bottom = eig.eigenvalues().minCoeff();
  Eigen::LLT<Eigen::Matrix3d> llt(cov);
  if (!(top > 0.0) || bottom <= 1e-10 * top || llt.info() != Eigen::Success) {
    out.fallback = true;
    out.warning = "pixel covariance is singular; using the identity color matrix";
    return out;
  }
  const Eigen::Matrix3d l = llt.matrixL();
  const double smax = Eigen::JacobiSVD<Eigen::Matrix3d>(l).singularValues()[0];
  out.scale = smax;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out.matrix[static_cast<std::size_t>(r * 3 + c)] = l(r, c) / smax;
  return out;
}

DecorrelationMatrix fit_decorrelation(const Dataset& dataset, std::span<const std::size_t> index) {
  std::size_t total = 0;
  for (auto i : index) total += dataset.images[i].size() / 3;
  if (total == 0) throw DegenerateInputError("decorrelation: no pixels selected");
  Tensor pixels({total, 3});
  auto px = pixels.mutable_data();
  std::size_t row = 0;
  for (auto i : index) {
    const Tensor& img = dataset.images[i];
    const std::size_t plane = img.size() / 3;
    for (std::size_t k = 0; k < plane; ++k, ++row)
      for (std::size_t c = 0; c < 3; ++c) px[row * 3 + c] = img[c * plane + k];
  }
  return fit_decorrelation_pixels(pixels);
}

SpectralParams SpectralParams::zeros(std::size_t height, std::size_t width) {
  return {Tensor::zeros({3, height, half_width(width), 2}), height, width};
}

SpectralParams SpectralParams::random(std::size_t height, std::size_t width, std::uint64_t seed, double stddev) {
  SpectralParams p = zeros(height, width);
  Rng rng = Rng::derive(seed, "spectral-init");
  for (double& v : p.coeffs.mutable_data()) v = rng.normal(0.0, stddev);
  return p;
}

Tensor spectrum_scale(std::size_t height, std::size_t width) {
  const std::size_t wh = half_width(width);
  Tensor s({height, wh});
  auto d = s.mutable_data();
  const double floor_f = 1.0 / static_cast<double>(std::max(height, width));
  for (std::size_t y = 0; y < height; ++y) {
    const double ky = static_cast<double>(std::min(y, height - y)) / static_cast<double>(height);
    for (std::size_t x = 0; x < wh; ++x) {
      const double kx = static_cast<double>(x) / static_cast<double>(width);
      d[y * wh + x] = 1.0 / std::max(std::sqrt(kx * kx + ky * ky), floor_f);
    }
  }
  return s;
}

namespace {

constexpr double kOutputScale = 0.25;

/// Scale per bin broadcast over channels and (re, im), times sqrt(HW) so the
/// inverse transform is orthonormal. The extra 1/4 is Lucid's constant.
Tensor coefficient_weights(std::size_t height, std::size_t width) {
  const std::size_t wh = half_width(width);
  const Tensor s = spectrum_scale(height, width);
  const double ortho = std::sqrt(static_cast<double>(height * width)) * kOutputScale;
  Tensor w({3, height, wh, 2});
  auto d = w.mutable_data();
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < height * wh; ++i) {
      d[(c * height * wh + i) * 2] = s[i] * ortho;
      d[(c * height * wh + i) * 2 + 1] = s[i] * ortho;
    }
  return w;
}

}  // namespace

Var decode_var(Var coeffs, std::size_t height, std::size_t width, const DecorrelationMatrix& m) {
  Tape& tape = *coeffs.tape();
  Var scaled = ops::mul(coeffs, tape.constant(coefficient_weights(height, width)));
  Var spatial = ops::reshape(ops::irfft2(scaled, height, width), {1, 3, height, width});
  Tensor kernel({3, 3, 1, 1}, std::vector<double>(m.matrix.begin(), m.matrix.end()));
  Var mixed = ops::conv2d(spatial, tape.constant(kernel), tape.constant(Tensor::zeros({3})));
  return ops::sigmoid(mixed);
}

Tensor decode(const SpectralParams& params, const DecorrelationMatrix& m) {
  Tape tape(false);
  return decode_var(tape.constant(params.coeffs), params.height, params.width, m)
      .value()
      .reshaped({3, params.height, params.width});
}

void check_channel(const ModelSpec& spec, const ChannelRef& channel) {
  const auto layers = spec.layer_names();
  if (std::find(layers.begin(), layers.end(), channel.layer) == layers.end()) {
    throw ConfigError("unknown layer '" + channel.layer + "'");
  }
  const std::size_t c = layer_output_shape(spec, channel.layer)[0];
  if (channel.index >= c) {
    throw ConfigError("unknown channel " + std::to_string(channel.index) + " in layer '" + channel.layer + "' (" +
                      std::to_string(c) + " channels)");
  }
}

namespace {

Var objective_var(const ModelGraph& graph, Var image, const ChannelRef& channel) {
  const auto out = graph.run(image, false, channel.layer);
  Var pooled = ops::global_avg_pool(out.preactivations.at(channel.layer));
  return ops::select_column(pooled, channel.index);
}

}  // namespace

double channel_objective(const ModelCheckpoint& model, const ChannelRef& channel, const Tensor& image) {
  check_channel(model.spec, channel);
  Tape tape(false);
  ModelGraph graph(tape, model);
  const Shape s = image.shape();
  if (image.rank() != 3) throw ShapeError("channel_objective expects [3, H, W]");
  return objective_var(graph, tape.constant(image.reshaped({1, s[0], s[1], s[2]})), channel).value().item();
}

OptimizedImage optimize_channel(const ModelCheckpoint& model, const ChannelRef& channel,
                                const DecorrelationMatrix& m, const VizOptions& options) {
  check_channel(model.spec, channel);
  if (options.steps < 0) throw ConfigError("steps must be non-negative");
  const std::size_t size = model.spec.input_size;
  OptimizedImage r;
  r.channel = channel;
  r.steps = options.steps;
  r.params = SpectralParams::random(size, size, options.seed, options.init_stddev);

  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  Tensor mom = Tensor::zeros(r.params.coeffs.shape());
  Tensor vel = Tensor::zeros(r.params.coeffs.shape());
  for (int step = 0;; ++step) {
    const bool last = step == options.steps;
    Tape tape(!last);
    ModelGraph graph(tape, model);
    Var coeffs = last ? tape.constant(r.params.coeffs) : tape.parameter(r.params.coeffs);
    Var obj;
    try {
      obj = objective_var(graph, decode_var(coeffs, size, size, m), channel);
    } catch (const NonFiniteError& e) {
      throw NonFiniteError("optimize_channel: non-finite value at step " + std::to_string(step) + ": " + e.what());
    }
    r.trace.push_back(obj.value().item());
    if (last) break;
    const Gradients g = tape.backward(ops::scale(obj, -1.0));
    const Tensor grad = g[coeffs];
    auto p = r.params.coeffs.mutable_data();
    auto mm = mom.mutable_data();
    auto vv = vel.mutable_data();
    const double t = static_cast<double>(step + 1);
    const double c1 = 1.0 - std::pow(kBeta1, t), c2 = 1.0 - std::pow(kBeta2, t);
    for (std::size_t i = 0; i < p.size(); ++i) {
      mm[i] = kBeta1 * mm[i] + (1.0 - kBeta1) * grad[i];
      vv[i] = kBeta2 * vv[i] + (1.0 - kBeta2) * grad[i] * grad[i];
      p[i] -= options.step_size * (mm[i] / c1) / (std::sqrt(vv[i] / c2) + kEps);
    }
    if (!r.params.coeffs.all_finite()) {
      throw NonFiniteError("optimize_channel: parameters became non-finite at step " + std::to_string(step));
    }
  }
  r.image = decode(r.params, m);
  return r;
}

double random_baseline(const ModelCheckpoint& model, const ChannelRef& channel, const DecorrelationMatrix& m,
                       std::size_t count, std::uint64_t seed, double stddev) {
  if (count == 0) throw ConfigError("random_baseline needs count >= 1");
  const std::size_t size = model.spec.input_size;
  double sum = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const SpectralParams p = SpectralParams::random(size, size, mix64(seed + 0x9e37 * (i + 1)), stddev);
    sum += channel_objective(model, channel, decode(p, m));
  }
  return sum / static_cast<double>(count);
}

}  // namespace ftscope
