#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include "ftscope/tensor.hpp"

namespace ftscope {

/// Binary PPM (P6, maxval 255) bytes for a [3, H, W] image in [0, 1]. Each sample
/// is round(255 * clamp(v, 0, 1)).
std::string encode_ppm(const Tensor& image);
void write_ppm(const Tensor& image, const std::filesystem::path& path);

/// Decodes P6 data (maxval <= 255) into a [3, H, W] tensor of byte / maxval.
Tensor decode_ppm(std::string_view bytes, const std::string& source = "<memory>");
Tensor read_ppm(const std::filesystem::path& path);

/// Bilinear resampling of a [C, H, W] image with half-pixel centers:
/// source coordinate = (dst + 0.5) * in / out - 0.5, clamped to the image.
Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w);

/// [C, h, w] window at (top, left).
Tensor crop(const Tensor& image, std::size_t top, std::size_t left, std::size_t h, std::size_t w);

/// Tiles [3, S, S] images into a grid with `cols` columns (row-major), padding
/// unused cells with black.
Tensor tile_images(std::span<const Tensor> images, std::size_t cols);

}  // namespace ftscope
