#include "ftscope/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "ftscope/error.hpp"

namespace ftscope {

std::string encode_ppm(const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeError("encode_ppm expects [3, H, W], got " + shape_str(image.shape()));
  }
  const std::size_t h = image.dim(1), w = image.dim(2);
  std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  const std::size_t header = out.size();
  out.resize(header + 3 * h * w);
  auto px = image.data();
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = std::clamp(px[(c * h + y) * w + x], 0.0, 1.0);
        out[header + (y * w + x) * 3 + c] = static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v)));
      }
  return out;
}

void write_ppm(const Tensor& image, const std::filesystem::path& path) {
  const std::string bytes = encode_ppm(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Tensor decode_ppm(std::string_view bytes, const std::string& source) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> std::size_t {
    skip_space();
    std::size_t v = 0, digits = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + static_cast<std::size_t>(bytes[pos++] - '0');
      ++digits;
    }
    if (digits == 0) throw FormatError(source + ": malformed PPM header");
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw FormatError(source + ": not a binary PPM (P6)");
  pos = 2;
  const std::size_t w = read_int(), h = read_int(), maxval = read_int();
  if (w == 0 || h == 0) throw FormatError(source + ": empty image");
  if (maxval == 0 || maxval > 255) throw FormatError(source + ": unsupported maxval " + std::to_string(maxval));
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw FormatError(source + ": malformed PPM header");
  }
  ++pos;
  if (bytes.size() - pos < 3 * w * h) throw FormatError(source + ": truncated pixel data");
  Tensor out({3, h, w});
  auto o = out.mutable_data();
  const double scale = static_cast<double>(maxval);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        o[(c * h + y) * w + x] = static_cast<unsigned char>(bytes[pos + (y * w + x) * 3 + c]) / scale;
  return out;
}

Tensor read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_ppm(data, path.string());
}

Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w) {
  if (image.rank() != 3) throw ShapeError("resize_bilinear expects [C, H, W], got " + shape_str(image.shape()));
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  Tensor out({c, out_h, out_w});
  auto o = out.mutable_data();
  auto in = image.data();
  auto axis = [](std::size_t dst, std::size_t n_in, std::size_t n_out, std::size_t& i0, std::size_t& i1, double& t) {
    double s = (static_cast<double>(dst) + 0.5) * static_cast<double>(n_in) / static_cast<double>(n_out) - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(n_in - 1));
    i0 = static_cast<std::size_t>(std::floor(s));
    i1 = std::min(i0 + 1, n_in - 1);
    t = s - static_cast<double>(i0);
  };
  for (std::size_t y = 0; y < out_h; ++y) {
    std::size_t y0, y1;
    double ty;
    axis(y, h, out_h, y0, y1, ty);
    for (std::size_t x = 0; x < out_w; ++x) {
      std::size_t x0, x1;
      double tx;
      axis(x, w, out_w, x0, x1, tx);
      for (std::size_t ci = 0; ci < c; ++ci) {
        const double* p = in.data() + ci * h * w;
        const double top = p[y0 * w + x0] * (1.0 - tx) + p[y0 * w + x1] * tx;
        const double bot = p[y1 * w + x0] * (1.0 - tx) + p[y1 * w + x1] * tx;
        o[(ci * out_h + y) * out_w + x] = top * (1.0 - ty) + bot * ty;
      }
    }
  }
  return out;
}

Tensor crop(const Tensor& image, std::size_t top, std::size_t left, std::size_t h, std::size_t w) {
  if (image.rank() != 3 || top + h > image.dim(1) || left + w > image.dim(2)) {
    throw ShapeError("crop window out of bounds for " + shape_str(image.shape()));
  }
  const std::size_t c = image.dim(0), ih = image.dim(1), iw = image.dim(2);
  Tensor out({c, h, w});
  auto o = out.mutable_data();
  auto in = image.data();
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t y = 0; y < h; ++y)
      std::copy_n(in.data() + (ci * ih + top + y) * iw + left, w, o.data() + (ci * h + y) * w);
  return out;
}

Tensor tile_images(std::span<const Tensor> images, std::size_t cols) {
  if (images.empty() || cols == 0) throw ShapeError("tile_images needs at least one image and column");
  const Shape s = images[0].shape();
  if (s.size() != 3 || s[0] != 3) throw ShapeError("tile_images expects [3, H, W] images");
  const std::size_t h = s[1], w = s[2];
  cols = std::min(cols, images.size());
  const std::size_t rows = (images.size() + cols - 1) / cols;
  Tensor out({3, rows * h, cols * w});
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].shape() != s) throw ShapeError("tile_images: mixed image sizes");
    const std::size_t r = i / cols, col = i % cols;
    auto in = images[i].data();
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < h; ++y)
        std::copy_n(in.data() + (c * h + y) * w, w, o.data() + (c * rows * h + r * h + y) * cols * w + col * w);
  }
  return out;
}

}  // namespace ftscope
