#include "ftscope/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "ftscope/error.hpp"
#include "ftscope/image_io.hpp"
#include "ftscope/rng.hpp"

namespace ftscope {

const char* split_name(Split split) {
  switch (split) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
  }
  return "?";
}

Split split_for(std::string_view id, std::uint64_t split_seed) {
  const double u = unit_hash(id, split_seed);
  if (u < 0.70) return Split::train;
  if (u < 0.85) return Split::val;
  return Split::test;
}

std::vector<std::size_t> Dataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < splits.size(); ++i)
    if (splits[i] == split) out.push_back(i);
  return out;
}

std::vector<std::size_t> Dataset::all_indices() const {
  std::vector<std::size_t> out(size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
  return out;
}

Tensor Dataset::batch(std::span<const std::size_t> index) const {
  if (index.empty()) throw ShapeError("empty batch");
  const std::size_t plane = 3 * image_size * image_size;
  Tensor out({index.size(), 3, image_size, image_size});
  auto o = out.mutable_data();
  for (std::size_t b = 0; b < index.size(); ++b) {
    const Tensor& img = images.at(index[b]);
    std::copy_n(img.ptr(), plane, o.data() + b * plane);
  }
  return out;
}

Tensor Dataset::target_batch(std::span<const std::size_t> index) const {
  if (task != TaskKind::object) throw ConfigError("target_batch needs an object dataset");
  const std::size_t k = num_classes();
  Tensor out({index.size(), k});
  auto o = out.mutable_data();
  for (std::size_t b = 0; b < index.size(); ++b)
    for (std::size_t j = 0; j < k; ++j) o[b * k + j] = targets.at(index[b])[j];
  return out;
}

std::vector<int> Dataset::label_batch(std::span<const std::size_t> index) const {
  if (task != TaskKind::style) throw ConfigError("label_batch needs a style dataset");
  std::vector<int> out;
  out.reserve(index.size());
  for (std::size_t i : index) out.push_back(labels.at(i));
  return out;
}

void Dataset::validate() const {
  if (images.size() != ids.size() || splits.size() != ids.size()) {
    throw ConfigError("dataset arrays have inconsistent lengths");
  }
  for (std::size_t i = 1; i < ids.size(); ++i) {
    if (!(ids[i - 1] < ids[i])) throw ConfigError("dataset ids must be unique and sorted (at '" + ids[i] + "')");
  }
  for (const auto& img : images) {
    if (img.shape() != Shape{3, image_size, image_size}) {
      throw ShapeError("dataset image has shape " + shape_str(img.shape()));
    }
  }
  if (task == TaskKind::style) {
    if (labels.size() != ids.size()) throw ConfigError("style dataset needs one label per image");
    for (int y : labels) {
      if (y < 0 || static_cast<std::size_t>(y) >= num_classes()) throw ConfigError("label out of range");
    }
  } else {
    if (targets.size() != ids.size()) throw ConfigError("object dataset needs one label vector per image");
    for (const auto& t : targets) {
      if (t.size() != num_classes()) throw ConfigError("label vector has the wrong length");
    }
  }
}

void SynthConfig::validate() const {
  if (num_style_classes < 1 || num_object_labels < 1 || images_per_class < 1 || image_size < 4 ||
      object_images < 1) {
    throw ConfigError("synthetic corpus sizes must be positive (image_size >= 4)");
  }
  if (num_object_labels > object_shape_names().size()) {
    throw ConfigError("at most " + std::to_string(object_shape_names().size()) + " object labels are available");
  }
  if (!(object_rate >= 0.0) || object_rate * static_cast<double>(num_object_labels) > 3.0) {
    throw ConfigError("object_rate must lie in [0, 3 / num_object_labels]");
  }
}

// ---- procedural textures ---------------------------------------------------

namespace {

using Color = std::array<double, 3>;
constexpr int kFamilies = 8;

enum Family { grating, checkers, blobs, rings, ramp, dots, value_noise, strokes };

struct ClassStyle {
  int family;
  Color c0, c1;
  double freq_lo, freq_hi;
};

// Class-defining statistics for (variant, class).
struct VariantTraits {
  double family_purity;  // probability that an image uses its class family
  double palette_jitter;
  double pixel_noise;
};

VariantTraits traits_for(std::uint64_t variant) {
  if (variant == 0) return {0.85, 0.22, 0.04};
  return {0.0, 0.16, 0.04};
}

Color random_color(Rng& rng) { return {rng.uniform(), rng.uniform(), rng.uniform()}; }

ClassStyle class_style(std::uint64_t variant, std::size_t cls, std::size_t num_classes) {
  Rng rng = Rng::derive(mix64(variant) ^ (cls * 0x9e3779b97f4a7c15ULL), "class-style");
  ClassStyle s;
  // Offset the family assignment per variant so classes do not line up.
  s.family = static_cast<int>((cls + 3 * variant) % kFamilies);
  s.c0 = random_color(rng);
  s.c1 = random_color(rng);
  if (variant == 0) {
    s.freq_lo = 1.5;
    s.freq_hi = 6.0;
  } else {
    // Disjoint-ish frequency bands per class.
    const double t = (static_cast<double>(cls) + rng.uniform(0.0, 0.5)) / static_cast<double>(num_classes);
    s.freq_lo = 1.2 + 6.0 * t;
    s.freq_hi = s.freq_lo + 1.5;
  }
  return s;
}

double smoothstep01(double x) { return x <= 0 ? 0 : x >= 1 ? 1 : x * x * (3 - 2 * x); }

// Renders the scalar pattern t(x, y) in [0, 1] for one image.
std::vector<double> render_pattern(int family, double freq, std::size_t s, Rng& rng) {
  std::vector<double> t(s * s, 0.0);
  const double angle = rng.uniform(0.0, std::numbers::pi);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double ca = std::cos(angle), sa = std::sin(angle);
  const double inv = 1.0 / static_cast<double>(s);
  auto at = [&](std::size_t x, std::size_t y) -> double& { return t[y * s + x]; };
  switch (family) {
    case grating:
      for (std::size_t y = 0; y < s; ++y)
        for (std::size_t x = 0; x < s; ++x) {
          const double u = x * inv, v = y * inv;
          at(x, y) = 0.5 + 0.5 * std::sin(2 * std::numbers::pi * freq * (u * ca + v * sa) + phase);
        }
      break;
    case checkers:
      for (std::size_t y = 0; y < s; ++y)
        for (std::size_t x = 0; x < s; ++x) {
          const double u = x * inv, v = y * inv;
          const double a = std::sin(2 * std::numbers::pi * freq * (u * ca + v * sa) + phase);
          const double b = std::sin(2 * std::numbers::pi * freq * (-u * sa + v * ca));
          at(x, y) = a * b > 0 ? 1.0 : 0.0;
        }
      break;
    case blobs: {
      const int count = static_cast<int>(std::round(freq * 1.5)) + 1;
      const double radius = 0.35 / freq;
      for (int k = 0; k < count; ++k) {
        const double bx = rng.uniform(), by = rng.uniform();
        for (std::size_t y = 0; y < s; ++y)
          for (std::size_t x = 0; x < s; ++x) {
            const double dx = x * inv - bx, dy = y * inv - by;
            at(x, y) += std::exp(-(dx * dx + dy * dy) / (2 * radius * radius));
          }
      }
      for (double& v : t) v = std::min(v, 1.0);
      break;
    }
    case rings: {
      const double cx = rng.uniform(0.2, 0.8), cy = rng.uniform(0.2, 0.8);
      for (std::size_t y = 0; y < s; ++y)
        for (std::size_t x = 0; x < s; ++x) {
          const double r = std::hypot(x * inv - cx, y * inv - cy);
          at(x, y) = 0.5 + 0.5 * std::sin(2 * std::numbers::pi * freq * r + phase);
        }
      break;
    }
    case ramp:
      for (std::size_t y = 0; y < s; ++y)
        for (std::size_t x = 0; x < s; ++x) {
          const double u = x * inv - 0.5, v = y * inv - 0.5;
          const double d = u * ca + v * sa;
          at(x, y) = std::clamp(0.5 + d + 0.15 * std::sin(2 * std::numbers::pi * freq * (v * ca - u * sa)), 0.0, 1.0);
        }
      break;
    case dots: {
      const double r = 0.28;
      for (std::size_t y = 0; y < s; ++y)
        for (std::size_t x = 0; x < s; ++x) {
          const double u = x * inv * freq + phase, v = y * inv * freq;
          const double fu = u - std::floor(u) - 0.5, fv = v - std::floor(v) - 0.5;
          at(x, y) = 1.0 - smoothstep01((std::hypot(fu, fv) - r) * 8.0 + 0.5);
        }
      break;
    }
    case value_noise: {
      const std::size_t g = static_cast<std::size_t>(std::ceil(freq)) + 2;
      std::vector<double> grid(g * g);
      for (double& v : grid) v = rng.uniform();
      for (std::size_t y = 0; y < s; ++y)
        for (std::size_t x = 0; x < s; ++x) {
          const double u = x * inv * freq, v = y * inv * freq;
          const std::size_t i = static_cast<std::size_t>(u), j = static_cast<std::size_t>(v);
          const double fu = smoothstep01(u - i), fv = smoothstep01(v - j);
          const double a = grid[j * g + i] * (1 - fu) + grid[j * g + i + 1] * fu;
          const double b = grid[(j + 1) * g + i] * (1 - fu) + grid[(j + 1) * g + i + 1] * fu;
          at(x, y) = a * (1 - fv) + b * fv;
        }
      break;
    }
    case strokes: {
      const int count = static_cast<int>(std::round(freq * 2.0)) + 2;
      const double width = 0.5 / (freq + 2.0);
      for (int k = 0; k < count; ++k) {
        const double x0 = rng.uniform(), y0 = rng.uniform();
        const double a = angle + rng.uniform(-0.3, 0.3);
        const double len = rng.uniform(0.2, 0.5);
        const double dx = std::cos(a), dy = std::sin(a);
        for (std::size_t y = 0; y < s; ++y)
          for (std::size_t x = 0; x < s; ++x) {
            const double px = x * inv - x0, py = y * inv - y0;
            const double along = std::clamp(px * dx + py * dy, 0.0, len);
            const double d = std::hypot(px - along * dx, py - along * dy);
            if (d < width) at(x, y) = 1.0;
          }
      }
      break;
    }
    default:
      break;
  }
  return t;
}

Tensor colorize(const std::vector<double>& t, const Color& c0, const Color& c1, double noise, std::size_t s, Rng& rng) {
  Tensor img({3, s, s});
  auto o = img.mutable_data();
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < s * s; ++i)
      o[c * s * s + i] = std::clamp(c0[c] + (c1[c] - c0[c]) * t[i] + rng.normal(0.0, noise), 0.0, 1.0);
  return img;
}

bool inside_shape(std::size_t shape, double dx, double dy, double r) {
  switch (shape) {
    case 0:  // disk
      return dx * dx + dy * dy <= r * r;
    case 1: {  // cross
      const double arm = r * 0.3;
      return (std::abs(dx) <= arm && std::abs(dy) <= r) || (std::abs(dy) <= arm && std::abs(dx) <= r);
    }
    case 2: {  // triangle, apex up
      if (dy < -r || dy > r * 0.8) return false;
      const double half = (dy + r) / (1.8 * r) * r;
      return std::abs(dx) <= half;
    }
    case 3: {  // ring
      const double d2 = dx * dx + dy * dy;
      return d2 <= r * r && d2 >= (0.55 * r) * (0.55 * r);
    }
    case 4:  // square
      return std::abs(dx) <= 0.8 * r && std::abs(dy) <= 0.8 * r;
    case 5:  // horizontal bar
      return std::abs(dx) <= r && std::abs(dy) <= 0.3 * r;
    default:
      return false;
  }
}


// Paints one shape in a solid color that contrasts with the local background.
void stamp_shape(Tensor& img, std::size_t shape, double r, double cx, double cy, Rng& rng) {
  const std::size_t s = img.dim(1);
  auto px = img.mutable_data();
  double lum = 0.0;
  std::size_t m = 0;
  for (std::size_t y = 0; y < s; ++y)
    for (std::size_t x = 0; x < s; ++x)
      if (inside_shape(shape, x + 0.5 - cx, y + 0.5 - cy, r)) {
        lum += (px[y * s + x] + px[s * s + y * s + x] + px[2 * s * s + y * s + x]) / 3.0;
        ++m;
      }
  lum = m ? lum / static_cast<double>(m) : 0.5;
  const bool bright = lum < 0.5;
  std::array<double, 3> col;
  for (double& c : col) c = bright ? rng.uniform(0.75, 1.0) : rng.uniform(0.0, 0.25);
  for (std::size_t y = 0; y < s; ++y)
    for (std::size_t x = 0; x < s; ++x)
      if (inside_shape(shape, x + 0.5 - cx, y + 0.5 - cy, r))
        for (std::size_t c = 0; c < 3; ++c) px[c * s * s + y * s + x] = col[c];
}

Tensor render_style_image(std::uint64_t variant, std::size_t cls, std::size_t num_classes, std::size_t s, Rng& rng) {
  const ClassStyle style = class_style(variant, cls, num_classes);
  const VariantTraits tr = traits_for(variant);
  const int family = rng.bernoulli(tr.family_purity) ? style.family : static_cast<int>(rng.below(kFamilies));
  const double freq = rng.uniform(style.freq_lo, style.freq_hi);
  Color c0 = style.c0, c1 = style.c1;
  for (std::size_t c = 0; c < 3; ++c) {
    c0[c] = std::clamp(c0[c] + rng.normal(0.0, tr.palette_jitter), 0.0, 1.0);
    c1[c] = std::clamp(c1[c] + rng.normal(0.0, tr.palette_jitter), 0.0, 1.0);
  }
  if (rng.bernoulli(0.5)) std::swap(c0, c1);
  const auto pattern = render_pattern(family, freq, s, rng);
  return colorize(pattern, c0, c1, tr.pixel_noise, s, rng);
}

std::string make_id(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%06zu", prefix, i);
  return buf;
}

}  // namespace

Dataset generate_style_corpus(const SynthConfig& config) {
  config.validate();
  Dataset ds;
  ds.task = TaskKind::style;
  ds.image_size = config.image_size;
  for (std::size_t c = 0; c < config.num_style_classes; ++c) ds.class_names.push_back("style" + std::to_string(c));
  const std::size_t total = config.num_style_classes * config.images_per_class;
  for (std::size_t i = 0; i < total; ++i) {
    const std::size_t cls = i % config.num_style_classes;
    const std::string id = make_id("style_", i);
    Rng rng = Rng::derive(config.seed, "style-image/" + std::to_string(config.variant) + "/" + id);
    ds.ids.push_back(id);
    ds.images.push_back(render_style_image(config.variant, cls, config.num_style_classes, config.image_size, rng));
    ds.labels.push_back(static_cast<int>(cls));
    ds.splits.push_back(split_for(id, config.seed));
  }
  return ds;
}

std::vector<std::string> object_shape_names() { return {"disk", "cross", "triangle", "ring", "square", "bar"}; }


Dataset generate_object_corpus(const SynthConfig& config, std::uint64_t style_variant) {
  config.validate();
  Dataset ds;
  ds.task = TaskKind::object;
  ds.image_size = config.image_size;
  const auto names = object_shape_names();
  const std::size_t k = config.num_object_labels;
  ds.class_names.assign(names.begin(), names.begin() + static_cast<std::ptrdiff_t>(k));
  const double p_each = config.object_rate * static_cast<double>(k) / 3.0;
  const std::size_t s = config.image_size;
  for (std::size_t i = 0; i < config.object_images; ++i) {
    const std::string id = make_id("object_", i);
    Rng rng = Rng::derive(config.seed, "object-image/" + std::to_string(style_variant) + "/" + id);
    const std::size_t bg_class = rng.below(config.num_style_classes);
    Tensor img = render_style_image(style_variant, bg_class, config.num_style_classes, s, rng);

    std::size_t count = 0;
    for (int t = 0; t < 3; ++t) count += rng.bernoulli(p_each) ? 1 : 0;
    std::vector<std::size_t> order(k);
    for (std::size_t j = 0; j < k; ++j) order[j] = j;
    for (std::size_t j = 0; j + 1 < k; ++j) std::swap(order[j], order[j + rng.below(k - j)]);
    std::vector<double> target(k, 0.0);

    for (std::size_t n = 0; n < count; ++n) {
      const std::size_t shape = order[n];
      target[shape] = 1.0;
      const double r = rng.uniform(0.14, 0.22) * static_cast<double>(s);
      const double cx = rng.uniform(r, static_cast<double>(s) - r), cy = rng.uniform(r, static_cast<double>(s) - r);
      stamp_shape(img, shape, r, cx, cy, rng);
    }
    ds.ids.push_back(id);
    ds.images.push_back(std::move(img));
    ds.targets.push_back(std::move(target));
    ds.splits.push_back(split_for(id, config.seed));
  }
  return ds;
}

// ---- folders ---------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool is_image_extension(const std::string& ext) {
  static const std::set<std::string> known{".ppm", ".pnm", ".png", ".jpg", ".jpeg", ".bmp", ".gif", ".tif", ".tiff"};
  std::string lower = ext;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  return known.count(lower) > 0;
}

}  // namespace

Dataset load_folder(const std::filesystem::path& dir, std::size_t image_size, std::uint64_t split_seed) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("dataset folder " + dir.string() + " does not exist");
  const fs::path csv_path = dir / "labels.csv";
  std::ifstream csv(csv_path);
  if (!csv) throw IoError("cannot open " + csv_path.string());

  std::string line;
  if (!std::getline(csv, line)) throw FormatError(csv_path.string() + ": empty file");
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "id") {
    throw FormatError(csv_path.string() + ": header must start with 'id' followed by label columns");
  }
  const bool style = header.size() == 2 && header[1] == "label";

  // file name -> label cells
  std::map<std::string, std::vector<std::string>> rows;
  std::size_t line_no = 1;
  while (std::getline(csv, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw FormatError(csv_path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " columns, got " + std::to_string(cells.size()));
    }
    std::string file = cells[0];
    if (!fs::exists(dir / file) && fs::exists(dir / (file + ".ppm"))) file += ".ppm";
    if (!rows.emplace(file, std::vector<std::string>(cells.begin() + 1, cells.end())).second) {
      throw FormatError(csv_path.string() + ":" + std::to_string(line_no) + ": duplicate id '" + cells[0] + "'");
    }
  }

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_extension(entry.path().extension().string())) files.push_back(entry.path());
  }
  for (const auto& [file, _] : rows) {
    if (!fs::exists(dir / file)) throw IoError("labels.csv names missing image '" + file + "'");
  }

  struct Item {
    std::string id;
    fs::path path;
    std::vector<std::string> cells;
  };
  std::vector<Item> items;
  for (const auto& f : files) {
    auto it = rows.find(f.filename().string());
    if (it == rows.end()) throw FormatError("no label row for image '" + f.filename().string() + "'");
    items.push_back({f.stem().string(), f, it->second});
  }
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.id < b.id; });

  Dataset ds;
  ds.task = style ? TaskKind::style : TaskKind::object;
  ds.image_size = image_size;
  if (style) {
    std::set<std::string> names;
    for (const auto& it : items) names.insert(it.cells[0]);
    ds.class_names.assign(names.begin(), names.end());
  } else {
    ds.class_names.assign(header.begin() + 1, header.end());
  }
  for (const auto& it : items) {
    const std::string ext = it.path.extension().string();
    if (ext != ".ppm" && ext != ".pnm") {
      throw IoError("cannot decode '" + it.path.filename().string() + "': only binary PPM images are supported");
    }
    Tensor img = read_ppm(it.path);
    if (img.dim(1) != image_size || img.dim(2) != image_size) img = resize_bilinear(img, image_size, image_size);
    ds.ids.push_back(it.id);
    ds.images.push_back(std::move(img));
    ds.splits.push_back(split_for(it.id, split_seed));
    if (style) {
      const auto pos = std::find(ds.class_names.begin(), ds.class_names.end(), it.cells[0]);
      ds.labels.push_back(static_cast<int>(pos - ds.class_names.begin()));
    } else {
      std::vector<double> t;
      for (const auto& c : it.cells) {
        if (c != "0" && c != "1") {
          throw FormatError("label for '" + it.path.filename().string() + "' must be 0 or 1, got '" + c + "'");
        }
        t.push_back(c == "1" ? 1.0 : 0.0);
      }
      ds.targets.push_back(std::move(t));
    }
  }
  for (std::size_t i = 1; i < ds.ids.size(); ++i) {
    if (ds.ids[i] == ds.ids[i - 1]) throw FormatError("two images share the id '" + ds.ids[i] + "'");
  }
  ds.validate();
  return ds;
}

void write_folder(const Dataset& dataset, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::ofstream csv(dir / "labels.csv", std::ios::trunc);
  if (!csv) throw IoError("cannot write " + (dir / "labels.csv").string());
  csv << "id";
  if (dataset.task == TaskKind::style) {
    csv << ",label";
  } else {
    for (const auto& n : dataset.class_names) csv << ',' << n;
  }
  csv << '\n';
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const std::string file = dataset.ids[i] + ".ppm";
    write_ppm(dataset.images[i], dir / file);
    csv << file;
    if (dataset.task == TaskKind::style) {
      csv << ',' << dataset.class_names.at(static_cast<std::size_t>(dataset.labels[i]));
    } else {
      for (double t : dataset.targets[i]) csv << ',' << (t > 0.5 ? 1 : 0);
    }
    csv << '\n';
  }
  if (!csv) throw IoError("write failed for labels.csv");
}

}  // namespace ftscope
