#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ftscope/tensor.hpp"

namespace ftscope {

enum class TaskKind { style, object };
enum class Split { train, val, test };

const char* split_name(Split split);

/// Split fractions used for every corpus: 70% train, 15% validation, 15% test.
Split split_for(std::string_view id, std::uint64_t split_seed);

/// Labeled image collection. Style datasets carry one class per image; object
/// datasets carry a binary vector per image. Images are [3, S, S] in [0, 1] and
/// stored in ascending id order.
struct Dataset {
  TaskKind task = TaskKind::style;
  std::vector<std::string> ids;
  std::vector<Tensor> images;
  std::vector<int> labels;                  // style: class index per image
  std::vector<std::vector<double>> targets;  // object: 0/1 per label
  std::vector<std::string> class_names;
  std::vector<Split> splits;
  std::size_t image_size = 0;

  std::size_t size() const { return ids.size(); }
  std::size_t num_classes() const { return class_names.size(); }
  std::vector<std::size_t> indices(Split split) const;
  std::vector<std::size_t> all_indices() const;

  /// Stacks the selected images into [B, 3, S, S].
  Tensor batch(std::span<const std::size_t> index) const;
  /// [B, K] 0/1 matrix for object tasks.
  Tensor target_batch(std::span<const std::size_t> index) const;
  std::vector<int> label_batch(std::span<const std::size_t> index) const;

  /// Throws ConfigError when ids are unsorted/duplicated or labels are missing.
  void validate() const;
};

struct SynthConfig {
  std::size_t num_style_classes = 8;
  std::size_t num_object_labels = 4;
  std::size_t images_per_class = 100;
  std::size_t image_size = 32;
  std::uint64_t seed = 0;
  /// Selects the class-defining statistics. Variant 0 ties classes to texture
  /// families; other variants tie them to palette and frequency bands drawn
  /// from the same generator family.
  std::uint64_t variant = 0;
  /// Object corpus size and per-label positive rate (must be <= 0.75).
  std::size_t object_images = 400;
  double object_rate = 0.35;

  void validate() const;
};

/// Procedural texture corpus: one class per style, images_per_class each.
Dataset generate_style_corpus(const SynthConfig& config);

/// Multi-label corpus: each image is a background drawn from the style generator
/// `style_variant` plus 0-3 composited shapes; the label vector records which
/// shapes were drawn.
Dataset generate_object_corpus(const SynthConfig& config, std::uint64_t style_variant);

/// Names of the shapes used by the object corpus (the first num_object_labels).
std::vector<std::string> object_shape_names();

/// Reads `labels.csv` (header `id,label` or `id,l1,...,lK`) and the PPM images it
/// names. The id column holds file names; dataset ids are the file stems. Images
/// are resized to `image_size` with bilinear resampling.
Dataset load_folder(const std::filesystem::path& dir, std::size_t image_size, std::uint64_t split_seed = 0);

/// Writes images as `<id>.ppm` plus `labels.csv` in the format load_folder reads.
void write_folder(const Dataset& dataset, const std::filesystem::path& dir);

}  // namespace ftscope
