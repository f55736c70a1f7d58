#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ftscope/data.hpp"
#include "ftscope/model.hpp"
#include "ftscope/tensor.hpp"

namespace ftscope {

// ---- CKA -------------------------------------------------------------------

/// Linear CKA between X [N, Cx] and Y [N, Cy]. Throws ShapeError on an N
/// mismatch and DegenerateInputError when either centered matrix is zero.
double linear_cka(const Tensor& x, const Tensor& y);

/// Per-layer scalar series in canonical layer order.
struct LayerReport {
  std::string metric;
  std::vector<std::pair<std::string, double>> values;
  std::string model_a;
  std::string model_b;
  std::string dataset;

  double at(std::string_view layer) const;
  std::string to_csv() const;   // layer,value
  std::string to_json() const;
};

/// Globally pooled post-ReLU activations [N, C] for each layer, over the
/// selected images in the given order.
std::map<std::string, Tensor> capture_features(const ModelCheckpoint& model, const Dataset& dataset,
                                               std::span<const std::size_t> index, std::span<const std::string> layers);

LayerReport layerwise_cka(const ModelCheckpoint& a, const ModelCheckpoint& b, const Dataset& dataset,
                          std::span<const std::size_t> index, std::span<const std::string> layers);

// ---- kernel distance -------------------------------------------------------

struct KernelDistance {
  /// One entry per convolution kernel tensor, canonical order.
  std::vector<std::pair<std::string, double>> per_kernel;
  double mean = 0.0;

  /// Mean of per-kernel norms grouped by canonical layer (stem conv or block).
  LayerReport by_layer() const;
};

/// Euclidean norm of each conv kernel difference and their unweighted mean.
/// Biases and dense layers are ignored, so differing heads are allowed.
KernelDistance kernel_l2(const ModelCheckpoint& a, const ModelCheckpoint& b);

// ---- maximal activation sets -------------------------------------------------

struct TopKEntry {
  std::string id;
  double score = 0.0;

  bool operator==(const TopKEntry&) const = default;
};

struct TopKSet {
  std::string layer;
  std::size_t channel = 0;
  std::size_t k = 100;
  std::vector<TopKEntry> entries;

  std::string to_csv() const;  // rank,image_id,score
};

/// Highest scores first, ties by ascending id; min(k, n) entries.
TopKSet topk_from_scores(std::span<const std::string> ids, std::span<const double> scores, std::size_t k);

/// Score = spatial mean of the channel's post-ReLU map.
TopKSet topk_activations(const ModelCheckpoint& model, const Dataset& dataset, std::span<const std::size_t> index,
                         const std::string& layer, std::size_t channel, std::size_t k = 100);

/// Top-K sets of every channel of one layer from pooled features [N, C].
std::vector<TopKSet> topk_all_channels(const Tensor& features, std::span<const std::string> ids,
                                       const std::string& layer, std::size_t k = 100);

/// 100 * |ids(a) ∩ ids(b)| / min(|a|, |b|).
double overlap_ratio(const TopKSet& a, const TopKSet& b);

struct EntropyReport {
  std::vector<double> p;  // per class fraction
  std::size_t num_classes = 0;
  double max_entropy = 0.0;  // log2(min(K, num_classes))
  double value = 0.0;        // in [0, 1]
};

/// Normalized Shannon entropy (base 2) of the set's class composition.
EntropyReport class_entropy(const TopKSet& set, const std::map<std::string, int>& labels, std::size_t num_classes);
/// Same formula from explicit class counts; `k` is the set size used for maxE.
EntropyReport entropy_from_counts(std::span<const std::size_t> counts, std::size_t k);

std::map<std::string, int> label_map(const Dataset& dataset);

// ---- classification metrics ------------------------------------------------

/// Percent of rows whose label ranks among the k largest probabilities (ties
/// by class index).
double topk_accuracy(const Tensor& probs, std::span<const int> labels, std::size_t k);

struct MapResult {
  double value = 0.0;                     // percent, mean over included classes
  std::vector<std::optional<double>> ap;  // percent; empty for excluded classes
  std::vector<std::size_t> excluded;
  std::vector<std::string> warnings;
};

/// Average precision per class with scores sorted descending (ties by ascending
/// id, or row index when ids is empty). Classes without positives are excluded
/// with a warning, or rejected with DegenerateInputError in strict mode.
MapResult mean_average_precision(const Tensor& scores, const Tensor& targets, std::span<const std::string> ids = {},
                                 bool strict = false);

// ---- summaries -------------------------------------------------------------

struct Summary {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double mean = 0.0;
  double q3 = 0.0;
  double max = 0.0;
};

/// Five-number summary plus mean; quantiles use linear interpolation between
/// order statistics (position (n - 1) * q).
Summary summarize(std::span<const double> values);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace ftscope
