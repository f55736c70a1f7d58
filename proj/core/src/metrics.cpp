#include "ftscope/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "ftscope/error.hpp"
#include "ftscope/report.hpp"
#include "json.hpp"

namespace ftscope {

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Mat centered(const Tensor& t) {
  if (t.rank() != 2) throw ShapeError("feature matrix must be [N, C], got " + shape_str(t.shape()));
  Mat m = Eigen::Map<const Mat>(t.ptr(), static_cast<Eigen::Index>(t.dim(0)), static_cast<Eigen::Index>(t.dim(1)));
  m.rowwise() -= m.colwise().mean();
  return m;
}

}  // namespace

double linear_cka(const Tensor& x, const Tensor& y) {
  if (x.rank() != 2 || y.rank() != 2 || x.dim(0) != y.dim(0)) {
    throw ShapeError("linear_cka needs [N, Cx] and [N, Cy] with equal N, got " + shape_str(x.shape()) + " and " +
                     shape_str(y.shape()));
  }
  if (x.dim(0) < 2) throw DegenerateInputError("linear_cka needs at least two examples");
  const Mat xc = centered(x), yc = centered(y);
  const double num = (yc.transpose() * xc).squaredNorm();
  const double den = (xc.transpose() * xc).norm() * (yc.transpose() * yc).norm();
  if (!(den > 0.0)) throw DegenerateInputError("linear_cka: a feature matrix is constant after centering");
  return num / den;
}

double LayerReport::at(std::string_view layer) const {
  for (const auto& [name, v] : values)
    if (name == layer) return v;
  throw ConfigError("layer '" + std::string(layer) + "' not in " + metric + " report");
}

std::string LayerReport::to_csv() const {
  std::string s = "layer,value\n";
  for (const auto& [name, v] : values) s += name + "," + format_double(v) + "\n";
  return s;
}

std::string LayerReport::to_json() const {
  nlohmann::ordered_json j;
  j["metric"] = metric;
  j["model_a"] = model_a;
  j["model_b"] = model_b;
  j["dataset"] = dataset;
  j["values"] = nlohmann::ordered_json::array();
  for (const auto& [name, v] : values) j["values"].push_back({{"layer", name}, {"value", v}});
  return j.dump(2) + "\n";
}

std::map<std::string, Tensor> capture_features(const ModelCheckpoint& model, const Dataset& dataset,
                                               std::span<const std::size_t> index,
                                               std::span<const std::string> layers) {
  if (index.empty()) throw ConfigError("capture_features: no images selected");
  constexpr std::size_t kChunk = 64;
  std::map<std::string, Tensor> out;
  for (const auto& l : layers) {
    const Shape s = layer_output_shape(model.spec, l);
    out.emplace(l, Tensor({index.size(), s[0]}));
  }
  for (std::size_t start = 0; start < index.size(); start += kChunk) {
    const auto chunk = index.subspan(start, std::min(kChunk, index.size() - start));
    const ForwardResult r = forward(model, dataset.batch(chunk), layers, CaptureMode::pooled);
    for (const auto& rec : r.records) {
      Tensor& dst = out.at(rec.layer);
      const std::size_t c = dst.dim(1);
      std::copy_n(rec.values.ptr(), chunk.size() * c, dst.mutable_data().data() + start * c);
    }
  }
  return out;
}

LayerReport layerwise_cka(const ModelCheckpoint& a, const ModelCheckpoint& b, const Dataset& dataset,
                          std::span<const std::size_t> index, std::span<const std::string> layers) {
  if (!a.spec.same_body(b.spec)) throw ConfigError("layerwise_cka: models have different architectures");
  const auto fa = capture_features(a, dataset, index, layers);
  const auto fb = a.params.bitwise_equal(b.params) ? fa : capture_features(b, dataset, index, layers);
  LayerReport r;
  r.metric = "cka";
  r.model_a = a.id();
  r.model_b = b.id();
  for (const auto& l : a.spec.layer_names()) {
    if (std::find(layers.begin(), layers.end(), l) == layers.end()) continue;
    r.values.emplace_back(l, linear_cka(fa.at(l), fb.at(l)));
  }
  return r;
}

// ---- kernel distance -------------------------------------------------------

KernelDistance kernel_l2(const ModelCheckpoint& a, const ModelCheckpoint& b) {
  if (!a.spec.same_body(b.spec)) throw ConfigError("kernel_l2: models have different architectures");
  KernelDistance d;
  double total = 0.0;
  for (const auto& info : param_layout(a.spec)) {
    if (info.role != ParamRole::conv_kernel) continue;
    const auto& ta = a.params.at(info.name);
    const auto& tb = b.params.at(info.name);
    double ss = 0.0;
    for (std::size_t i = 0; i < ta.size(); ++i) {
      const double diff = ta[i] - tb[i];
      ss += diff * diff;
    }
    d.per_kernel.emplace_back(info.name, std::sqrt(ss));
    total += std::sqrt(ss);
  }
  d.mean = d.per_kernel.empty() ? 0.0 : total / static_cast<double>(d.per_kernel.size());
  return d;
}

LayerReport KernelDistance::by_layer() const {
  LayerReport r;
  r.metric = "l2";
  std::vector<std::pair<std::string, std::pair<double, std::size_t>>> acc;
  for (const auto& [name, v] : per_kernel) {
    const std::string layer = name.substr(0, name.find('/'));
    if (acc.empty() || acc.back().first != layer) acc.push_back({layer, {0.0, 0}});
    acc.back().second.first += v;
    ++acc.back().second.second;
  }
  for (const auto& [layer, s] : acc) r.values.emplace_back(layer, s.first / static_cast<double>(s.second));
  return r;
}

// ---- maximal activation sets -------------------------------------------------

std::string TopKSet::to_csv() const {
  std::string s = "rank,image_id,score\n";
  for (std::size_t i = 0; i < entries.size(); ++i)
    s += std::to_string(i + 1) + "," + entries[i].id + "," + format_double(entries[i].score) + "\n";
  return s;
}

TopKSet topk_from_scores(std::span<const std::string> ids, std::span<const double> scores, std::size_t k) {
  if (ids.size() != scores.size()) throw ShapeError("topk: ids and scores differ in length");
  if (k == 0) throw ConfigError("topk: k must be at least 1");
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t n = std::min(k, order.size());
  auto before = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids[a] < ids[b];
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(), before);
  TopKSet set;
  set.k = k;
  set.entries.reserve(n);
  std::set<std::string_view> seen;
  for (std::size_t i = 0; i < n; ++i) {
    if (!seen.insert(ids[order[i]]).second) throw ConfigError("topk: duplicate image id '" + ids[order[i]] + "'");
    set.entries.push_back({ids[order[i]], scores[order[i]]});
  }
  return set;
}

std::vector<TopKSet> topk_all_channels(const Tensor& features, std::span<const std::string> ids,
                                       const std::string& layer, std::size_t k) {
  if (features.rank() != 2 || features.dim(0) != ids.size()) {
    throw ShapeError("topk: features " + shape_str(features.shape()) + " do not match " + std::to_string(ids.size()) +
                     " ids");
  }
  const std::size_t n = features.dim(0), c = features.dim(1);
  std::vector<TopKSet> out;
  out.reserve(c);
  std::vector<double> col(n);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < n; ++i) col[i] = features[i * c + ch];
    TopKSet s = topk_from_scores(ids, col, k);
    s.layer = layer;
    s.channel = ch;
    out.push_back(std::move(s));
  }
  return out;
}

TopKSet topk_activations(const ModelCheckpoint& model, const Dataset& dataset, std::span<const std::size_t> index,
                         const std::string& layer, std::size_t channel, std::size_t k) {
  const Shape s = layer_output_shape(model.spec, layer);
  if (channel >= s[0]) {
    throw ConfigError("unknown channel " + std::to_string(channel) + " in layer '" + layer + "' (" +
                      std::to_string(s[0]) + " channels)");
  }
  const std::vector<std::string> layers{layer};
  const auto feats = capture_features(model, dataset, index, layers);
  const Tensor& f = feats.at(layer);
  std::vector<std::string> ids;
  std::vector<double> scores;
  for (std::size_t i = 0; i < index.size(); ++i) {
    ids.push_back(dataset.ids[index[i]]);
    scores.push_back(f[i * s[0] + channel]);
  }
  TopKSet set = topk_from_scores(ids, scores, k);
  set.layer = layer;
  set.channel = channel;
  return set;
}

double overlap_ratio(const TopKSet& a, const TopKSet& b) {
  if (a.entries.empty() || b.entries.empty()) throw DegenerateInputError("overlap_ratio: empty top-K set");
  std::set<std::string_view> ids;
  for (const auto& e : a.entries) ids.insert(e.id);
  std::size_t common = 0;
  for (const auto& e : b.entries) common += ids.count(e.id);
  return 100.0 * static_cast<double>(common) / static_cast<double>(std::min(a.entries.size(), b.entries.size()));
}

EntropyReport entropy_from_counts(std::span<const std::size_t> counts, std::size_t k) {
  EntropyReport r;
  r.num_classes = counts.size();
  const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
  if (!(total > 0.0)) throw DegenerateInputError("class_entropy: empty set");
  r.p.resize(counts.size());
  double h = 0.0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    r.p[c] = static_cast<double>(counts[c]) / total;
    if (r.p[c] > 0.0) h -= r.p[c] * std::log2(r.p[c]);
  }
  r.max_entropy = std::log2(static_cast<double>(std::min(k, counts.size())));
  r.value = r.max_entropy > 0.0 ? h / r.max_entropy : 0.0;
  return r;
}

EntropyReport class_entropy(const TopKSet& set, const std::map<std::string, int>& labels, std::size_t num_classes) {
  std::vector<std::size_t> counts(num_classes, 0);
  for (const auto& e : set.entries) {
    const auto it = labels.find(e.id);
    if (it == labels.end()) throw ConfigError("class_entropy: no label for image '" + e.id + "'");
    if (it->second < 0 || static_cast<std::size_t>(it->second) >= num_classes) {
      throw ConfigError("class_entropy: label out of range for image '" + e.id + "'");
    }
    ++counts[static_cast<std::size_t>(it->second)];
  }
  return entropy_from_counts(counts, set.entries.size());
}

std::map<std::string, int> label_map(const Dataset& dataset) {
  if (dataset.task != TaskKind::style) throw ConfigError("label_map needs single-label (style) data");
  std::map<std::string, int> m;
  for (std::size_t i = 0; i < dataset.size(); ++i) m.emplace(dataset.ids[i], dataset.labels[i]);
  return m;
}

// ---- classification metrics ------------------------------------------------

double topk_accuracy(const Tensor& probs, std::span<const int> labels, std::size_t k) {
  if (probs.rank() != 2 || probs.dim(0) != labels.size()) {
    throw ShapeError("topk_accuracy: probs " + shape_str(probs.shape()) + " vs " + std::to_string(labels.size()) +
                     " labels");
  }
  const std::size_t n = probs.dim(0), classes = probs.dim(1);
  if (k < 1 || k > classes) throw ConfigError("topk_accuracy: k must be in [1, " + std::to_string(classes) + "]");
  if (n == 0) throw DegenerateInputError("topk_accuracy: no rows");
  std::size_t hits = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const int y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= classes) throw ConfigError("topk_accuracy: label out of range");
    const double py = probs[r * classes + static_cast<std::size_t>(y)];
    std::size_t above = 0;
    for (std::size_t c = 0; c < classes; ++c) {
      const double pc = probs[r * classes + c];
      if (pc > py || (pc == py && c < static_cast<std::size_t>(y))) ++above;
    }
    hits += above < k;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(n);
}

MapResult mean_average_precision(const Tensor& scores, const Tensor& targets, std::span<const std::string> ids,
                                 bool strict) {
  if (scores.rank() != 2 || scores.shape() != targets.shape()) {
    throw ShapeError("mAP: scores " + shape_str(scores.shape()) + " and labels " + shape_str(targets.shape()) +
                     " must be equal [N, K]");
  }
  const std::size_t n = scores.dim(0), k = scores.dim(1);
  if (!ids.empty() && ids.size() != n) throw ShapeError("mAP: ids do not match rows");
  MapResult r;
  r.ap.resize(k);
  std::vector<std::size_t> order(n);
  double total = 0.0;
  std::size_t included = 0;
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t positives = 0;
    for (std::size_t i = 0; i < n; ++i) positives += targets[i * k + c] > 0.5;
    if (positives == 0) {
      if (strict) throw DegenerateInputError("mAP: class " + std::to_string(c) + " has no positives");
      r.excluded.push_back(c);
      r.warnings.push_back("class " + std::to_string(c) + " has no positives; excluded from mAP");
      continue;
    }
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double sa = scores[a * k + c], sb = scores[b * k + c];
      if (sa != sb) return sa > sb;
      return ids.empty() ? a < b : ids[a] < ids[b];
    });
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t rank = 0; rank < n; ++rank) {
      if (targets[order[rank] * k + c] > 0.5) {
        ++hits;
        sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
      }
    }
    const double ap = 100.0 * sum / static_cast<double>(positives);
    r.ap[c] = ap;
    total += ap;
    ++included;
  }
  if (included == 0) throw DegenerateInputError("mAP: no class has positives");
  r.value = total / static_cast<double>(included);
  return r;
}

// ---- summaries -------------------------------------------------------------

Summary summarize(std::span<const double> values) {
  if (values.empty()) throw DegenerateInputError("summarize: no values");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  auto q = [&](double p) {
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  Summary s;
  s.min = v.front();
  s.max = v.back();
  s.q1 = q(0.25);
  s.median = q(0.5);
  s.q3 = q(0.75);
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  return s;
}

namespace {

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ShapeError("spearman needs two equal-length series (n >= 2)");
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw DegenerateInputError("spearman: constant series");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace ftscope
