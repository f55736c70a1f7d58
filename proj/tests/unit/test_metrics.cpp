#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "ftscope/data.hpp"
#include "ftscope/error.hpp"
#include "ftscope/metrics.hpp"
#include "ftscope/model.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace ftscope;
using ftscope::test::random_tensor;
using ftscope::oracle::ap_oracle;
using ftscope::oracle::cka_oracle;
using ftscope::oracle::matmul;
using ftscope::oracle::random_orthogonal;

namespace {

std::vector<std::string> make_ids(std::size_t n, const std::string& prefix = "img_") {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%03zu", i);
    ids.push_back(prefix + buf);
  }
  return ids;
}

TopKSet set_of(const std::vector<std::string>& ids) {
  TopKSet s;
  s.k = ids.size();
  for (std::size_t i = 0; i < ids.size(); ++i) s.entries.push_back({ids[i], static_cast<double>(ids.size() - i)});
  return s;
}

Dataset small_style(std::size_t per_class = 3, std::uint64_t seed = 4) {
  SynthConfig c;
  c.images_per_class = per_class;
  c.seed = seed;
  return generate_style_corpus(c);
}

}  // namespace

// ---- CKA ----------------------------------------------------------------------

TEST(LinearCka, SelfSimilarityIsOne) {
  Rng rng(1);
  const Tensor x = random_tensor({12, 5}, rng);
  EXPECT_NEAR(linear_cka(x, x), 1.0, 1e-12);
}

TEST(LinearCka, InvariantToOrthogonalMapAndIsotropicScale) {
  Rng rng(2);
  const Tensor x = random_tensor({20, 6}, rng);
  const Tensor q = random_orthogonal(6, rng);
  EXPECT_NEAR(linear_cka(x, matmul(x, q)), 1.0, 1e-9);
  Tensor scaled = x;
  for (double& v : scaled.mutable_data()) v *= 3.7;
  EXPECT_NEAR(linear_cka(x, scaled), 1.0, 1e-9);

  const Tensor y = random_tensor({20, 3}, rng);
  const double base = linear_cka(x, y);
  EXPECT_NEAR(linear_cka(matmul(x, q), y), base, 1e-9);
  EXPECT_NEAR(linear_cka(scaled, y), base, 1e-9);
}

TEST(LinearCka, FixtureMatchesCenteredHsic) {
  const Tensor x({3, 2}, {1, 2, 3, 4, 5, 7});
  const Tensor y({3, 1}, {1, 0, 2});
  const double expected = cka_oracle(x, y);
  EXPECT_NEAR(linear_cka(x, y), expected, 1e-12);
  // Hand value: Xc = [[-2,-2.33..],[0,-0.33..],[2,2.66..]], Yc = [0,-1,1].
  EXPECT_GT(expected, 0.0);
  EXPECT_LT(expected, 1.0);
}

TEST(LinearCka, RandomMatchesOracleAndIsSymmetricAndBounded) {
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 3 + rng.below(10), cx = 1 + rng.below(6), cy = 1 + rng.below(6);
    const Tensor x = random_tensor({n, cx}, rng), y = random_tensor({n, cy}, rng);
    const double v = linear_cka(x, y);
    EXPECT_NEAR(v, cka_oracle(x, y), 1e-10);
    EXPECT_NEAR(v, linear_cka(y, x), 1e-12);
    EXPECT_GE(v, -1e-12);
    EXPECT_LE(v, 1.0 + 1e-12);
  }
}

TEST(LinearCka, Errors) {
  Rng rng(4);
  EXPECT_THROW(linear_cka(random_tensor({4, 2}, rng), random_tensor({5, 2}, rng)), ShapeError);
  const Tensor constant({4, 2}, std::vector<double>(8, 3.0));
  EXPECT_THROW(linear_cka(constant, random_tensor({4, 2}, rng)), DegenerateInputError);
}

TEST(LayerwiseCka, IdenticalModelsGiveOne) {
  const Dataset ds = small_style();
  const auto m = build_model(ModelSpec::desk({HeadKind::softmax, 8}), 3);
  const auto layers = m.spec.layer_names();
  const auto idx = ds.all_indices();
  const LayerReport r = layerwise_cka(m, m, ds, idx, layers);
  ASSERT_EQ(r.values.size(), layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    EXPECT_EQ(r.values[i].first, layers[i]);
    EXPECT_NEAR(r.values[i].second, 1.0, 1e-12) << layers[i];
  }
}

TEST(LayerwiseCka, ReinitTopBlockLeavesLowerLayersAtOne) {
  const Dataset ds = small_style();
  const auto a = build_model(ModelSpec::desk({HeadKind::softmax, 8}), 3);
  const std::vector<std::string> top{"mixed5b"};
  const auto b = reinitialize_layers(a, top, 99);
  const auto layers = a.spec.layer_names();
  const auto idx = ds.all_indices();
  const LayerReport r = layerwise_cka(a, b, ds, idx, layers);
  for (const auto& [layer, v] : r.values) {
    if (layer == "mixed5b") {
      EXPECT_LT(v, 1.0 - 1e-6);
    } else {
      EXPECT_NEAR(v, 1.0, 1e-12) << layer;
    }
  }
  EXPECT_THROW(r.at("nope"), ConfigError);
}

TEST(LayerReport, Serialization) {
  LayerReport r{"cka", {{"conv2d0", 1.0}, {"mixed3a", 0.5}}, "a", "b", "ds"};
  EXPECT_EQ(r.to_csv(), "layer,value\nconv2d0,1\nmixed3a,0.5\n");
  const std::string j = r.to_json();
  EXPECT_NE(j.find("\"metric\""), std::string::npos);
  EXPECT_NE(j.find("mixed3a"), std::string::npos);
  EXPECT_DOUBLE_EQ(r.at("mixed3a"), 0.5);
}

// ---- kernel distance ------------------------------------------------------------

TEST(KernelL2, IdenticalIsZero) {
  const auto m = build_model(ModelSpec::desk({HeadKind::softmax, 4}), 1);
  const KernelDistance d = kernel_l2(m, m);
  EXPECT_EQ(d.mean, 0.0);
  for (const auto& [name, v] : d.per_kernel) EXPECT_EQ(v, 0.0) << name;
}

TEST(KernelL2, ShiftOneKernelClosedForm) {
  const auto a = build_model(ModelSpec::desk({HeadKind::softmax, 4}), 1);
  auto b = a;
  std::size_t kernels = 0;
  for (const auto& info : param_layout(a.spec))
    if (info.role == ParamRole::conv_kernel) ++kernels;
  const std::string target = "mixed4c/3x3/weight";
  Tensor w = b.params.at(target);
  for (double& v : w.mutable_data()) v += 0.01;
  const double n = static_cast<double>(w.size());
  b.params.set(target, w);
  const KernelDistance d = kernel_l2(a, b);
  ASSERT_EQ(d.per_kernel.size(), kernels);
  for (const auto& [name, v] : d.per_kernel) {
    if (name == target) {
      EXPECT_NEAR(v, 0.01 * std::sqrt(n), 1e-12);
    } else {
      EXPECT_EQ(v, 0.0) << name;
    }
  }
  EXPECT_NEAR(d.mean, 0.01 * std::sqrt(n) / static_cast<double>(kernels), 1e-12);
}

TEST(KernelL2, MatchesFlattenOracleAndIgnoresHeadsAndBiases) {
  const auto a = build_model(ModelSpec::desk({HeadKind::softmax, 4}), 1);
  const auto b = build_model(ModelSpec::desk({HeadKind::sigmoid, 7}), 2);
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& info : param_layout(a.spec)) {
    if (info.role != ParamRole::conv_kernel) continue;
    const Tensor& x = a.params.at(info.name);
    const Tensor& y = b.params.at(info.name);
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
    sum += std::sqrt(s);
    ++count;
  }
  EXPECT_NEAR(kernel_l2(a, b).mean, sum / static_cast<double>(count), 1e-12);

  auto c = a;
  Tensor bias = c.params.at("mixed3a/1x1/bias");
  for (double& v : bias.mutable_data()) v += 1.0;
  c.params.set("mixed3a/1x1/bias", bias);
  EXPECT_EQ(kernel_l2(a, c).mean, 0.0);
}

TEST(KernelL2, MetricAxiomsOnRandomTriples) {
  const ModelSpec spec = ModelSpec::desk({HeadKind::softmax, 3});
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto a = build_model(spec, 10 + s), b = build_model(spec, 20 + s), c = build_model(spec, 30 + s);
    const double ab = kernel_l2(a, b).mean, ba = kernel_l2(b, a).mean;
    const double bc = kernel_l2(b, c).mean, ac = kernel_l2(a, c).mean;
    EXPECT_NEAR(ab, ba, 1e-15);
    EXPECT_GT(ab, 0.0);
    EXPECT_LE(ac, ab + bc + 1e-9);
  }
}

TEST(KernelL2, RejectsDifferentBodies) {
  ModelSpec other = ModelSpec::desk({HeadKind::softmax, 3});
  other.blocks.pop_back();
  EXPECT_THROW(kernel_l2(build_model(ModelSpec::desk({HeadKind::softmax, 3}), 1), build_model(other, 1)),
               ConfigError);
}

TEST(KernelL2, ByLayerGroupsKernels) {
  const auto a = build_model(ModelSpec::desk({HeadKind::softmax, 4}), 1);
  const auto b = build_model(ModelSpec::desk({HeadKind::softmax, 4}), 2);
  const KernelDistance d = kernel_l2(a, b);
  const LayerReport r = d.by_layer();
  EXPECT_EQ(r.values.size(), a.spec.layer_names().size());
  double sum = 0.0;
  int n = 0;
  for (const auto& [name, v] : d.per_kernel)
    if (name.rfind("mixed3a/", 0) == 0) sum += v, ++n;
  EXPECT_NEAR(r.at("mixed3a"), sum / n, 1e-12);
}

// ---- top-K ----------------------------------------------------------------

TEST(TopK, KAboveSizeReturnsEverythingSorted) {
  const std::vector<std::string> ids{"a", "b", "c", "d"};
  const std::vector<double> scores{0.2, 0.9, 0.5, 0.1};
  const TopKSet s = topk_from_scores(ids, scores, 100);
  ASSERT_EQ(s.entries.size(), 4u);
  EXPECT_EQ(s.entries[0].id, "b");
  EXPECT_EQ(s.entries[1].id, "c");
  EXPECT_EQ(s.entries[2].id, "a");
  EXPECT_EQ(s.entries[3].id, "d");
}

TEST(TopK, TiesBrokenByAscendingId) {
  const std::vector<std::string> ids{"d", "b", "c", "a"};
  const std::vector<double> scores{1.0, 1.0, 2.0, 1.0};
  const TopKSet s = topk_from_scores(ids, scores, 3);
  ASSERT_EQ(s.entries.size(), 3u);
  EXPECT_EQ(s.entries[0].id, "c");
  EXPECT_EQ(s.entries[1].id, "a");
  EXPECT_EQ(s.entries[2].id, "b");
}

TEST(TopK, TwentyImageFixtureMatchesFullSort) {
  Rng rng(8);
  const auto ids = make_ids(20);
  for (std::size_t k : {1u, 5u, 13u, 20u}) {
    std::vector<double> scores(20);
    // coarse values force ties
    for (double& v : scores) v = static_cast<double>(rng.below(6)) * 0.25;
    std::vector<std::size_t> order(20);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
    const TopKSet s = topk_from_scores(ids, scores, k);
    ASSERT_EQ(s.entries.size(), k);
    for (std::size_t i = 0; i < k; ++i) {
      EXPECT_EQ(s.entries[i].id, ids[order[i]]);
      EXPECT_EQ(s.entries[i].score, scores[order[i]]);
    }
  }
}

TEST(TopK, Errors) {
  const std::vector<std::string> ids{"a", "a"};
  const std::vector<double> scores{1.0, 2.0};
  EXPECT_THROW(topk_from_scores(ids, scores, 0), ConfigError);
  EXPECT_THROW(topk_from_scores(ids, scores, 2), ConfigError);
  const std::vector<double> one{1.0};
  EXPECT_THROW(topk_from_scores(ids, one, 1), ShapeError);
}

TEST(TopK, CsvLayout) {
  const std::vector<std::string> ids{"x", "y"};
  const std::vector<double> scores{0.25, 0.5};
  const TopKSet s = topk_from_scores(ids, scores, 2);
  EXPECT_EQ(s.to_csv(), "rank,image_id,score\n1,y,0.5\n2,x,0.25\n");
}

TEST(TopKActivations, ZeroImageRanksLast) {
  Dataset ds = small_style(2);
  Tensor& last = ds.images.back();
  last = Tensor::zeros(last.shape());
  const auto m = build_model(ModelSpec::desk({HeadKind::softmax, 8}), 5);
  const auto idx = ds.all_indices();
  const TopKSet s = topk_activations(m, ds, idx, "mixed3b", 3, 100);
  ASSERT_EQ(s.entries.size(), ds.size());
  EXPECT_EQ(s.entries.back().id, ds.ids.back());
  EXPECT_EQ(s.entries.back().score, 0.0);
  EXPECT_GT(s.entries.front().score, 0.0);
}

TEST(TopKActivations, AgreesWithPooledCapture) {
  const Dataset ds = small_style(2);
  const auto m = build_model(ModelSpec::desk({HeadKind::softmax, 8}), 6);
  const auto idx = ds.all_indices();
  const std::vector<std::string> layer{"mixed4a"};
  const auto feats = capture_features(m, ds, idx, layer).at("mixed4a");
  const auto all = topk_all_channels(feats, ds.ids, "mixed4a", 7);
  ASSERT_EQ(all.size(), feats.dim(1));
  for (std::size_t c : {0u, 11u}) {
    const TopKSet s = topk_activations(m, ds, idx, "mixed4a", c, 7);
    ASSERT_EQ(s.entries.size(), 7u);
    for (std::size_t i = 0; i < 7; ++i) {
      EXPECT_EQ(s.entries[i].id, all[c].entries[i].id);
      EXPECT_NEAR(s.entries[i].score, all[c].entries[i].score, 1e-12);
    }
  }
  EXPECT_THROW(topk_activations(m, ds, idx, "mixed4a", feats.dim(1), 5), ConfigError);
  EXPECT_THROW(topk_activations(m, ds, idx, "nope", 0, 5), ConfigError);
}

// ---- overlap and entropy ------------------------------------------------------------

TEST(Overlap, Basics) {
  const auto ids = make_ids(100);
  const TopKSet a = set_of(ids);
  EXPECT_DOUBLE_EQ(overlap_ratio(a, a), 100.0);
  const TopKSet other = set_of(make_ids(100, "other_"));
  EXPECT_DOUBLE_EQ(overlap_ratio(a, other), 0.0);
  EXPECT_THROW(overlap_ratio(a, TopKSet{}), DegenerateInputError);
}

TEST(Overlap, FortySixSharedOfHundred) {
  const auto ids = make_ids(100);
  std::vector<std::string> mixed(ids.begin(), ids.begin() + 46);
  const auto fresh = make_ids(54, "new_");
  mixed.insert(mixed.end(), fresh.begin(), fresh.end());
  const TopKSet a = set_of(ids), b = set_of(mixed);
  EXPECT_DOUBLE_EQ(overlap_ratio(a, b), 46.0);
  EXPECT_DOUBLE_EQ(overlap_ratio(b, a), 46.0);
}

TEST(Overlap, DenominatorIsSmallerSet) {
  const auto ids = make_ids(10);
  const TopKSet a = set_of(ids);
  const TopKSet b = set_of({ids[0], ids[1], "zz"});
  EXPECT_NEAR(overlap_ratio(a, b), 100.0 * 2.0 / 3.0, 1e-12);
}

TEST(Entropy, SingleClassAndUniform) {
  const auto ids = make_ids(100);
  std::map<std::string, int> one, uniform;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    one[ids[i]] = 7;
    uniform[ids[i]] = static_cast<int>(i % 25);
  }
  const TopKSet s = set_of(ids);
  EXPECT_DOUBLE_EQ(class_entropy(s, one, 25).value, 0.0);
  const EntropyReport u = class_entropy(s, uniform, 25);
  EXPECT_NEAR(u.value, 1.0, 1e-12);
  EXPECT_NEAR(u.max_entropy, std::log2(25.0), 1e-12);
  EXPECT_NEAR(std::accumulate(u.p.begin(), u.p.end(), 0.0), 1.0, 1e-12);
}

TEST(Entropy, EightyTwoFourteenThreeOne) {
  std::vector<std::size_t> counts(25, 0);
  counts[0] = 82;
  counts[5] = 14;
  counts[9] = 3;
  counts[20] = 1;
  const double expected =
      -(0.82 * std::log2(0.82) + 0.14 * std::log2(0.14) + 0.03 * std::log2(0.03) + 0.01 * std::log2(0.01)) /
      std::log2(25.0);
  const EntropyReport r = entropy_from_counts(counts, 100);
  EXPECT_NEAR(r.value, expected, 1e-12);
  EXPECT_NEAR(r.value, 0.1831, 1e-4);

  // Same composition through a labeled set, with labels permuted.
  const auto ids = make_ids(100);
  std::map<std::string, int> labels;
  for (std::size_t i = 0; i < 100; ++i) labels[ids[i]] = i < 82 ? 24 : i < 96 ? 2 : i < 99 ? 17 : 11;
  EXPECT_NEAR(class_entropy(set_of(ids), labels, 25).value, expected, 1e-12);
}

TEST(Entropy, MaxUsesSmallerOfKAndClasses) {
  std::vector<std::size_t> counts(25, 0);
  for (std::size_t i = 0; i < 4; ++i) counts[i] = 1;
  const EntropyReport r = entropy_from_counts(counts, 4);
  EXPECT_NEAR(r.max_entropy, 2.0, 1e-12);
  EXPECT_NEAR(r.value, 1.0, 1e-12);
}

TEST(Entropy, UniformIsMaximalOverRandomCompositions) {
  Rng rng(12);
  for (int t = 0; t < 50; ++t) {
    std::vector<std::size_t> counts(6);
    for (auto& c : counts) c = rng.below(20);
    if (std::accumulate(counts.begin(), counts.end(), std::size_t{0}) == 0) counts[0] = 1;
    const double v = entropy_from_counts(counts, 60).value;
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0 + 1e-12);
    std::vector<std::size_t> shuffled = counts;
    std::reverse(shuffled.begin(), shuffled.end());
    EXPECT_NEAR(entropy_from_counts(shuffled, 60).value, v, 1e-12);
  }
}

TEST(Entropy, MissingLabelThrows) {
  const TopKSet s = set_of({"a", "b"});
  EXPECT_THROW(class_entropy(s, {{"a", 0}}, 3), ConfigError);
}

// ---- classification metrics -----------------------------------------------------------

TEST(TopkAccuracy, HandCountedFixture) {
  // 6 rows, 4 classes
  const Tensor probs({6, 4}, {
                                 0.70, 0.10, 0.10, 0.10,  // label 0: rank 1
                                 0.10, 0.20, 0.60, 0.10,  // label 1: rank 2
                                 0.40, 0.30, 0.20, 0.10,  // label 2: rank 3
                                 0.25, 0.25, 0.25, 0.25,  // label 3: rank 4 (ties by index)
                                 0.10, 0.50, 0.30, 0.10,  // label 2: rank 2
                                 0.30, 0.30, 0.30, 0.10,  // label 1: rank 2 (ties by index)
                             });
  const std::vector<int> labels{0, 1, 2, 3, 2, 1};
  EXPECT_NEAR(topk_accuracy(probs, labels, 1), 100.0 * 1 / 6, 1e-12);
  EXPECT_NEAR(topk_accuracy(probs, labels, 2), 100.0 * 4 / 6, 1e-12);
  EXPECT_NEAR(topk_accuracy(probs, labels, 3), 100.0 * 5 / 6, 1e-12);
  EXPECT_NEAR(topk_accuracy(probs, labels, 4), 100.0, 1e-12);
}

TEST(TopkAccuracy, PerfectArgmaxAndErrors) {
  const Tensor probs({2, 3}, {0.1, 0.8, 0.1, 0.6, 0.3, 0.1});
  const std::vector<int> labels{1, 0};
  EXPECT_DOUBLE_EQ(topk_accuracy(probs, labels, 1), 100.0);
  EXPECT_THROW(topk_accuracy(probs, labels, 0), ConfigError);
  EXPECT_THROW(topk_accuracy(probs, labels, 4), ConfigError);
  const std::vector<int> short_labels{1};
  EXPECT_THROW(topk_accuracy(probs, short_labels, 1), ShapeError);
}

TEST(MeanAveragePrecision, ScoresEqualLabelsGiveHundred) {
  const Tensor t({4, 2}, {1, 0, 0, 1, 1, 1, 0, 0});
  EXPECT_DOUBLE_EQ(mean_average_precision(t, t).value, 100.0);
}

TEST(MeanAveragePrecision, RanksOneAndThreeOfFour) {
  const Tensor scores({4, 1}, {0.9, 0.8, 0.7, 0.6});
  const Tensor labels({4, 1}, {1, 0, 1, 0});
  const MapResult r = mean_average_precision(scores, labels);
  EXPECT_NEAR(r.value, 100.0 * 5.0 / 6.0, 1e-12);
  ASSERT_TRUE(r.ap[0].has_value());
  EXPECT_NEAR(*r.ap[0], 100.0 * 5.0 / 6.0, 1e-12);
}

TEST(MeanAveragePrecision, RandomFixtureMatchesExhaustiveOracle) {
  Rng rng(30);
  const std::size_t n = 30, k = 3;
  const auto ids = make_ids(n);
  for (int t = 0; t < 10; ++t) {
    Tensor scores({n, k}), labels({n, k});
    for (std::size_t i = 0; i < n * k; ++i) {
      scores.mutable_data()[i] = static_cast<double>(rng.below(8)) / 8.0;  // ties on purpose
      labels.mutable_data()[i] = rng.bernoulli(0.4) ? 1.0 : 0.0;
    }
    for (std::size_t c = 0; c < k; ++c) labels.mutable_data()[c] = 1.0;
    double mean = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      std::vector<double> s(n);
      std::vector<int> p(n);
      for (std::size_t i = 0; i < n; ++i) s[i] = scores[i * k + c], p[i] = labels[i * k + c] > 0.5;
      mean += ap_oracle(s, p, ids) / k;
    }
    EXPECT_NEAR(mean_average_precision(scores, labels, ids).value, mean, 1e-10);
  }
}

TEST(MeanAveragePrecision, InvariantUnderIncreasingTransform) {
  Rng rng(31);
  Tensor scores({25, 4}), labels({25, 4});
  for (std::size_t i = 0; i < 100; ++i) {
    scores.mutable_data()[i] = rng.uniform(-2.0, 2.0);
    labels.mutable_data()[i] = (i % 3 == 0) ? 1.0 : 0.0;
  }
  Tensor warped = scores;
  for (double& v : warped.mutable_data()) v = std::exp(3.0 * v) + 5.0;
  EXPECT_NEAR(mean_average_precision(scores, labels).value, mean_average_precision(warped, labels).value, 1e-12);
}

TEST(MeanAveragePrecision, ClassWithoutPositives) {
  const Tensor scores({3, 2}, {0.9, 0.1, 0.2, 0.5, 0.4, 0.3});
  const Tensor labels({3, 2}, {1, 0, 0, 0, 1, 0});
  const MapResult r = mean_average_precision(scores, labels);
  ASSERT_EQ(r.excluded.size(), 1u);
  EXPECT_EQ(r.excluded[0], 1u);
  EXPECT_FALSE(r.ap[1].has_value());
  EXPECT_FALSE(r.warnings.empty());
  EXPECT_DOUBLE_EQ(r.value, 100.0);
  EXPECT_THROW(mean_average_precision(scores, labels, {}, true), DegenerateInputError);
}

TEST(MeanAveragePrecision, TiesUseIds) {
  const Tensor scores({2, 1}, {0.5, 0.5});
  const Tensor labels({2, 1}, {0, 1});
  const std::vector<std::string> pos_first{"b", "a"};
  const std::vector<std::string> pos_last{"a", "b"};
  EXPECT_DOUBLE_EQ(mean_average_precision(scores, labels, pos_first).value, 100.0);
  EXPECT_DOUBLE_EQ(mean_average_precision(scores, labels, pos_last).value, 50.0);
}

// ---- summaries -------------------------------------------------------------------

TEST(Summary, QuantilesInterpolate) {
  const std::vector<double> v{4, 1, 3, 2, 5};
  const Summary s = summarize(v);
  EXPECT_DOUBLE_EQ(s.min, 1);
  EXPECT_DOUBLE_EQ(s.q1, 2);
  EXPECT_DOUBLE_EQ(s.median, 3);
  EXPECT_DOUBLE_EQ(s.mean, 3);
  EXPECT_DOUBLE_EQ(s.q3, 4);
  EXPECT_DOUBLE_EQ(s.max, 5);
  const std::vector<double> w{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(summarize(w).median, 2.5);
  EXPECT_DOUBLE_EQ(summarize(w).q1, 1.75);
}

TEST(Spearman, MonotoneAndTies) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  const std::vector<double> down{9, 7, 5, 3, 1};
  EXPECT_NEAR(spearman(x, down), -1.0, 1e-12);
  const std::vector<double> cube{1, 8, 27, 64, 125};
  EXPECT_NEAR(spearman(x, cube), 1.0, 1e-12);
  // ranks of y with ties: {1.5, 1.5, 3, 4, 5}
  const std::vector<double> tied{0, 0, 1, 2, 3};
  EXPECT_NEAR(spearman(x, tied), 0.9746794344808963, 1e-12);
  const std::vector<double> flat{1, 1, 1, 1, 1};
  EXPECT_THROW(spearman(x, flat), DegenerateInputError);
}
