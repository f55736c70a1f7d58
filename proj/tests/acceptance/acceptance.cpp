// Acceptance run: criteria 1-11 at their stated tolerances. Prints progress
// detail while running and one PASS/FAIL line per criterion at the end.
// Exit status is 0 only when every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "CLI11.hpp"
#include "cli.hpp"
#include "ftscope/data.hpp"
#include "ftscope/featviz.hpp"
#include "ftscope/fft.hpp"
#include "ftscope/metrics.hpp"
#include "ftscope/model.hpp"
#include "ftscope/ops.hpp"
#include "ftscope/training.hpp"
#include "grad_cases.hpp"
#include "model_grad.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace ftscope;
using clk = std::chrono::steady_clock;

namespace {

double since(clk::time_point t) { return std::chrono::duration<double>(clk::now() - t).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
  double budget = 0.0;  // 0 = no runtime bound
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// Acceptance runs use the desk-scale epoch counts divided by 4.
constexpr int kFinetuneEpochs = 20 / 4;
constexpr int kScratchEpochs = 200 / 4;
constexpr int kPretrainEpochs = 20;
constexpr std::size_t kTopK = 100;

// ---- 1: oracles ----------------------------------------------------------------

Outcome oracle_suite() {
  using test::random_tensor;
  Rng rng(2024);
  constexpr int kInstances = 60;
  std::map<std::string, double> worst;
  std::map<std::string, int> failures;
  auto note = [&](const std::string& what, double err, double tol) {
    worst[what] = std::max(worst[what], err);
    if (!(err <= tol)) ++failures[what];
  };

  for (int i = 0; i < kInstances; ++i) {
    const std::size_t n = 1 + rng.below(2), c = 1 + rng.below(3), f = 1 + rng.below(3);
    const std::size_t k = 1 + 2 * rng.below(3), stride = 1 + rng.below(2), pad = rng.below(3);
    const std::size_t h = std::max<std::size_t>(k, 3 + rng.below(5)), w = std::max<std::size_t>(k, 3 + rng.below(5));
    const Tensor x = random_tensor({n, c, h, w}, rng), wt = random_tensor({f, c, k, k}, rng),
                 b = random_tensor({f}, rng);
    Tape tape(false);
    const Tensor y = ops::conv2d(tape.constant(x), tape.constant(wt), tape.constant(b), {stride, pad}).value();
    note("conv", max_abs_diff(y, oracle::conv_oracle(x, wt, b, stride, pad)), 1e-12);
  }
  for (int i = 0; i < kInstances; ++i) {
    const auto kind = rng.below(2) ? ops::PoolKind::max : ops::PoolKind::avg;
    const std::size_t size = 2 + rng.below(2), stride = 1 + rng.below(2), pad = rng.below(size);
    const Tensor x = random_tensor({1 + rng.below(2), 1 + rng.below(3), size + rng.below(6), size + rng.below(6)}, rng);
    Tape tape(false);
    const Tensor y = ops::pool2d(tape.constant(x), kind, size, stride, pad).value();
    note("pool", max_abs_diff(y, oracle::pool_oracle(x, kind, size, stride, pad)), 1e-12);
  }
  for (int i = 0; i < kInstances; ++i) {
    const Tensor img = random_tensor({1 + rng.below(12), 1 + rng.below(12)}, rng);
    note("fft", max_abs_diff(fft2(img), oracle::naive_dft(img)), 1e-9);
  }
  for (int i = 0; i < kInstances; ++i) {
    const std::size_t rows = 3 + rng.below(10);
    const Tensor x = random_tensor({rows, 1 + rng.below(6)}, rng), y = random_tensor({rows, 1 + rng.below(6)}, rng);
    note("cka", std::abs(linear_cka(x, y) - oracle::cka_oracle(x, y)), 1e-10);
  }
  for (int i = 0; i < kInstances; ++i) {
    const std::size_t rows = 4 + rng.below(20), cls = 1 + rng.below(4);
    Tensor scores({rows, cls}), targets({rows, cls});
    std::vector<std::string> ids;
    for (std::size_t r = 0; r < rows; ++r)
      ids.push_back("im" + std::to_string(1000 + rng.below(9000)) + "_" + std::to_string(r));
    for (std::size_t e = 0; e < rows * cls; ++e) {
      scores.mutable_data()[e] = std::round(rng.uniform(0.0, 1.0) * 8.0) / 8.0;  // coarse, so ties happen
      targets.mutable_data()[e] = rng.bernoulli(0.4) ? 1.0 : 0.0;
    }
    for (std::size_t col = 0; col < cls; ++col) targets.mutable_data()[rng.below(rows) * cls + col] = 1.0;
    double expect = 0.0;
    for (std::size_t col = 0; col < cls; ++col) {
      std::vector<double> s(rows);
      std::vector<int> p(rows);
      for (std::size_t r = 0; r < rows; ++r) s[r] = scores[r * cls + col], p[r] = targets[r * cls + col] > 0.5;
      expect += oracle::ap_oracle(s, p, ids) / static_cast<double>(cls);
    }
    note("map", std::abs(mean_average_precision(scores, targets, ids).value - expect), 1e-9);
  }
  for (int i = 0; i < kInstances; ++i) {
    const std::size_t n = 1 + rng.below(40), k = 1 + rng.below(50);
    std::vector<std::string> ids;
    std::vector<double> scores;
    for (std::size_t r = 0; r < n; ++r) {
      ids.push_back("id" + std::to_string(rng.below(100000)) + "_" + std::to_string(r));
      scores.push_back(std::round(rng.uniform(-1.0, 1.0) * 5.0));
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return scores[a] != scores[b] ? scores[a] > scores[b] : ids[a] < ids[b];
    });
    const TopKSet got = topk_from_scores(ids, scores, k);
    bool same = got.entries.size() == std::min(n, k);
    for (std::size_t r = 0; same && r < got.entries.size(); ++r)
      same = got.entries[r].id == ids[order[r]] && got.entries[r].score == scores[order[r]];
    note("topk", same ? 0.0 : 1.0, 0.0);
  }
  for (int i = 0; i < kInstances; ++i) {
    const std::size_t ncls = 2 + rng.below(8), k = 2 + rng.below(60);
    TopKSet set;
    std::map<std::string, int> labels;
    std::vector<std::size_t> counts(ncls, 0);
    for (std::size_t r = 0; r < k; ++r) {
      const std::string id = "e" + std::to_string(r);
      const int cl = static_cast<int>(rng.below(std::min<std::size_t>(ncls, 1 + rng.below(ncls))));
      labels[id] = cl;
      ++counts[static_cast<std::size_t>(cl)];
      set.entries.push_back({id, 0.0});
    }
    set.k = k;
    double hsum = 0.0;
    for (std::size_t cnt : counts)
      if (cnt > 0) {
        const double p = static_cast<double>(cnt) / static_cast<double>(k);
        hsum -= p * std::log2(p);
      }
    const double expect = hsum / std::log2(static_cast<double>(std::min(k, ncls)));
    note("entropy", std::abs(class_entropy(set, labels, ncls).value - expect), 1e-12);
  }
  for (int i = 0; i < kInstances; ++i) {
    auto draw = [&] {
      TopKSet s;
      std::set<std::string> seen;
      const std::size_t size = 1 + rng.below(30);
      while (seen.size() < size) seen.insert("o" + std::to_string(rng.below(50)));
      for (const auto& id : seen) s.entries.push_back({id, 0.0});
      return std::pair{s, seen};
    };
    const auto [a, sa] = draw();
    const auto [b, sb] = draw();
    std::vector<std::string> common;
    std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(common));
    const double smaller = static_cast<double>(std::min(sa.size(), sb.size()));
    const double expect = 100.0 * static_cast<double>(common.size()) / smaller;
    note("overlap", std::abs(overlap_ratio(a, b) - expect), 1e-12);
  }

  Outcome o;
  o.pass = true;
  std::ostringstream d;
  d << kInstances << " instances each;";
  for (const auto& [what, err] : worst) {
    d << " " << what << " " << fmt("%.1e", err);
    if (failures[what] > 0) {
      o.pass = false;
      d << " (" << failures[what] << " over)";
    }
  }
  o.detail = d.str();
  o.budget = 60.0;
  return o;
}

// ---- 2: gradients --------------------------------------------------------------

// A mini-Inception small enough to check every parameter coordinate.
ModelSpec mini_spec(HeadSpec head) {
  ModelSpec s;
  s.input_size = 8;
  s.stem = {StemStage::conv("conv2d0", 4, 3, 1, 1)};
  s.blocks = {BlockSpec::standard("mixed3a", 8, false), BlockSpec::standard("mixed3b", 8, true),
              BlockSpec::standard("mixed4a", 8, false)};
  s.head = head;
  return s;
}

Outcome gradient_suite() {
  Outcome o;
  o.pass = true;
  double op_worst = 0.0;
  std::string op_where;
  std::size_t checked = 0;
  const auto cases = test::grad_cases();
  for (std::size_t i = 0; i < cases.size(); ++i) {
    Rng rng(100 + i);
    std::vector<Tensor> inputs;
    for (const auto& s : cases[i].shapes) inputs.push_back(test::random_tensor(s, rng));
    const auto r = test::grad_check(cases[i].fn, inputs);
    checked += r.checked;
    if (r.worst > op_worst) op_worst = r.worst, op_where = std::string(cases[i].name) + " " + r.where;
  }
  Rng rng(31);
  std::string w1, w2, w3, w4;
  const auto soft = test::with_random_biases(build_model(mini_spec({HeadKind::softmax, 3}), 1), 2);
  const double e1 = test::model_gradient_error(soft, test::random_tensor({2, 3, 8, 8}, rng, 0.0, 1.0), false, 0, &w1);
  ModelSpec sig = mini_spec({HeadKind::sigmoid, 4});
  sig.aux_heads = {{"mixed3b", 0.3}, {"mixed4a", 0.3}};
  const auto sigm = test::with_random_biases(build_model(sig, 3), 4);
  const double e2 = test::model_gradient_error(sigm, test::random_tensor({2, 3, 8, 8}, rng, 0.0, 1.0), true, 0, &w2);
  // the real desk architecture, sampled coordinates
  const auto desk_soft = test::with_random_biases(build_model(ModelSpec::desk({HeadKind::softmax, 8}), 5), 6);
  const double e3 =
      test::model_gradient_error(desk_soft, test::random_tensor({2, 3, 32, 32}, rng, 0.0, 1.0), false, 2, &w3);
  const auto desk_sig = test::with_random_biases(
      with_aux_heads(build_model(ModelSpec::desk({HeadKind::sigmoid, 4}), 7), ModelSpec::default_aux_heads(), 8), 9);
  const double e4 =
      test::model_gradient_error(desk_sig, test::random_tensor({2, 3, 32, 32}, rng, 0.0, 1.0), true, 2, &w4);

  o.pass = op_worst <= 1e-4 && e1 <= 1e-4 && e2 <= 1e-4 && e3 <= 1e-4 && e4 <= 1e-4;
  std::ostringstream d;
  d << cases.size() << " ops (" << checked << " coords) worst " << fmt("%.1e", op_worst) << "; mini softmax "
    << fmt("%.1e", e1) << ", mini sigmoid+aux " << fmt("%.1e", e2) << " (" << param_count(soft.spec) << "/"
    << param_count(sigm.spec) << " params, all coords); desk sampled " << fmt("%.1e", e3) << ", "
    << fmt("%.1e", e4);
  if (!o.pass) d << "; worst op at " << op_where << "; " << w1 << "; " << w2 << "; " << w3 << "; " << w4;
  o.detail = d.str();
  o.budget = 120.0;
  return o;
}

// ---- 3: CKA invariance -----------------------------------------------------------

Outcome cka_suite() {
  using test::random_tensor;
  Rng rng(77);
  double ident = 0.0, sym = 0.0, orth = 0.0, scale = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 5 + rng.below(30), cx = 1 + rng.below(12), cy = 1 + rng.below(12);
    const Tensor x = random_tensor({n, cx}, rng), y = random_tensor({n, cy}, rng);
    const double base = linear_cka(x, y);
    ident = std::max(ident, std::abs(linear_cka(x, x) - 1.0));
    sym = std::max(sym, std::abs(linear_cka(y, x) - base));
    const Tensor q = oracle::random_orthogonal(cx, rng);
    orth = std::max(orth, std::abs(linear_cka(oracle::matmul(x, q), y) - base));
    Tensor xs = x;
    const double a = std::exp(rng.uniform(-5.0, 5.0));
    for (double& v : xs.mutable_data()) v *= a;
    scale = std::max(scale, std::abs(linear_cka(xs, y) - base));
  }
  Outcome o;
  o.pass = ident <= 1e-9 && sym <= 1e-9 && orth <= 1e-9 && scale <= 1e-9;
  o.detail = "100 trials; identity " + fmt("%.1e", ident) + ", symmetry " + fmt("%.1e", sym) + ", orthogonal " +
             fmt("%.1e", orth) + ", scale " + fmt("%.1e", scale);
  o.budget = 10.0;
  return o;
}

// ---- 4-9: trend runs ---------------------------------------------------------------

struct SeedRun {
  // 4-6
  double spearman = 0.0, first_minus_last = 0.0;
  double overlap_first = 0.0, overlap_last = 0.0;
  double entropy_before = 0.0, entropy_after = 0.0;
  // 7
  double l2_ft = 0.0, l2_scratch = 0.0;
  // 8
  double map_double = 0.0, map_direct = 0.0, map_off = 0.0;
  // 9
  double ens = 0.0, best_member = 0.0;
  std::string members;
  double t_trend = 0.0, t_scratch = 0.0, t_object = 0.0, t_ensemble = 0.0;
};

struct TrendState {
  std::vector<SeedRun> runs;
  ModelCheckpoint first_ft;  // for criterion 10
  Dataset first_target;
};

SeedRun run_seed(std::uint64_t s, bool object_stage, bool scratch_stage, TrendState& state) {
  SeedRun r;
  auto t = clk::now();
  SynthConfig ca;
  ca.seed = s * 7919;
  ca.variant = 0;
  SynthConfig cb = ca;
  cb.seed = s * 7919 + 1;
  cb.variant = 1;
  const Dataset A = generate_style_corpus(ca), B = generate_style_corpus(cb);

  TrainingMode pre = TrainingMode::preset("F");
  pre.max_epochs = kPretrainEpochs;
  const ModelCheckpoint P = train(build_model(ModelSpec::desk(head_for(A)), s), A, pre, s).model;
  const ModelCheckpoint PB = replace_head(P, head_for(B), s + 11);
  TrainingMode ma = TrainingMode::preset("A");
  ma.max_epochs = kFinetuneEpochs;
  const ModelCheckpoint FT = train(PB, B, ma, s + 12).model;
  if (state.runs.empty()) state.first_ft = FT, state.first_target = B;

  const auto layers = P.spec.layer_names();
  const auto blocks = P.spec.block_names();
  const auto test_idx = B.indices(Split::test);
  const LayerReport cka = layerwise_cka(PB, FT, B, test_idx, layers);
  std::vector<double> depth, vals;
  for (std::size_t i = 0; i < cka.values.size(); ++i) {
    depth.push_back(static_cast<double>(i));
    vals.push_back(cka.values[i].second);
  }
  r.spearman = spearman(depth, vals);
  r.first_minus_last = cka.at(blocks.front()) - cka.at(blocks.back());

  const auto all = B.all_indices();
  const auto before = capture_features(PB, B, all, blocks), after = capture_features(FT, B, all, blocks);
  auto mean_overlap = [&](std::size_t from, std::size_t to) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t b = from; b < to; ++b) {
      const auto sa = topk_all_channels(before.at(blocks[b]), B.ids, blocks[b], kTopK);
      const auto sb = topk_all_channels(after.at(blocks[b]), B.ids, blocks[b], kTopK);
      for (std::size_t c = 0; c < sa.size(); ++c) sum += overlap_ratio(sa[c], sb[c]), ++n;
    }
    return sum / static_cast<double>(n);
  };
  r.overlap_first = mean_overlap(0, 3);
  r.overlap_last = mean_overlap(blocks.size() - 3, blocks.size());
  const auto labels = label_map(B);
  auto mean_entropy = [&](const std::map<std::string, Tensor>& feats) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t b = blocks.size() - 2; b < blocks.size(); ++b)
      for (const auto& set : topk_all_channels(feats.at(blocks[b]), B.ids, blocks[b], kTopK))
        sum += class_entropy(set, labels, B.num_classes()).value, ++n;
    return sum / static_cast<double>(n);
  };
  r.entropy_before = mean_entropy(before);
  r.entropy_after = mean_entropy(after);
  r.t_trend = since(t);

  if (scratch_stage) {
    t = clk::now();
    // From scratch: train a fresh random model in place so its init is known.
    const ModelCheckpoint rB = build_model(ModelSpec::desk(head_for(B)), s + 21);
    TrainingMode sf = TrainingMode::preset("scratch-full");
    sf.max_epochs = kScratchEpochs;
    sf.init = InitScheme::keep;
    const ModelCheckpoint SF = train(rB, B, sf, s + 22).model;
    r.l2_ft = kernel_l2(FT, PB).mean;
    r.l2_scratch = kernel_l2(SF, rB).mean;
    r.t_scratch = since(t);

    t = clk::now();
    TrainingMode st = TrainingMode::preset("scratch-top");
    st.max_epochs = kScratchEpochs;
    const ModelCheckpoint ST = train(PB, B, st, s + 23).model;
    const std::vector<ModelCheckpoint> members{FT, ST, SF};
    const auto lab = B.label_batch(test_idx);
    r.ens = topk_accuracy(ensemble_predict(members, B.batch(test_idx)), lab, 1);
    std::ostringstream m;
    for (const auto& mm : members) {
      const double acc = evaluate(mm, B, test_idx).top1;
      r.best_member = std::max(r.best_member, acc);
      m << (m.tellp() > 0 ? "/" : "") << fmt("%.1f", acc);
    }
    r.members = m.str();
    r.t_ensemble = since(t);
  }

  if (object_stage) {
    t = clk::now();
    SynthConfig co = cb;
    co.seed = s * 7919 + 2;
    const Dataset O = generate_object_corpus(co, cb.variant);
    const auto otest = O.indices(Split::test);
    std::vector<std::string> oids;
    for (auto i : otest) oids.push_back(O.ids[i]);
    auto map_of = [&](const ModelCheckpoint& m) {
      return mean_average_precision(predict(m, O, otest), O.target_batch(otest), oids).value;
    };
    const ModelCheckpoint PO = replace_head(P, head_for(O), s + 31);
    r.map_direct = map_of(train(PO, O, ma, s + 32).model);
    TrainingMode off = ma;
    off.unfrozen = Unfrozen::none();
    r.map_off = map_of(train(PO, O, off, s + 33).model);
    r.map_double = map_of(double_finetune(PB, B, ma, O, ma, DoubleFinetuneSeeds::from(s + 40)).target.model);
    r.t_object = since(t);
  }
  return r;
}

// ---- 10: visualization -------------------------------------------------------------

std::size_t layer_width(const ModelSpec& spec, const std::string& layer) {
  for (const auto& st : spec.stem)
    if (st.kind == StemStage::Kind::conv && st.name == layer) return st.out_channels;
  for (const auto& b : spec.blocks)
    if (b.name == layer) return b.b1x1 + b.b3x3 + b.b5x5 + b.pool_proj;
  return 0;
}

Outcome viz_suite(const ModelCheckpoint& model, const Dataset& data) {
  const auto t = clk::now();
  const DecorrelationMatrix m = fit_decorrelation(data, data.indices(Split::train));
  const auto layers = model.spec.layer_names();
  Rng rng(510);
  int ok = 0;
  double worst_ratio = 1e300;
  std::ostringstream d;
  for (int i = 0; i < 10; ++i) {
    ChannelRef ch{layers[rng.below(layers.size())], 0};
    ch.index = rng.below(layer_width(model.spec, ch.layer));
    VizOptions opt;
    opt.steps = 512;
    opt.seed = 900 + static_cast<std::uint64_t>(i);
    const auto img = optimize_channel(model, ch, m, opt);
    const double base = random_baseline(model, ch, m, 16, 1900 + static_cast<std::uint64_t>(i));
    const double fin = img.trace.back();
    const bool pass = fin >= 5.0 * base && fin >= img.trace.front();
    ok += pass;
    const double ratio = base > 0 ? fin / base : 1e300;
    worst_ratio = std::min(worst_ratio, ratio);
    std::printf("  viz %s:%zu final %.4f baseline %.4f initial %.4f %s\n", ch.layer.c_str(), ch.index, fin, base,
                img.trace.front(), pass ? "ok" : "MISS");
    std::fflush(stdout);
  }
  Outcome o;
  o.pass = ok == 10;
  d << ok << "/10 channels; smallest final/baseline "
    << (worst_ratio > 1e299 ? std::string("n/a") : fmt("%.1f", worst_ratio));
  o.detail = d.str();
  o.seconds = since(t);
  o.budget = 300.0;
  return o;
}

// ---- 11: manifest replay ---------------------------------------------------------

Outcome replay_suite() {
  const fs::path root = fs::temp_directory_path() / ("ftscope_accept_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string out = (root / "run").string(), again = (root / "again").string();
  std::ostringstream log, err;
  const std::vector<std::vector<std::string>> commands{
      {"generate", "--out", out, "--dataset", "synth:style", "--images-per-class", "12"},
      {"train", "--out", out, "--tag", "base", "--dataset", "synth:style", "--images-per-class", "12", "--epochs", "2",
       "--seed", "3"},
      {"train", "--out", out, "--tag", "ft", "--dataset", "synth:style", "--images-per-class", "12", "--variant", "1",
       "--epochs", "2", "--init", out + "/base/model"},
      {"double-ft", "--out", out, "--init", out + "/base/model", "--dataset", "synth:style", "--target-dataset",
       "synth:object", "--images-per-class", "12", "--object-images", "64",
       "--epochs", "1", "--target-epochs", "1"},
      {"compare", "--out", out, "--dataset", "synth:style", "--model-a", out + "/base/model", "--model-b",
       out + "/ft/model", "--images-per-class", "12", "--variant", "1", "--k", "10"},
      {"viz", "--out", out, "--model", out + "/ft/model", "--layer", "mixed4b", "--channel", "5", "--steps", "64"},
      {"topk", "--out", out, "--dataset", "synth:style", "--model", out + "/ft/model", "--layer", "mixed3a",
       "--channel", "2", "--k", "9", "--images-per-class", "12"},
  };
  Outcome o;
  for (const auto& c : commands) {
    const int code = cli::run(c, log, err);
    if (code != cli::kExitOk) {
      o.detail = c.front() + " exited " + std::to_string(code) + ": " + err.str();
      fs::remove_all(root);
      return o;
    }
  }
  std::ostringstream rlog;
  const int code = cli::run({"replay", "--manifest", out + "/manifest.json", "--out", again}, rlog, err);
  std::string summary = rlog.str();
  const auto nl = summary.find_last_of('\n', summary.size() >= 2 ? summary.size() - 2 : 0);
  if (nl != std::string::npos) summary = summary.substr(nl + 1);
  while (!summary.empty() && summary.back() == '\n') summary.pop_back();
  o.pass = code == cli::kExitOk && summary.find(" 0 mismatched") != std::string::npos;
  o.detail = std::to_string(commands.size()) + " commands; replay: " + summary;
  if (code) o.detail += " exit " + std::to_string(code) + " " + err.str();
  fs::remove_all(root);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance run"};
  int seeds = 5;
  std::vector<int> only;
  app.add_option("--seeds", seeds, "Seeds for criteria 4-9")->check(CLI::Range(1, 50));
  app.add_option("--only", only, "Run only these criteria")->delimiter(',')->check(CLI::Range(1, 11));
  CLI11_PARSE(app, argc, argv);
  auto want = [&](int c) { return only.empty() || std::find(only.begin(), only.end(), c) != only.end(); };

  std::map<int, Outcome> results;
  auto timed = [&](int id, const std::function<Outcome()>& fn) {
    const auto t = clk::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.detail = std::string("threw: ") + e.what();
    }
    if (o.seconds == 0.0) o.seconds = since(t);
    results[id] = o;
    std::printf("criterion %d done in %.1fs\n", id, o.seconds);
    std::fflush(stdout);
  };

  if (want(1)) timed(1, oracle_suite);
  if (want(2)) timed(2, gradient_suite);
  if (want(3)) timed(3, cka_suite);

  const bool trends = want(4) || want(5) || want(6) || want(7) || want(8) || want(9) || want(10);
  TrendState state;
  if (trends) {
    const bool scratch = want(7) || want(9), object = want(8);
    const bool all_seeds = want(4) || want(5) || want(6) || scratch || object;
    const std::size_t count = all_seeds ? static_cast<std::size_t>(seeds) : 1;
    for (std::size_t i = 0; i < count; ++i) {
      const std::uint64_t s = i + 1;
      const SeedRun r = run_seed(s, object, scratch, state);
      std::printf("  seed %llu: spearman %.3f first-last %.3f | overlap %.1f vs %.1f | entropy %.3f -> %.3f",
                  static_cast<unsigned long long>(s), r.spearman, r.first_minus_last, r.overlap_first, r.overlap_last,
                  r.entropy_before, r.entropy_after);
      if (scratch)
        std::printf(" | l2 %.4f vs %.4f | ensemble %.1f members %s", r.l2_ft, r.l2_scratch, r.ens, r.members.c_str());
      if (object) std::printf(" | mAP double %.2f direct %.2f off %.2f", r.map_double, r.map_direct, r.map_off);
      std::printf(" (%.0fs)\n", r.t_trend + r.t_scratch + r.t_ensemble + r.t_object);
      std::fflush(stdout);
      state.runs.push_back(r);
    }
    const auto& runs = state.runs;
    const int n = static_cast<int>(runs.size());
    auto count_if = [&](auto pred) { return static_cast<int>(std::count_if(runs.begin(), runs.end(), pred)); };
    auto total = [&](double SeedRun::*field) {
      double sum = 0.0;
      for (const auto& r : runs) sum += r.*field;
      return sum;
    };
    const std::string of = "/" + std::to_string(n) + " seeds";
    const int need4 = (4 * n + 4) / 5, need3 = (3 * n + 4) / 5;
    if (want(4)) {
      const int k = count_if([](const SeedRun& r) { return r.spearman <= -0.6 && r.first_minus_last >= 0.15; });
      results[4] = {k >= need4, std::to_string(k) + of + " with spearman <= -0.6 and first-last >= 0.15",
                    total(&SeedRun::t_trend), 900.0};
    }
    if (want(5)) {
      const int k = count_if([](const SeedRun& r) { return r.overlap_first - r.overlap_last >= 15.0; });
      results[5] = {k >= need4, std::to_string(k) + of + " with overlap(first 3) - overlap(last 3) >= 15", 0.0, 0.0};
    }
    if (want(6)) {
      const int k = count_if([](const SeedRun& r) { return r.entropy_before - r.entropy_after >= 0.1; });
      results[6] = {k >= need4, std::to_string(k) + of + " with entropy drop >= 0.1 in the last 2 blocks", 0.0, 0.0};
    }
    if (want(7)) {
      const int k = count_if([](const SeedRun& r) { return r.l2_ft < 0.5 * r.l2_scratch; });
      double worst = 0.0;
      for (const auto& r : runs) worst = std::max(worst, r.l2_ft / r.l2_scratch);
      results[7] = {k == n,
                    std::to_string(k) + of + " with l2(FT) < 0.5 l2(scratch); worst ratio " + fmt("%.3f", worst),
                    total(&SeedRun::t_scratch), 1200.0};
    }
    if (want(8)) {
      const int gain = count_if([](const SeedRun& r) { return r.map_double >= r.map_direct + 1.0; });
      const int beats = count_if([](const SeedRun& r) { return r.map_direct > r.map_off; });
      results[8] = {gain >= need3 && beats == n,
                    "double >= direct + 1 in " + std::to_string(gain) + of + ", direct > off-the-shelf in " +
                        std::to_string(beats) + of,
                    total(&SeedRun::t_object), 1800.0};
    }
    if (want(9)) {
      const int k = count_if([](const SeedRun& r) { return r.ens >= r.best_member; });
      results[9] = {k >= need3, std::to_string(k) + of + " with ensemble top-1 >= best member",
                    total(&SeedRun::t_ensemble), 0.0};
    }
  }
  if (want(10)) timed(10, [&] { return viz_suite(state.first_ft, state.first_target); });
  if (want(11)) timed(11, replay_suite);

  static const char* names[] = {"",
                                "oracle equivalence",
                                "gradient suite",
                                "CKA invariance",
                                "depth trend",
                                "overlap trend",
                                "entropy trend",
                                "distance ordering",
                                "transfer ordering",
                                "ensemble",
                                "visualization",
                                "determinism"};
  std::printf("\n");
  bool all = true;
  for (auto& [id, o] : results) {
    const bool slow = o.budget > 0.0 && o.seconds > o.budget;
    const bool pass = o.pass && !slow;
    all = all && pass;
    std::printf("[%s] %2d %-19s %s", pass ? "PASS" : "FAIL", id, names[id], o.detail.c_str());
    if (o.budget > 0.0) std::printf(" (%.0fs, limit %.0fs%s)", o.seconds, o.budget, slow ? " EXCEEDED" : "");
    std::printf("\n");
  }
  return all ? 0 : 1;
}
