#include "ftscope/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "ftscope/error.hpp"
#include "ftscope/image_io.hpp"
#include "ftscope/ops.hpp"

namespace ftscope {

// ---- modes -----------------------------------------------------------------

void TrainingMode::validate() const {
  if (!(lr_head > 0.0) || !(lr_body > 0.0)) throw ConfigError("learning rates must be positive");
  if (max_epochs < 0) throw ConfigError("max_epochs must be non-negative");
  if (unfrozen.kind == Unfrozen::Kind::top_n && unfrozen.n == 0) throw ConfigError("top_n needs n >= 1");
  if (init == InitScheme::reinit_unfrozen && unfrozen.kind == Unfrozen::Kind::none) {
    throw ConfigError("reinit_unfrozen needs some unfrozen layers");
  }
}

std::vector<std::string> TrainingMode::preset_names() {
  return {"A", "B", "C", "D", "E", "F", "scratch-top", "scratch-full"};
}

TrainingMode TrainingMode::preset(std::string_view name) {
  auto row = [&](double head, double body, bool ds) {
    TrainingMode m;
    m.name = std::string(name);
    m.lr_head = head;
    m.lr_body = body;
    m.deep_supervision = ds;
    m.max_epochs = 20;
    return m;
  };
  if (name == "A") return row(0.01, 0.001, false);
  if (name == "B") return row(0.001, 0.0001, false);
  if (name == "C") return row(0.001, 0.001, false);
  if (name == "D") return row(0.001, 0.0001, true);
  if (name == "E") return row(0.001, 0.001, true);
  if (name == "F") return row(0.01, 0.01, false);
  if (name == "scratch-top") {
    TrainingMode m = row(0.0001, 0.0001, false);
    m.max_epochs = 200;
    m.unfrozen = Unfrozen::top(4);
    m.augmentation = Augmentation::small_transform;
    m.optimizer = OptimizerKind::adam;
    m.init = InitScheme::reinit_unfrozen;
    return m;
  }
  if (name == "scratch-full") {
    TrainingMode m = row(0.001, 0.001, true);
    m.max_epochs = 200;
    m.augmentation = Augmentation::random_crop;
    m.lr_schedule = LrSchedule::inception_decay;
    m.init = InitScheme::reinit_all;
    return m;
  }
  std::string valid;
  for (const auto& n : preset_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ConfigError("unknown mode '" + std::string(name) + "'; valid presets: " + valid);
}

namespace {

std::string trim(std::string s) {
  const auto ws = " \t\r\n";
  s.erase(0, s.find_first_not_of(ws));
  const auto end = s.find_last_not_of(ws);
  s.erase(end == std::string::npos ? 0 : end + 1);
  return s;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

bool parse_bool(const std::string& key, const std::string& v) {
  const std::string l = lower(v);
  if (l == "yes" || l == "true" || l == "1") return true;
  if (l == "no" || l == "false" || l == "0") return false;
  throw ConfigError("'" + key + "' expects yes/no, got '" + v + "'");
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  }
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const int i = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects an integer, got '" + v + "'");
  }
}

}  // namespace

TrainingMode parse_mode_config(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> kv;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  std::string base = "A";
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("mode config line " + std::to_string(line_no) + ": expected key=value");
    std::string key = lower(trim(line.substr(0, eq))), value = trim(line.substr(eq + 1));
    if (key == "mode") {
      base = value;
    } else {
      kv.emplace_back(std::move(key), std::move(value));
    }
  }
  TrainingMode m = TrainingMode::preset(base);
  m.name = base;
  for (const auto& [key, value] : kv) {
    if (key == "name") {
      m.name = value;
    } else if (key == "learning_rate_last_dense_layer") {
      m.lr_head = parse_double(key, value);
    } else if (key == "learning_rate_other_layers") {
      m.lr_body = parse_double(key, value);
    } else if (key == "deep_supervision") {
      m.deep_supervision = parse_bool(key, value);
    } else if (key == "maximum_number_of_epochs") {
      m.max_epochs = parse_int(key, value);
    } else if (key == "number_of_unfrozen_layers") {
      const std::string l = lower(value);
      if (l == "all") {
        m.unfrozen = Unfrozen::all();
      } else if (l == "none" || l == "0") {
        m.unfrozen = Unfrozen::none();
      } else {
        const int n = parse_int(key, value);
        if (n < 0) throw ConfigError("number_of_unfrozen_layers must be non-negative");
        m.unfrozen = Unfrozen::top(static_cast<std::size_t>(n));
      }
    } else if (key == "data_augmentation") {
      const std::string l = lower(value);
      if (l == "no" || l == "none") {
        m.augmentation = Augmentation::none;
      } else if (l == "small_transformation" || l == "small_transform") {
        m.augmentation = Augmentation::small_transform;
      } else if (l == "random_crops" || l == "random_crop") {
        m.augmentation = Augmentation::random_crop;
      } else {
        throw ConfigError("unknown data_augmentation '" + value + "'");
      }
    } else if (key == "optimizer") {
      const std::string l = lower(value);
      if (l == "sgd") {
        m.optimizer = OptimizerKind::sgd;
      } else if (l == "adam") {
        m.optimizer = OptimizerKind::adam;
      } else {
        throw ConfigError("unknown optimizer '" + value + "'");
      }
    } else if (key == "learning_rate_schedule") {
      const std::string l = lower(value);
      if (l == "no" || l == "constant" || l == "none") {
        m.lr_schedule = LrSchedule::constant;
      } else if (l == "inception" || l == "inception_decay") {
        m.lr_schedule = LrSchedule::inception_decay;
      } else {
        throw ConfigError("unknown learning_rate_schedule '" + value + "'");
      }
    } else if (key == "initialization") {
      const std::string l = lower(value);
      if (l == "keep") {
        m.init = InitScheme::keep;
      } else if (l == "reinit_unfrozen") {
        m.init = InitScheme::reinit_unfrozen;
      } else if (l == "reinit_all") {
        m.init = InitScheme::reinit_all;
      } else {
        throw ConfigError("unknown initialization '" + value + "'");
      }
    } else {
      throw ConfigError("unknown mode key '" + key + "'");
    }
  }
  m.validate();
  return m;
}

TrainingMode load_mode_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mode file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_mode_config(ss.str());
}

std::string format_mode_config(const TrainingMode& m) {
  std::ostringstream os;
  os.precision(17);
  os << "name=" << m.name << '\n'
     << "learning_rate_last_dense_layer=" << m.lr_head << '\n'
     << "learning_rate_other_layers=" << m.lr_body << '\n'
     << "deep_supervision=" << (m.deep_supervision ? "yes" : "no") << '\n'
     << "maximum_number_of_epochs=" << m.max_epochs << '\n'
     << "number_of_unfrozen_layers="
     << (m.unfrozen.kind == Unfrozen::Kind::all    ? std::string("all")
         : m.unfrozen.kind == Unfrozen::Kind::none ? std::string("none")
                                                   : std::to_string(m.unfrozen.n))
     << '\n'
     << "data_augmentation="
     << (m.augmentation == Augmentation::none              ? "no"
         : m.augmentation == Augmentation::small_transform ? "small_transformation"
                                                           : "random_crops")
     << '\n'
     << "optimizer=" << (m.optimizer == OptimizerKind::sgd ? "sgd" : "adam") << '\n'
     << "learning_rate_schedule=" << (m.lr_schedule == LrSchedule::constant ? "no" : "inception") << '\n'
     << "initialization="
     << (m.init == InitScheme::keep ? "keep" : m.init == InitScheme::reinit_unfrozen ? "reinit_unfrozen" : "reinit_all")
     << '\n';
  return os.str();
}

// ---- freezing ----------------------------------------------------------------

std::vector<std::string> unfrozen_layers(const ModelSpec& spec, Unfrozen unfrozen) {
  switch (unfrozen.kind) {
    case Unfrozen::Kind::all:
      return spec.layer_names();
    case Unfrozen::Kind::none:
      return {};
    case Unfrozen::Kind::top_n: {
      const auto blocks = spec.block_names();
      if (unfrozen.n > blocks.size()) {
        throw ConfigError("cannot unfreeze top " + std::to_string(unfrozen.n) + " of " + std::to_string(blocks.size()) +
                          " blocks");
      }
      return {blocks.end() - static_cast<std::ptrdiff_t>(unfrozen.n), blocks.end()};
    }
  }
  return {};
}

std::set<std::string> trainable_params(const ModelCheckpoint& model, Unfrozen unfrozen) {
  const auto open = unfrozen_layers(model.spec, unfrozen);
  const std::set<std::string> open_set(open.begin(), open.end());
  std::set<std::string> out;
  for (const auto& info : param_layout(model.spec)) {
    const bool head = info.layer == "head" || info.layer.rfind("aux_", 0) == 0;
    if (head || open_set.count(info.layer)) out.insert(info.name);
  }
  return out;
}

// ---- augmentation ----------------------------------------------------------

int max_translation(std::size_t image_size) {
  return static_cast<int>(std::lround(static_cast<double>(image_size) * 28.0 / 224.0));
}

std::size_t crop_resize(std::size_t image_size) {
  return static_cast<std::size_t>(std::lround(static_cast<double>(image_size) * 256.0 / 224.0));
}

AugmentParams draw_augmentation(Augmentation scheme, std::size_t image_size, Rng& rng) {
  AugmentParams p;
  if (scheme == Augmentation::small_transform) {
    const int t = max_translation(image_size);
    p.flip = rng.bernoulli(0.5);
    p.dx = static_cast<int>(rng.integer(-t, t));
    p.dy = static_cast<int>(rng.integer(-t, t));
  } else if (scheme == Augmentation::random_crop) {
    const std::size_t slack = crop_resize(image_size) - image_size;
    p.crop_top = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(slack)));
    p.crop_left = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(slack)));
  }
  return p;
}

Tensor apply_augmentation(const Tensor& image, Augmentation scheme, const AugmentParams& p) {
  if (image.rank() != 3) throw ShapeError("augment expects [C, H, W], got " + shape_str(image.shape()));
  switch (scheme) {
    case Augmentation::none:
      return image;
    case Augmentation::small_transform: {
      const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
      Tensor out({c, h, w});
      auto o = out.mutable_data();
      auto in = image.data();
      for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t x = 0; x < w; ++x) {
            const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) - p.dy;
            std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x) - p.dx;
            if (sy < 0 || sx < 0 || sy >= static_cast<std::ptrdiff_t>(h) || sx >= static_cast<std::ptrdiff_t>(w)) continue;
            if (p.flip) sx = static_cast<std::ptrdiff_t>(w) - 1 - sx;
            o[(ci * h + y) * w + x] = in[(ci * h + static_cast<std::size_t>(sy)) * w + static_cast<std::size_t>(sx)];
          }
      return out;
    }
    case Augmentation::random_crop: {
      const std::size_t s = image.dim(1), r = crop_resize(s);
      return crop(resize_bilinear(image, r, r), p.crop_top, p.crop_left, s, image.dim(2));
    }
  }
  return image;
}

Tensor augment(const Tensor& image, Augmentation scheme, Rng& rng) {
  return apply_augmentation(image, scheme, draw_augmentation(scheme, image.dim(1), rng));
}

double lr_at(LrSchedule schedule, double base_lr, int epoch) {
  if (schedule == LrSchedule::constant) return base_lr;
  return base_lr * std::pow(0.96, std::floor(static_cast<double>(epoch) / 8.0));
}

// ---- evaluation --------------------------------------------------------------

HeadSpec head_for(const Dataset& dataset) {
  return {dataset.task == TaskKind::style ? HeadKind::softmax : HeadKind::sigmoid, dataset.num_classes()};
}

namespace {

constexpr std::size_t kEvalBatch = 64;

void check_head(const ModelCheckpoint& model, const Dataset& dataset) {
  const HeadSpec want = head_for(dataset);
  if (!(model.spec.head == want)) {
    throw ConfigError("model head (" + std::string(model.spec.head.kind == HeadKind::softmax ? "softmax" : "sigmoid") +
                      ", " + std::to_string(model.spec.head.classes) + ") does not match the dataset (" +
                      (want.kind == HeadKind::softmax ? "softmax" : "sigmoid") + ", " + std::to_string(want.classes) +
                      ")");
  }
  if (dataset.image_size != model.spec.input_size) {
    throw ConfigError("dataset images are " + std::to_string(dataset.image_size) + "px, model expects " +
                      std::to_string(model.spec.input_size));
  }
}

Var task_loss(Var probs, const Dataset& dataset, std::span<const std::size_t> index) {
  if (dataset.task == TaskKind::style) {
    const auto labels = dataset.label_batch(index);
    return ops::cross_entropy(probs, labels);
  }
  return ops::multilabel_bce(probs, dataset.target_batch(index));
}

}  // namespace

Tensor predict(const ModelCheckpoint& model, const Dataset& dataset, std::span<const std::size_t> index) {
  const std::size_t k = model.spec.head.classes;
  Tensor out({std::max<std::size_t>(index.size(), 1), k});
  if (index.empty()) throw ConfigError("predict: no images selected");
  auto o = out.mutable_data();
  for (std::size_t start = 0; start < index.size(); start += kEvalBatch) {
    const auto chunk = index.subspan(start, std::min(kEvalBatch, index.size() - start));
    const ForwardResult r = forward(model, dataset.batch(chunk));
    std::copy_n(r.probs.ptr(), chunk.size() * k, o.data() + start * k);
  }
  return out;
}

Evaluation evaluate(const ModelCheckpoint& model, const Dataset& dataset, std::span<const std::size_t> index) {
  check_head(model, dataset);
  const Tensor probs = predict(model, dataset, index);
  const std::size_t k = model.spec.head.classes, n = index.size();
  Evaluation e;
  Tape tape(false);
  e.loss = task_loss(tape.constant(probs), dataset, index).value().item();
  std::size_t hits = 0;
  if (dataset.task == TaskKind::style) {
    for (std::size_t r = 0; r < n; ++r) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < k; ++c)
        if (probs[r * k + c] > probs[r * k + best]) best = c;
      hits += static_cast<int>(best) == dataset.labels[index[r]];
    }
    e.top1 = 100.0 * static_cast<double>(hits) / static_cast<double>(n);
  } else {
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < k; ++c) hits += (probs[r * k + c] >= 0.5) == (dataset.targets[index[r]][c] > 0.5);
    e.top1 = 100.0 * static_cast<double>(hits) / static_cast<double>(n * k);
  }
  return e;
}

std::string TrainHistory::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,train_loss,val_loss,val_top1\n";
  for (const auto& e : epochs) os << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << e.val_top1 << '\n';
  return os.str();
}

// ---- optimizer -------------------------------------------------------------

namespace {

class Optimizer {
 public:
  Optimizer(OptimizerKind kind, const std::vector<std::string>& names, const ParamMap& params) : kind_(kind) {
    for (const auto& n : names) {
      State s;
      s.m = Tensor::zeros(params.at(n).shape());
      if (kind == OptimizerKind::adam) s.v = Tensor::zeros(params.at(n).shape());
      state_.emplace(n, std::move(s));
    }
  }

  void step(ParamMap& params, const std::string& name, const Tensor& grad, double lr) {
    State& s = state_.at(name);
    auto p = params.at(name).mutable_data();
    auto m = s.m.mutable_data();
    auto g = grad.data();
    if (kind_ == OptimizerKind::sgd) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = kMomentum * m[i] + g[i];
        p[i] -= lr * m[i];
      }
      return;
    }
    ++s.t;
    auto v = s.v.mutable_data();
    const double c1 = 1.0 - std::pow(kBeta1, s.t), c2 = 1.0 - std::pow(kBeta2, s.t);
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + kEps);
    }
  }

 private:
  static constexpr double kMomentum = 0.9, kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  struct State {
    Tensor m, v;
    int t = 0;
  };
  OptimizerKind kind_;
  std::map<std::string, State> state_;
};

}  // namespace

TrainResult train(const ModelCheckpoint& input, const Dataset& dataset, const TrainingMode& mode, std::uint64_t seed,
                  const TrainObserver& observer) {
  mode.validate();
  check_head(input, dataset);
  const auto train_idx = dataset.indices(Split::train);
  const auto val_idx = dataset.indices(Split::val);
  if (train_idx.empty()) throw ConfigError("dataset has an empty train split");
  if (val_idx.empty()) throw ConfigError("dataset has an empty validation split");

  ModelCheckpoint model = input;
  const auto open = unfrozen_layers(model.spec, mode.unfrozen);
  if (mode.init == InitScheme::reinit_all) {
    model = build_model(model.spec, mix64(seed ^ 0x5c4a7c4ULL));
  } else if (mode.init == InitScheme::reinit_unfrozen) {
    model = reinitialize_layers(model, open, mix64(seed ^ 0x5c4a7c4ULL));
  }
  const std::vector<AuxHeadSpec> original_aux = model.spec.aux_heads;
  if (mode.deep_supervision && model.spec.aux_heads.empty()) {
    model = with_aux_heads(model, ModelSpec::default_aux_heads(), mix64(seed ^ 0xa0c5ULL));
  }

  const std::set<std::string> trainable = trainable_params(model, mode.unfrozen);
  std::vector<std::string> trainable_names;
  std::vector<bool> is_head;
  for (const auto& info : param_layout(model.spec)) {
    if (!trainable.count(info.name)) continue;
    trainable_names.push_back(info.name);
    is_head.push_back(info.layer == "head" || info.layer.rfind("aux_", 0) == 0);
  }
  Optimizer optimizer(mode.optimizer, trainable_names, model.params);

  TrainResult result;
  ModelCheckpoint best = model;
  double best_val = std::numeric_limits<double>::infinity();
  for (int epoch = 0; epoch < mode.max_epochs; ++epoch) {
    std::vector<std::size_t> order = train_idx;
    Rng shuffle = Rng::derive(seed, "shuffle/" + std::to_string(epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
    const double lr_head = lr_at(mode.lr_schedule, mode.lr_head, epoch);
    const double lr_body = lr_at(mode.lr_schedule, mode.lr_body, epoch);

    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0, step = 0; start < order.size(); start += kBatchSize, ++step) {
      const std::span<const std::size_t> chunk(order.data() + start, std::min(kBatchSize, order.size() - start));
      Tensor batch = dataset.batch(chunk);
      if (mode.augmentation != Augmentation::none) {
        Rng aug = Rng::derive(seed, "augment/" + std::to_string(epoch) + "/" + std::to_string(step));
        const std::size_t plane = batch.size() / chunk.size();
        auto b = batch.mutable_data();
        for (std::size_t i = 0; i < chunk.size(); ++i) {
          const Tensor img = augment(dataset.images[chunk[i]], mode.augmentation, aug);
          std::copy_n(img.ptr(), plane, b.data() + i * plane);
        }
      }

      Gradients grads;
      std::vector<Var> leaves;
      double main_loss = 0.0;
      {
        Tape tape;
        ModelGraph graph(tape, model, trainable);
        const bool aux = mode.deep_supervision;
        const auto out = graph.run(tape.constant(batch), aux);
        Var loss = task_loss(out.probs, dataset, chunk);
        main_loss = loss.value().item();
        if (aux && !out.aux_probs.empty()) {
          std::vector<Var> terms{loss};
          std::vector<double> weights{1.0};
          for (std::size_t a = 0; a < out.aux_probs.size(); ++a) {
            terms.push_back(task_loss(out.aux_probs[a], dataset, chunk));
            weights.push_back(model.spec.aux_heads[a].loss_weight);
          }
          loss = ops::weighted_sum(terms, weights);
        }
        if (!std::isfinite(loss.value().item())) {
          throw NonFiniteError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", step " +
                               std::to_string(step));
        }
        grads = tape.backward(loss);
        for (const auto& n : trainable_names) leaves.push_back(graph.param(n));
        std::vector<Tensor> g;
        for (const auto& v : leaves) g.push_back(grads[v]);
        grads = Gradients();
        leaves.clear();
        for (std::size_t i = 0; i < trainable_names.size(); ++i) {
          optimizer.step(model.params, trainable_names[i], g[i], is_head[i] ? lr_head : lr_body);
        }
      }
      loss_sum += main_loss * static_cast<double>(chunk.size());
      seen += chunk.size();
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.train_loss = loss_sum / static_cast<double>(seen);
    ModelCheckpoint eval_model = model;
    const Evaluation ev = evaluate(eval_model, dataset, val_idx);
    rec.val_loss = ev.loss;
    rec.val_top1 = ev.top1;
    if (!std::isfinite(rec.val_loss)) {
      throw NonFiniteError("non-finite validation loss at epoch " + std::to_string(epoch + 1));
    }
    result.history.epochs.push_back(rec);
    if (rec.val_loss < best_val) {
      best_val = rec.val_loss;
      best = model;
      result.history.selected_epoch = rec.epoch;
    }
    if (observer) observer(rec);
  }

  if (model.spec.aux_heads != original_aux) best = with_aux_heads(best, original_aux, 0);
  best.meta.seed = seed;
  best.meta.parent_id = input.id();
  best.meta.provenance = input.meta.provenance == "random" || mode.init == InitScheme::reinit_all ? "pretrained"
                                                                                                  : "fine-tuned";
  best.meta.epoch = result.history.selected_epoch;
  if (mode.max_epochs == 0) {
    // No epoch ran: the input (after any re-initialization) is returned as is.
    best.meta = input.meta;
  }
  result.model = std::move(best);
  return result;
}

DoubleFinetuneResult double_finetune(const ModelCheckpoint& model, const Dataset& intermediate,
                                     const TrainingMode& intermediate_mode, const Dataset& target,
                                     const TrainingMode& target_mode, DoubleFinetuneSeeds seeds) {
  DoubleFinetuneResult r;
  const ModelCheckpoint start =
      model.spec.head == head_for(intermediate) ? model : replace_head(model, head_for(intermediate), seeds.intermediate);
  r.intermediate = train(start, intermediate, intermediate_mode, seeds.intermediate);
  const ModelCheckpoint swapped = replace_head(r.intermediate.model, head_for(target), seeds.head);
  r.target = train(swapped, target, target_mode, seeds.target);
  return r;
}

Tensor ensemble_predict(std::span<const ModelCheckpoint> models, const Tensor& batch) {
  if (models.empty()) throw ConfigError("ensemble needs at least one model");
  const HeadSpec head = models[0].spec.head;
  for (const auto& m : models) {
    if (!(m.spec.head == head)) throw ConfigError("ensemble members disagree on class count or head type");
  }
  Tensor sum;
  for (const auto& m : models) {
    const Tensor p = forward(m, batch).probs;
    if (sum.empty()) {
      sum = Tensor::zeros(p.shape());
    }
    auto s = sum.mutable_data();
    for (std::size_t i = 0; i < s.size(); ++i) s[i] += p[i];
  }
  auto s = sum.mutable_data();
  const double inv = 1.0 / static_cast<double>(models.size());
  for (double& v : s) v *= inv;
  return sum;
}

}  // namespace ftscope
