#include "ftscope/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <json.hpp>

#include "ftscope/error.hpp"
#include "ftscope/ops.hpp"
#include "ftscope/rng.hpp"

namespace ftscope {

using nlohmann::json;

StemStage StemStage::conv(std::string name, std::size_t out, std::size_t kernel, std::size_t stride,
                          std::size_t padding) {
  return StemStage{Kind::conv, std::move(name), out, kernel, stride, padding};
}

StemStage StemStage::maxpool(std::size_t size) { return StemStage{Kind::maxpool, "", 0, size, size, 0}; }

BlockSpec BlockSpec::standard(std::string name, std::size_t width, bool pool_before) {
  BlockSpec b;
  b.name = std::move(name);
  b.b1x1 = width / 4;
  b.b3x3 = 3 * width / 8;
  b.b5x5 = width / 8;
  b.pool_proj = width - b.b1x1 - b.b3x3 - b.b5x5;
  b.b3x3_reduce = std::max<std::size_t>(4, 2 * b.b3x3 / 3);
  b.b5x5_reduce = std::max<std::size_t>(2, b.b5x5 / 2);
  b.pool_before = pool_before;
  return b;
}

ModelSpec ModelSpec::desk(HeadSpec head, std::size_t input_size) {
  ModelSpec s;
  s.input_size = input_size;
  s.stem = {StemStage::conv("conv2d0", 16, 3, 1, 1), StemStage::maxpool(2), StemStage::conv("conv2d1", 32, 3, 1, 1),
            StemStage::maxpool(2)};
  constexpr std::size_t widths[] = {32, 32, 48, 48, 64, 64, 80, 96, 96};
  for (std::size_t i = 0; i < std::size(kBlockNames); ++i) {
    const std::string name(kBlockNames[i]);
    s.blocks.push_back(BlockSpec::standard(name, widths[i], name == "mixed4a" || name == "mixed5a"));
  }
  s.head = head;
  return s;
}

std::vector<AuxHeadSpec> ModelSpec::default_aux_heads() { return {{"mixed4a", 0.3}, {"mixed4d", 0.3}}; }

std::vector<std::string> ModelSpec::block_names() const {
  std::vector<std::string> out;
  for (const auto& b : blocks) out.push_back(b.name);
  return out;
}

std::vector<std::string> ModelSpec::layer_names() const {
  std::vector<std::string> out;
  for (const auto& s : stem)
    if (s.kind == StemStage::Kind::conv) out.push_back(s.name);
  for (const auto& b : blocks) out.push_back(b.name);
  return out;
}

bool ModelSpec::same_body(const ModelSpec& other) const {
  return input_size == other.input_size && stem == other.stem && blocks == other.blocks;
}

namespace {

std::ptrdiff_t canonical_index(std::string_view name) {
  for (std::size_t i = 0; i < std::size(kBlockNames); ++i)
    if (kBlockNames[i] == name) return static_cast<std::ptrdiff_t>(i);
  return -1;
}

std::size_t pooled_size(std::size_t size, std::size_t window, std::size_t stride, std::size_t padding,
                        std::string_view where) {
  if (size + 2 * padding < window) {
    throw ConfigError("spatial size " + std::to_string(size) + " too small for " + std::string(where));
  }
  return (size + 2 * padding - window) / stride + 1;
}

}  // namespace

void ModelSpec::validate() const {
  if (input_size < 1) throw ConfigError("input_size must be positive");
  if (head.classes < 1) throw ConfigError("head must have at least one output");
  std::set<std::string> names;
  std::size_t size = input_size;
  for (const auto& s : stem) {
    if (s.kernel < 1 || s.stride < 1) throw ConfigError("stem stage needs kernel and stride >= 1");
    if (s.kind == StemStage::Kind::conv) {
      if (s.name.empty()) throw ConfigError("stem conv needs a name");
      if (canonical_index(s.name) >= 0) throw ConfigError("stem conv may not use block name " + s.name);
      if (!names.insert(s.name).second) throw ConfigError("duplicate layer name " + s.name);
      if (s.out_channels < 1) throw ConfigError("stem conv " + s.name + " needs output channels");
    }
    size = pooled_size(size, s.kernel, s.stride, s.padding, s.kind == StemStage::Kind::conv ? s.name : "stem pool");
  }
  std::ptrdiff_t prev = -1;
  for (const auto& b : blocks) {
    const std::ptrdiff_t idx = canonical_index(b.name);
    if (idx < 0) throw ConfigError("unknown block name '" + b.name + "'");
    if (prev >= 0 && idx != prev + 1) {
      throw ConfigError("block '" + b.name + "' out of canonical order (blocks must be a contiguous run of " +
                        "mixed3a..mixed5b)");
    }
    prev = idx;
    if (!names.insert(b.name).second) throw ConfigError("duplicate layer name " + b.name);
    if (b.b1x1 < 1 || b.b3x3_reduce < 1 || b.b3x3 < 1 || b.b5x5_reduce < 1 || b.b5x5 < 1 || b.pool_proj < 1) {
      throw ConfigError("block " + b.name + " has an empty branch");
    }
    if (b.pool_before) size = pooled_size(size, 2, 2, 0, b.name);
  }
  if (layer_names().empty()) throw ConfigError("model has no layers");
  std::set<std::string> aux_seen;
  for (const auto& a : aux_heads) {
    if (std::none_of(blocks.begin(), blocks.end(), [&](const BlockSpec& b) { return b.name == a.after; })) {
      throw ConfigError("aux head attaches to missing block '" + a.after + "'");
    }
    if (!aux_seen.insert(a.after).second) throw ConfigError("two aux heads after " + a.after);
    if (!(a.loss_weight >= 0.0)) throw ConfigError("aux loss weight must be non-negative");
  }
}

// ---- JSON ----------------------------------------------------------------

std::string to_json(const ModelSpec& spec) {
  json j;
  j["input_size"] = spec.input_size;
  j["stem"] = json::array();
  for (const auto& s : spec.stem) {
    if (s.kind == StemStage::Kind::conv) {
      j["stem"].push_back({{"type", "conv"},
                           {"name", s.name},
                           {"out_channels", s.out_channels},
                           {"kernel", s.kernel},
                           {"stride", s.stride},
                           {"padding", s.padding}});
    } else {
      j["stem"].push_back({{"type", "maxpool"}, {"size", s.kernel}});
    }
  }
  j["blocks"] = json::array();
  for (const auto& b : spec.blocks) {
    j["blocks"].push_back({{"name", b.name},
                           {"1x1", b.b1x1},
                           {"3x3_reduce", b.b3x3_reduce},
                           {"3x3", b.b3x3},
                           {"5x5_reduce", b.b5x5_reduce},
                           {"5x5", b.b5x5},
                           {"pool_proj", b.pool_proj},
                           {"pool_before", b.pool_before}});
  }
  j["head"] = {{"kind", spec.head.kind == HeadKind::softmax ? "softmax" : "sigmoid"},
               {"classes", spec.head.classes}};
  j["aux_heads"] = json::array();
  for (const auto& a : spec.aux_heads) j["aux_heads"].push_back({{"after", a.after}, {"loss_weight", a.loss_weight}});
  return j.dump();
}

ModelSpec model_spec_from_json(std::string_view text) {
  ModelSpec spec;
  try {
    const json j = json::parse(text);
    spec.input_size = j.at("input_size").get<std::size_t>();
    for (const auto& s : j.at("stem")) {
      const std::string type = s.at("type").get<std::string>();
      if (type == "conv") {
        spec.stem.push_back(StemStage::conv(s.at("name").get<std::string>(), s.at("out_channels").get<std::size_t>(),
                                            s.at("kernel").get<std::size_t>(), s.at("stride").get<std::size_t>(),
                                            s.at("padding").get<std::size_t>()));
      } else if (type == "maxpool") {
        spec.stem.push_back(StemStage::maxpool(s.at("size").get<std::size_t>()));
      } else {
        throw FormatError("unknown stem stage type '" + type + "'");
      }
    }
    for (const auto& b : j.at("blocks")) {
      BlockSpec blk;
      blk.name = b.at("name").get<std::string>();
      blk.b1x1 = b.at("1x1").get<std::size_t>();
      blk.b3x3_reduce = b.at("3x3_reduce").get<std::size_t>();
      blk.b3x3 = b.at("3x3").get<std::size_t>();
      blk.b5x5_reduce = b.at("5x5_reduce").get<std::size_t>();
      blk.b5x5 = b.at("5x5").get<std::size_t>();
      blk.pool_proj = b.at("pool_proj").get<std::size_t>();
      blk.pool_before = b.at("pool_before").get<bool>();
      spec.blocks.push_back(std::move(blk));
    }
    const std::string kind = j.at("head").at("kind").get<std::string>();
    if (kind == "softmax") {
      spec.head.kind = HeadKind::softmax;
    } else if (kind == "sigmoid") {
      spec.head.kind = HeadKind::sigmoid;
    } else {
      throw FormatError("unknown head kind '" + kind + "'");
    }
    spec.head.classes = j.at("head").at("classes").get<std::size_t>();
    for (const auto& a : j.at("aux_heads"))
      spec.aux_heads.push_back({a.at("after").get<std::string>(), a.at("loss_weight").get<double>()});
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed model spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

// ---- parameter layout ----------------------------------------------------

std::vector<ParamInfo> param_layout(const ModelSpec& spec) {
  spec.validate();
  std::vector<ParamInfo> out;
  auto add_conv = [&](const std::string& layer, const std::string& prefix, std::size_t in, std::size_t outc,
                      std::size_t k) {
    out.push_back({prefix + "/weight", {outc, in, k, k}, ParamRole::conv_kernel, layer, in * k * k});
    out.push_back({prefix + "/bias", {outc}, ParamRole::conv_bias, layer, in * k * k});
  };
  auto add_dense = [&](const std::string& layer, std::size_t in, std::size_t outc) {
    out.push_back({layer + "/weight", {outc, in}, ParamRole::dense_weight, layer, in});
    out.push_back({layer + "/bias", {outc}, ParamRole::dense_bias, layer, in});
  };
  std::size_t channels = 3;
  for (const auto& s : spec.stem) {
    if (s.kind != StemStage::Kind::conv) continue;
    add_conv(s.name, s.name, channels, s.out_channels, s.kernel);
    channels = s.out_channels;
  }
  std::map<std::string, std::size_t> block_out;
  for (const auto& b : spec.blocks) {
    add_conv(b.name, b.name + "/1x1", channels, b.b1x1, 1);
    add_conv(b.name, b.name + "/3x3_reduce", channels, b.b3x3_reduce, 1);
    add_conv(b.name, b.name + "/3x3", b.b3x3_reduce, b.b3x3, 3);
    add_conv(b.name, b.name + "/5x5_reduce", channels, b.b5x5_reduce, 1);
    add_conv(b.name, b.name + "/5x5", b.b5x5_reduce, b.b5x5, 5);
    add_conv(b.name, b.name + "/pool_proj", channels, b.pool_proj, 1);
    channels = b.out_channels();
    block_out[b.name] = channels;
  }
  add_dense("head", channels, spec.head.classes);
  for (const auto& a : spec.aux_heads) add_dense("aux_" + a.after, block_out.at(a.after), spec.head.classes);
  return out;
}

std::size_t param_count(const ModelSpec& spec) {
  std::size_t n = 0;
  for (const auto& p : param_layout(spec)) n += shape_numel(p.shape);
  return n;
}

// ---- ParamMap --------------------------------------------------------------

void ParamMap::insert(std::string name, Tensor value) {
  if (index_.count(name)) throw ConfigError("duplicate parameter " + name);
  index_.emplace(name, entries_.size());
  entries_.emplace_back(std::move(name), std::move(value));
}

bool ParamMap::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

const Tensor& ParamMap::at(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("missing parameter '" + std::string(name) + "'");
  return entries_[it->second].second;
}

Tensor& ParamMap::at(std::string_view name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("missing parameter '" + std::string(name) + "'");
  return entries_[it->second].second;
}

void ParamMap::set(std::string_view name, Tensor value) {
  Tensor& slot = at(name);
  if (slot.shape() != value.shape()) {
    throw ShapeError("parameter '" + std::string(name) + "' has shape " + shape_str(slot.shape()) +
                     ", refusing " + shape_str(value.shape()));
  }
  slot = std::move(value);
}

void ParamMap::erase(std::string_view name) {
  auto it = index_.find(name);
  if (it == index_.end()) return;
  entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(it->second));
  index_.clear();
  for (std::size_t i = 0; i < entries_.size(); ++i) index_.emplace(entries_[i].first, i);
}

std::vector<std::string> ParamMap::names() const {
  std::vector<std::string> out;
  for (const auto& [n, _] : entries_) out.push_back(n);
  return out;
}

bool ParamMap::bitwise_equal(const ParamMap& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].first != other.entries_[i].first) return false;
    if (!entries_[i].second.bitwise_equal(other.entries_[i].second)) return false;
  }
  return true;
}

std::string ModelCheckpoint::id() const {
  std::uint64_t h = fnv1a64(to_json(spec));
  for (const auto& [name, t] : params.entries()) {
    h = fnv1a64(name, h);
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(t.ptr()), t.size() * sizeof(double)), h);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---- construction --------------------------------------------------------

Tensor init_param(const ParamInfo& info, std::uint64_t seed) {
  Tensor t(info.shape);
  if (info.role == ParamRole::conv_bias || info.role == ParamRole::dense_bias) return t;
  const double bound = std::sqrt(6.0 / static_cast<double>(info.fan_in));
  Rng rng = Rng::derive(seed, info.name);
  for (double& v : t.mutable_data()) v = rng.uniform(-bound, bound);
  return t;
}

ModelCheckpoint build_model(const ModelSpec& spec, std::uint64_t seed) {
  ModelCheckpoint m;
  m.spec = spec;
  for (const auto& info : param_layout(spec)) m.params.insert(info.name, init_param(info, seed));
  m.meta.seed = seed;
  m.meta.provenance = "random";
  return m;
}

ModelCheckpoint build_model(const ModelSpec& spec, const ModelCheckpoint& source) {
  ModelCheckpoint m;
  m.spec = spec;
  const auto layout = param_layout(spec);
  if (layout.size() != source.params.size()) {
    throw ConfigError("checkpoint has " + std::to_string(source.params.size()) + " parameters, spec needs " +
                      std::to_string(layout.size()));
  }
  for (const auto& info : layout) {
    const Tensor& t = source.params.at(info.name);
    if (t.shape() != info.shape) {
      throw ShapeError("parameter '" + info.name + "' has shape " + shape_str(t.shape()) + ", spec needs " +
                       shape_str(info.shape));
    }
    m.params.insert(info.name, t);
  }
  m.meta = source.meta;
  return m;
}

namespace {

// Rebuilds `model` under `spec`, keeping existing tensors whose name and shape
// still fit and drawing the rest from `seed`.
ModelCheckpoint rebuild(const ModelCheckpoint& model, const ModelSpec& spec, std::uint64_t seed,
                        const std::set<std::string>& force_layers) {
  ModelCheckpoint out;
  out.spec = spec;
  out.meta = model.meta;
  for (const auto& info : param_layout(spec)) {
    const bool keep = !force_layers.count(info.layer) && model.params.contains(info.name) &&
                      model.params.at(info.name).shape() == info.shape;
    out.params.insert(info.name, keep ? model.params.at(info.name) : init_param(info, seed));
  }
  return out;
}

}  // namespace

ModelCheckpoint replace_head(const ModelCheckpoint& model, HeadSpec head, std::uint64_t seed) {
  if (head.classes < 1) throw ConfigError("head must have at least one output");
  ModelSpec spec = model.spec;
  spec.head = head;
  std::set<std::string> force{"head"};
  for (const auto& a : spec.aux_heads) force.insert("aux_" + a.after);
  return rebuild(model, spec, seed, force);
}

ModelCheckpoint reinitialize_layers(const ModelCheckpoint& model, std::span<const std::string> layers,
                                    std::uint64_t seed) {
  const auto known = model.spec.layer_names();
  std::set<std::string> force;
  for (const auto& l : layers) {
    if (l != "head" && std::find(known.begin(), known.end(), l) == known.end()) {
      throw ConfigError("unknown layer '" + l + "'");
    }
    force.insert(l);
  }
  return rebuild(model, model.spec, seed, force);
}

ModelCheckpoint with_aux_heads(const ModelCheckpoint& model, std::vector<AuxHeadSpec> aux, std::uint64_t seed) {
  ModelSpec spec = model.spec;
  spec.aux_heads = std::move(aux);
  return rebuild(model, spec, seed, {});
}

// ---- evaluation ------------------------------------------------------------

ModelGraph::ModelGraph(Tape& tape, const ModelCheckpoint& model, const std::set<std::string>& trainable)
    : tape_(tape), model_(model) {
  for (const auto& [name, t] : model.params.entries()) {
    params_.emplace(name, trainable.count(name) ? tape.parameter(t) : tape.constant(t));
  }
}

Var ModelGraph::param(std::string_view name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("missing parameter '" + std::string(name) + "'");
  return it->second;
}

Var ModelGraph::conv(Var x, std::string_view name, std::size_t stride, std::size_t padding) const {
  const std::string prefix(name);
  return ops::conv2d(x, param(prefix + "/weight"), param(prefix + "/bias"), {stride, padding});
}

ModelGraph::Outputs ModelGraph::run(Var images, bool with_aux, std::string_view stop_after) const {
  const ModelSpec& spec = model_.spec;
  const Shape& s = images.shape();
  if (s.size() != 4 || s[1] != 3 || s[2] != spec.input_size || s[3] != spec.input_size) {
    throw ShapeError("model expects [N,3," + std::to_string(spec.input_size) + "," +
                     std::to_string(spec.input_size) + "] images, got " + shape_str(s));
  }
  if (!stop_after.empty()) {
    const auto names = spec.layer_names();
    if (std::find(names.begin(), names.end(), stop_after) == names.end()) {
      throw ConfigError("unknown layer '" + std::string(stop_after) + "'");
    }
  }
  Outputs out;
  // Map [0, 1] pixels to [-1, 1].
  Var x = ops::add(ops::scale(images, 2.0), tape_.constant(Tensor::full(s, -1.0)));
  for (const auto& st : spec.stem) {
    if (st.kind == StemStage::Kind::maxpool) {
      x = ops::pool2d(x, ops::PoolKind::max, st.kernel, st.stride, st.padding);
      continue;
    }
    Var pre = conv(x, st.name, st.stride, st.padding);
    x = ops::relu(pre);
    out.preactivations.emplace(st.name, pre);
    out.activations.emplace(st.name, x);
    if (st.name == stop_after) return out;
  }
  for (const auto& b : spec.blocks) {
    if (b.pool_before) x = ops::pool2d(x, ops::PoolKind::max, 2, 2, 0);
    const std::string& n = b.name;
    Var b1 = conv(x, n + "/1x1", 1, 0);
    Var b3 = conv(ops::relu(conv(x, n + "/3x3_reduce", 1, 0)), n + "/3x3", 1, 1);
    Var b5 = conv(ops::relu(conv(x, n + "/5x5_reduce", 1, 0)), n + "/5x5", 1, 2);
    Var bp = conv(ops::pool2d(x, ops::PoolKind::max, 3, 1, 1), n + "/pool_proj", 1, 0);
    const Var parts[] = {b1, b3, b5, bp};
    Var pre = ops::concat_channels(parts);
    x = ops::relu(pre);
    out.preactivations.emplace(n, pre);
    out.activations.emplace(n, x);
    if (n == stop_after) return out;
  }
  auto classify = [&](Var features, const std::string& layer) {
    Var logits = ops::dense(ops::global_avg_pool(features), param(layer + "/weight"), param(layer + "/bias"));
    return spec.head.kind == HeadKind::softmax ? ops::softmax(logits) : ops::sigmoid(logits);
  };
  out.probs = classify(x, "head");
  if (with_aux) {
    for (const auto& a : spec.aux_heads) out.aux_probs.push_back(classify(out.activations.at(a.after), "aux_" + a.after));
  }
  return out;
}

ForwardResult forward(const ModelCheckpoint& model, const Tensor& batch, std::span<const std::string> capture,
                      CaptureMode mode) {
  const auto names = model.spec.layer_names();
  for (const auto& c : capture) {
    if (std::find(names.begin(), names.end(), c) == names.end()) {
      throw ConfigError("unknown layer '" + c + "'");
    }
  }
  Tape tape(false);
  ModelGraph graph(tape, model);
  const auto outputs = graph.run(tape.constant(batch));
  ForwardResult result;
  result.probs = outputs.probs.value();
  for (const auto& name : names) {
    if (std::find(capture.begin(), capture.end(), name) == capture.end()) continue;
    Var v = outputs.activations.at(name);
    if (mode == CaptureMode::pooled) v = ops::global_avg_pool(v);
    result.records.push_back({name, v.value()});
  }
  return result;
}

Shape layer_output_shape(const ModelSpec& spec, std::string_view layer) {
  spec.validate();
  std::size_t size = spec.input_size, channels = 3;
  for (const auto& s : spec.stem) {
    size = (size + 2 * s.padding - s.kernel) / s.stride + 1;
    if (s.kind == StemStage::Kind::conv) {
      channels = s.out_channels;
      if (s.name == layer) return {channels, size, size};
    }
  }
  for (const auto& b : spec.blocks) {
    if (b.pool_before) size = (size - 2) / 2 + 1;
    channels = b.out_channels();
    if (b.name == layer) return {channels, size, size};
  }
  throw ConfigError("unknown layer '" + std::string(layer) + "'");
}

}  // namespace ftscope
