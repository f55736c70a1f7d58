#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ftscope/autodiff.hpp"
#include "ftscope/tensor.hpp"

namespace ftscope {

/// Canonical Inception block names, shallow to deep.
inline constexpr std::string_view kBlockNames[] = {"mixed3a", "mixed3b", "mixed4a", "mixed4b", "mixed4c",
                                                   "mixed4d", "mixed4e", "mixed5a", "mixed5b"};

enum class HeadKind { softmax, sigmoid };

struct HeadSpec {
  HeadKind kind = HeadKind::softmax;
  std::size_t classes = 1;

  bool operator==(const HeadSpec&) const = default;
};

/// One stem stage: a 'conv' (named, with ReLU) or an unnamed 'maxpool'.
struct StemStage {
  enum class Kind { conv, maxpool };
  Kind kind = Kind::conv;
  std::string name;  // conv only
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t padding = 1;

  static StemStage conv(std::string name, std::size_t out, std::size_t kernel, std::size_t stride,
                        std::size_t padding);
  static StemStage maxpool(std::size_t size);

  bool operator==(const StemStage&) const = default;
};

/// Inception block: 1x1, 1x1->3x3, 1x1->5x5 and 3x3-maxpool->1x1 branches whose
/// outputs are concatenated. `pool_before` inserts a 2x2/2 max-pool ahead of it.
struct BlockSpec {
  std::string name;
  std::size_t b1x1 = 0;
  std::size_t b3x3_reduce = 0;
  std::size_t b3x3 = 0;
  std::size_t b5x5_reduce = 0;
  std::size_t b5x5 = 0;
  std::size_t pool_proj = 0;
  bool pool_before = false;

  std::size_t out_channels() const { return b1x1 + b3x3 + b5x5 + pool_proj; }
  /// Splits `width` output channels over the four branches (1/4, 3/8, 1/8, rest).
  static BlockSpec standard(std::string name, std::size_t width, bool pool_before);

  bool operator==(const BlockSpec&) const = default;
};

struct AuxHeadSpec {
  std::string after;
  double loss_weight = 0.3;

  bool operator==(const AuxHeadSpec&) const = default;
};

struct ModelSpec {
  std::size_t input_size = 32;
  std::vector<StemStage> stem;
  std::vector<BlockSpec> blocks;
  HeadSpec head;
  std::vector<AuxHeadSpec> aux_heads;

  /// Desk-scale network: 2-conv stem and nine blocks mixed3a..mixed5b.
  static ModelSpec desk(HeadSpec head, std::size_t input_size = 32);
  /// Auxiliary heads after mixed4a and mixed4d, weight 0.3 each.
  static std::vector<AuxHeadSpec> default_aux_heads();

  /// Throws ConfigError describing the first violated invariant.
  void validate() const;
  /// Stem conv names followed by block names: the canonical layer order.
  std::vector<std::string> layer_names() const;
  std::vector<std::string> block_names() const;
  /// Same stem and blocks (heads may differ).
  bool same_body(const ModelSpec& other) const;

  bool operator==(const ModelSpec&) const = default;
};

std::string to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(std::string_view json);

/// What a parameter tensor is; drives freezing, initialization and kernel_l2.
enum class ParamRole { conv_kernel, conv_bias, dense_weight, dense_bias };

struct ParamInfo {
  std::string name;
  Shape shape;
  ParamRole role;
  std::string layer;  // stem conv name, block name, "head" or "aux_<block>"
  std::size_t fan_in = 0;
};

/// Every parameter the spec generates, in canonical order.
std::vector<ParamInfo> param_layout(const ModelSpec& spec);
std::size_t param_count(const ModelSpec& spec);

/// Name-to-tensor map that remembers insertion order.
class ParamMap {
 public:
  void insert(std::string name, Tensor value);
  bool contains(std::string_view name) const;
  const Tensor& at(std::string_view name) const;
  Tensor& at(std::string_view name);
  void set(std::string_view name, Tensor value);
  void erase(std::string_view name);

  std::size_t size() const { return entries_.size(); }
  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::vector<std::string> names() const;

  bool bitwise_equal(const ParamMap& other) const;

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

struct CheckpointMeta {
  std::uint64_t seed = 0;
  /// "random", "pretrained" or "fine-tuned".
  std::string provenance = "random";
  std::string parent_id;
  int epoch = 0;

  bool operator==(const CheckpointMeta&) const = default;
};

struct ModelCheckpoint {
  ModelSpec spec;
  ParamMap params;
  CheckpointMeta meta;

  /// Content hash of spec and parameter bytes, as 16 hex digits.
  std::string id() const;
};

/// Random initialization: He-uniform U(-sqrt(6/fan_in), sqrt(6/fan_in)) for
/// kernels and dense weights, zero biases. Each tensor draws from its own stream
/// derived from (seed, name), so re-initializing one tensor never disturbs others.
ModelCheckpoint build_model(const ModelSpec& spec, std::uint64_t seed);
/// Copies parameters from `source`, which must match `spec` exactly.
ModelCheckpoint build_model(const ModelSpec& spec, const ModelCheckpoint& source);

/// Draws a fresh value for one parameter as build_model(spec, seed) would.
Tensor init_param(const ParamInfo& info, std::uint64_t seed);

/// New classification head drawn from `seed`; every other tensor is kept bit-exactly.
ModelCheckpoint replace_head(const ModelCheckpoint& model, HeadSpec head, std::uint64_t seed);
/// Re-draws all parameters of the given layers from `seed`.
ModelCheckpoint reinitialize_layers(const ModelCheckpoint& model, std::span<const std::string> layers,
                                    std::uint64_t seed);
/// Adds or removes auxiliary heads; new heads are drawn from `seed`.
ModelCheckpoint with_aux_heads(const ModelCheckpoint& model, std::vector<AuxHeadSpec> aux, std::uint64_t seed);

/// Binds a checkpoint's parameters onto a tape and evaluates the network.
class ModelGraph {
 public:
  /// Parameters listed in `trainable` become gradient-tracked leaves; the rest
  /// are constants.
  ModelGraph(Tape& tape, const ModelCheckpoint& model, const std::set<std::string>& trainable = {});

  struct Outputs {
    Var probs;
    std::vector<Var> aux_probs;             // parallel to spec.aux_heads
    std::map<std::string, Var> activations;  // post-ReLU layer outputs
    std::map<std::string, Var> preactivations;
  };

  /// `images` is [N, 3, S, S] with values in [0, 1]. When `stop_after` names a
  /// layer, evaluation ends there and `probs` is left unbound.
  Outputs run(Var images, bool with_aux = false, std::string_view stop_after = {}) const;

  Var param(std::string_view name) const;
  const std::map<std::string, Var, std::less<>>& params() const { return params_; }

 private:
  Var conv(Var x, std::string_view name, std::size_t stride, std::size_t padding) const;

  Tape& tape_;
  const ModelCheckpoint& model_;
  std::map<std::string, Var, std::less<>> params_;
};

struct ActivationRecord {
  std::string layer;
  Tensor values;  // [N, C] pooled or [N, C, H, W] spatial
};

struct ForwardResult {
  Tensor probs;
  std::vector<ActivationRecord> records;  // canonical layer order
};

enum class CaptureMode { pooled, spatial };

/// Inference pass. Records are post-ReLU outputs of the requested layers,
/// globally average-pooled unless `mode` is spatial.
ForwardResult forward(const ModelCheckpoint& model, const Tensor& batch, std::span<const std::string> capture = {},
                      CaptureMode mode = CaptureMode::pooled);

/// Output shape [C, H, W] of a layer for a single image.
Shape layer_output_shape(const ModelSpec& spec, std::string_view layer);

}  // namespace ftscope
