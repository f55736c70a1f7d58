#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ftscope/data.hpp"
#include "ftscope/model.hpp"
#include "ftscope/rng.hpp"

namespace ftscope {

struct Unfrozen {
  enum class Kind { all, top_n, none };
  Kind kind = Kind::all;
  std::size_t n = 0;  // top_n only

  static Unfrozen all() { return {Kind::all, 0}; }
  static Unfrozen none() { return {Kind::none, 0}; }
  static Unfrozen top(std::size_t n) { return {Kind::top_n, n}; }
  bool operator==(const Unfrozen&) const = default;
};

enum class Augmentation { none, small_transform, random_crop };
enum class OptimizerKind { sgd, adam };
enum class LrSchedule { constant, inception_decay };
/// How the starting weights are prepared before training.
enum class InitScheme { keep, reinit_unfrozen, reinit_all };

/// One row of the training-scheme matrix.
struct TrainingMode {
  std::string name;
  double lr_head = 0.01;
  double lr_body = 0.001;
  bool deep_supervision = false;
  int max_epochs = 20;
  Unfrozen unfrozen = Unfrozen::all();
  Augmentation augmentation = Augmentation::none;
  OptimizerKind optimizer = OptimizerKind::sgd;
  LrSchedule lr_schedule = LrSchedule::constant;
  InitScheme init = InitScheme::keep;

  /// Throws ConfigError. max_epochs may be 0 (the stage is then a no-op).
  void validate() const;

  /// Presets "A".."F", "scratch-top" and "scratch-full".
  static TrainingMode preset(std::string_view name);
  static std::vector<std::string> preset_names();

  bool operator==(const TrainingMode&) const = default;
};

/// key=value text keyed by the scheme table's column names; an optional
/// `mode = <preset>` line selects the starting preset (default A).
TrainingMode parse_mode_config(std::string_view text);
TrainingMode load_mode_file(const std::filesystem::path& path);
std::string format_mode_config(const TrainingMode& mode);

/// Names of parameters that receive updates. The head and auxiliary heads are
/// always trainable; top_n(k) adds the last k blocks, all adds everything.
std::set<std::string> trainable_params(const ModelCheckpoint& model, Unfrozen unfrozen);

/// Layers (blocks) that `unfrozen` opens for training, shallow to deep.
std::vector<std::string> unfrozen_layers(const ModelSpec& spec, Unfrozen unfrozen);

// ---- augmentation ----------------------------------------------------------

struct AugmentParams {
  bool flip = false;
  int dx = 0;
  int dy = 0;
  std::size_t crop_top = 0;
  std::size_t crop_left = 0;
};

/// Maximum translation for small_transform: round(S * 28 / 224).
int max_translation(std::size_t image_size);
/// Resize target for random_crop: round(S * 256 / 224).
std::size_t crop_resize(std::size_t image_size);

AugmentParams draw_augmentation(Augmentation scheme, std::size_t image_size, Rng& rng);
/// small_transform: optional horizontal flip, then integer shift by (dx, dy)
/// with zero fill. random_crop: bilinear resize to crop_resize(S), then the
/// S x S window at (crop_top, crop_left).
Tensor apply_augmentation(const Tensor& image, Augmentation scheme, const AugmentParams& params);
Tensor augment(const Tensor& image, Augmentation scheme, Rng& rng);

double lr_at(LrSchedule schedule, double base_lr, int epoch);

// ---- training ----------------------------------------------------------------

inline constexpr std::size_t kBatchSize = 32;

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_top1 = 0.0;  // percent
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int selected_epoch = 0;  // 0 when no epoch ran

  std::string to_csv() const;
};

struct TrainResult {
  ModelCheckpoint model;
  TrainHistory history;
};

/// Per-epoch progress callback (epoch record, elapsed seconds).
using TrainObserver = std::function<void(const EpochRecord&)>;

/// Minibatch training on the dataset's train split; returns the checkpoint with
/// the lowest validation loss (earliest on ties). Deterministic given
/// (model, dataset, mode, seed).
TrainResult train(const ModelCheckpoint& model, const Dataset& dataset, const TrainingMode& mode, std::uint64_t seed,
                  const TrainObserver& observer = {});

/// Head that matches a dataset: softmax for style labels, sigmoid for object labels.
HeadSpec head_for(const Dataset& dataset);

struct DoubleFinetuneSeeds {
  std::uint64_t intermediate = 0;
  std::uint64_t head = 0;
  std::uint64_t target = 0;

  static DoubleFinetuneSeeds from(std::uint64_t seed) { return {seed, seed + 1, seed + 2}; }
};

struct DoubleFinetuneResult {
  TrainResult intermediate;
  TrainResult target;
};

/// train(replace_head(train(model, intermediate), target head), target).
DoubleFinetuneResult double_finetune(const ModelCheckpoint& model, const Dataset& intermediate,
                                     const TrainingMode& intermediate_mode, const Dataset& target,
                                     const TrainingMode& target_mode, DoubleFinetuneSeeds seeds);

/// Class probabilities for the selected images, evaluated in batches.
Tensor predict(const ModelCheckpoint& model, const Dataset& dataset, std::span<const std::size_t> index);

struct Evaluation {
  double loss = 0.0;
  double top1 = 0.0;  // percent; for object tasks, label accuracy at threshold 0.5
};
Evaluation evaluate(const ModelCheckpoint& model, const Dataset& dataset, std::span<const std::size_t> index);

/// Arithmetic mean of the members' probabilities.
Tensor ensemble_predict(std::span<const ModelCheckpoint> models, const Tensor& batch);

}  // namespace ftscope
