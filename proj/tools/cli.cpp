#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ftscope/checkpoint.hpp"
#include "ftscope/data.hpp"
#include "ftscope/error.hpp"
#include "ftscope/featviz.hpp"
#include "ftscope/image_io.hpp"
#include "ftscope/metrics.hpp"
#include "ftscope/report.hpp"
#include "ftscope/rng.hpp"
#include "ftscope/training.hpp"

namespace ftscope::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct DataFlags {
  std::string source;
  std::uint64_t seed = 0;
  std::size_t images_per_class = 100;
  std::size_t object_images = 400;
  std::size_t image_size = 32;
  std::uint64_t variant = 0;
};

Dataset load_dataset(const DataFlags& f, std::uint64_t variant) {
  SynthConfig c;
  c.seed = f.seed;
  c.images_per_class = f.images_per_class;
  c.object_images = f.object_images;
  c.image_size = f.image_size;
  if (f.source == "synth:style") {
    c.variant = variant;
    return generate_style_corpus(c);
  }
  if (f.source == "synth:object") return generate_object_corpus(c, variant);
  if (f.source.rfind("synth:", 0) == 0) {
    throw ConfigError("unknown synthetic corpus '" + f.source + "'; use synth:style or synth:object");
  }
  return load_folder(f.source, f.image_size, f.seed);
}

std::vector<std::size_t> split_index(const Dataset& ds, const std::string& split) {
  if (split == "all") return ds.all_indices();
  if (split == "train") return ds.indices(Split::train);
  if (split == "val") return ds.indices(Split::val);
  if (split == "test") return ds.indices(Split::test);
  throw ConfigError("unknown split '" + split + "'; use all, train, val or test");
}

/// Test-split score: top-1 for style data, mAP for object data.
json test_scores(const ModelCheckpoint& model, const Dataset& ds) {
  const auto idx = ds.indices(Split::test);
  json j;
  j["checkpoint_id"] = model.id();
  j["test_images"] = idx.size();
  if (idx.empty()) return j;
  if (ds.task == TaskKind::style) {
    const Evaluation e = evaluate(model, ds, idx);
    j["test_top1"] = e.top1;
    j["test_loss"] = e.loss;
  } else {
    std::vector<std::string> ids;
    for (std::size_t i : idx) ids.push_back(ds.ids[i]);
    const MapResult r = mean_average_precision(predict(model, ds, idx), ds.target_batch(idx), ids);
    j["test_map"] = r.value;
    j["warnings"] = r.warnings;
  }
  return j;
}

std::string class_text(const Dataset& ds, std::size_t i) {
  if (ds.task == TaskKind::style) return ds.class_names[static_cast<std::size_t>(ds.labels[i])];
  std::string s;
  for (std::size_t l = 0; l < ds.targets[i].size(); ++l) {
    if (ds.targets[i][l] == 0.0) continue;
    if (!s.empty()) s += ';';
    s += ds.class_names[l];
  }
  return s;
}

void check_tag(const std::string& tag) {
  if (tag.empty() || tag == "." || tag == ".." || tag.find_first_of("/\\") != std::string::npos) {
    throw ConfigError("--tag must be a plain directory name, got '" + tag + "'");
  }
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---- manifest --------------------------------------------------------------

json read_manifest(const fs::path& out) {
  const fs::path p = out / "manifest.json";
  if (fs::exists(p)) return json::parse(read_text_file(p));
  return json{{"out", fs::absolute(out).lexically_normal().string()}, {"entries", json::array()}};
}

void record(const fs::path& out, const std::string& tag, const std::vector<std::string>& args, const json& config) {
  json m = read_manifest(out);
  json entry;
  entry["tag"] = tag;
  entry["args"] = args;
  entry["config"] = config;
  json artifacts = json::object();
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(out / tag)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) artifacts[fs::relative(f, out).generic_string()] = file_digest(f);
  entry["artifacts"] = artifacts;

  json kept = json::array();
  for (const auto& e : m["entries"]) {
    if (e["tag"] != tag) kept.push_back(e);
  }
  kept.push_back(entry);
  m["entries"] = kept;
  m["run_id"] = hex64(fnv1a64(kept.dump()));
  write_text_file(out / "manifest.json", m.dump(2) + "\n");
}

// ---- command plumbing ----------------------------------------------------------

struct Command {
  CLI::App* app = nullptr;
  std::set<std::string> path_options;
  std::function<json(const fs::path& dir, std::ostream& out)> action;
};

/// Full option list of a parsed subcommand, defaults included, with path
/// arguments made absolute so the command can be replayed from anywhere.
std::vector<std::string> canonical_args(const Command& cmd) {
  std::vector<std::string> args{cmd.app->get_name()};
  for (const CLI::Option* opt : cmd.app->get_options()) {
    if (opt->get_lnames().empty() || opt->get_lnames().front() == "help") continue;
    const std::string name = opt->get_lnames().front();
    std::vector<std::string> values = opt->results();
    if (values.empty()) {
      if (opt->get_default_str().empty()) continue;
      values = {opt->get_default_str()};
    }
    for (std::string v : values) {
      if (cmd.path_options.count(name) && !v.empty() && v.rfind("synth:", 0) != 0) {
        v = fs::absolute(v).lexically_normal().string();
      }
      args.push_back("--" + name);
      args.push_back(v);
    }
  }
  return args;
}

void add_data_flags(CLI::App* app, DataFlags& f, const std::string& prefix, bool required) {
  auto* o = app->add_option("--" + prefix + "dataset", f.source, "folder, synth:style or synth:object");
  if (required) o->required();
}

void add_common_data_flags(CLI::App* app, DataFlags& f) {
  app->add_option("--data-seed", f.seed, "seed of synthetic corpora and of split hashing");
  app->add_option("--images-per-class", f.images_per_class, "style corpus size per class");
  app->add_option("--object-images", f.object_images, "object corpus size");
  app->add_option("--image-size", f.image_size, "image side in pixels");
}

int replay(const fs::path& manifest_path, const fs::path& new_out, std::ostream& out, std::ostream& err);

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"ftscope: fine-tuning and feature visualization experiments"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  std::string out_dir = "ftscope-out";
  std::string tag;
  std::uint64_t seed = 0;
  DataFlags data, target;
  std::uint64_t target_variant = 1;
  std::string mode_name = "A", mode_file, target_mode_name = "A", target_mode_file;
  int epochs = -1, target_epochs = -1;
  std::string init, model_a, model_b, model_path;
  std::string metrics_list = "cka,l2,overlap,entropy";
  std::string layer, compare_split = "test", topk_split = "all";
  std::size_t channel = 0, k = 100, baseline_count = 16;
  int steps = 512;
  double step_size = 0.05;
  std::string manifest_path;

  std::map<std::string, Command> commands;
  auto add_command = [&](const std::string& name, const std::string& help) -> Command& {
    Command& c = commands[name];
    c.app = app.add_subcommand(name, help);
    c.app->option_defaults()->always_capture_default();
    c.app->add_option("--out", out_dir, "output directory; nothing is written elsewhere");
    c.app->add_option("--tag", tag, "subdirectory of --out for this command's artifacts (default: command name)");
    c.path_options = {"out"};
    return c;
  };

  // generate
  {
    Command& c = add_command("generate", "write a dataset folder");
    add_data_flags(c.app, data, "", true);
    add_common_data_flags(c.app, data);
    c.app->add_option("--variant", data.variant, "style variant (object corpus: background variant)");
    c.path_options.insert("dataset");
    c.action = [&](const fs::path& dir, std::ostream& o) {
      const Dataset ds = load_dataset(data, data.variant);
      write_folder(ds, dir / "data");
      o << "wrote " << ds.size() << " images to " << (fs::path(out_dir) / tag / "data").string() << "\n";
      return json{{"images", ds.size()}, {"classes", ds.class_names}};
    };
  }

  // train
  {
    Command& c = add_command("train", "train or fine-tune a model");
    add_data_flags(c.app, data, "", true);
    add_common_data_flags(c.app, data);
    c.app->add_option("--variant", data.variant, "style variant (object corpus: background variant)");
    c.app->add_option("--mode", mode_name, "preset: " + [] {
      std::string s;
      for (const auto& n : TrainingMode::preset_names()) s += (s.empty() ? "" : ", ") + n;
      return s;
    }());
    c.app->add_option("--mode-file", mode_file, "key=value mode config (overrides --mode)");
    c.app->add_option("--epochs", epochs, "override max_epochs (-1 keeps the mode's value)");
    c.app->add_option("--seed", seed, "model init and training seed");
    c.app->add_option("--init", init, "starting checkpoint directory (default: random init)");
    c.path_options.insert({"dataset", "mode-file", "init"});
    c.action = [&](const fs::path& dir, std::ostream& o) {
      TrainingMode mode = mode_file.empty() ? TrainingMode::preset(mode_name) : load_mode_file(mode_file);
      if (epochs >= 0) mode.max_epochs = epochs;
      mode.validate();
      const Dataset ds = load_dataset(data, data.variant);
      ModelCheckpoint model = init.empty() ? build_model(ModelSpec::desk(head_for(ds), ds.image_size), seed)
                                           : load_checkpoint(init);
      if (!(model.spec.head == head_for(ds))) model = replace_head(model, head_for(ds), seed);
      const TrainResult r = train(model, ds, mode, seed, [&](const EpochRecord& e) {
        o << "epoch " << e.epoch << " train_loss " << e.train_loss << " val_loss " << e.val_loss << " val_top1 "
          << e.val_top1 << "\n";
      });
      save_checkpoint(r.model, dir / "model");
      write_text_file(dir / "history.csv", r.history.to_csv());
      write_text_file(dir / "mode.txt", format_mode_config(mode));
      json scores = test_scores(r.model, ds);
      scores["selected_epoch"] = r.history.selected_epoch;
      write_text_file(dir / "eval.json", scores.dump(2) + "\n");
      o << "checkpoint " << r.model.id() << " (epoch " << r.history.selected_epoch << ")\n";
      return json{{"checkpoint", "model"}, {"checkpoint_id", r.model.id()}};
    };
  }

  // double-ft
  {
    Command& c = add_command("double-ft", "fine-tune on an intermediate dataset, then on the target");
    add_data_flags(c.app, data, "", true);
    add_data_flags(c.app, target, "target-", true);
    add_common_data_flags(c.app, data);
    c.app->add_option("--variant", data.variant, "intermediate style variant");
    c.app->add_option("--target-variant", target_variant, "target style variant (object corpus: background variant)");
    c.app->add_option("--mode", mode_name, "intermediate-stage preset");
    c.app->add_option("--mode-file", mode_file, "intermediate-stage mode config");
    c.app->add_option("--target-mode", target_mode_name, "target-stage preset");
    c.app->add_option("--target-mode-file", target_mode_file, "target-stage mode config");
    c.app->add_option("--epochs", epochs, "override intermediate max_epochs");
    c.app->add_option("--target-epochs", target_epochs, "override target max_epochs");
    c.app->add_option("--seed", seed, "seed s; the stages use s, s+1 (new head) and s+2");
    c.app->add_option("--init", init, "pretrained checkpoint directory")->required();
    c.path_options.insert({"dataset", "target-dataset", "mode-file", "target-mode-file", "init"});
    c.action = [&](const fs::path& dir, std::ostream& o) {
      TrainingMode m1 = mode_file.empty() ? TrainingMode::preset(mode_name) : load_mode_file(mode_file);
      TrainingMode m2 =
          target_mode_file.empty() ? TrainingMode::preset(target_mode_name) : load_mode_file(target_mode_file);
      if (epochs >= 0) m1.max_epochs = epochs;
      if (target_epochs >= 0) m2.max_epochs = target_epochs;
      m1.validate();
      m2.validate();
      const Dataset inter = load_dataset(data, data.variant);
      DataFlags tf = target;
      tf.seed = data.seed;
      tf.images_per_class = data.images_per_class;
      tf.object_images = data.object_images;
      tf.image_size = data.image_size;
      const Dataset tgt = load_dataset(tf, target_variant);
      const DoubleFinetuneResult r =
          double_finetune(load_checkpoint(init), inter, m1, tgt, m2, DoubleFinetuneSeeds::from(seed));
      save_checkpoint(r.intermediate.model, dir / "intermediate" / "model");
      write_text_file(dir / "intermediate" / "history.csv", r.intermediate.history.to_csv());
      save_checkpoint(r.target.model, dir / "target" / "model");
      write_text_file(dir / "target" / "history.csv", r.target.history.to_csv());
      write_text_file(dir / "eval.json", test_scores(r.target.model, tgt).dump(2) + "\n");
      o << "intermediate " << r.intermediate.model.id() << ", target " << r.target.model.id() << "\n";
      return json{{"checkpoints", {"intermediate/model", "target/model"}}};
    };
  }

  // compare
  {
    Command& c = add_command("compare", "layer-wise comparison of two checkpoints");
    c.app->add_option("--model-a", model_a, "first checkpoint directory")->required();
    c.app->add_option("--model-b", model_b, "second checkpoint directory")->required();
    add_data_flags(c.app, data, "", true);
    add_common_data_flags(c.app, data);
    c.app->add_option("--variant", data.variant, "style variant");
    c.app->add_option("--metrics", metrics_list, "comma list of cka, l2, overlap, entropy");
    c.app->add_option("--k", k, "top-K set size for overlap and entropy");
    c.app->add_option("--split", compare_split, "images to use: all, train, val or test");
    c.path_options.insert({"model-a", "model-b", "dataset"});
    c.action = [&](const fs::path& dir, std::ostream& o) {
      std::set<std::string> wanted;
      for (std::size_t pos = 0; pos <= metrics_list.size();) {
        const std::size_t comma = std::min(metrics_list.find(',', pos), metrics_list.size());
        const std::string m = metrics_list.substr(pos, comma - pos);
        if (m != "cka" && m != "l2" && m != "overlap" && m != "entropy") {
          throw ConfigError("unknown metric '" + m + "'; use cka, l2, overlap, entropy");
        }
        wanted.insert(m);
        pos = comma + 1;
      }
      const ModelCheckpoint a = load_checkpoint(model_a), b = load_checkpoint(model_b);
      if (!a.spec.same_body(b.spec)) throw ConfigError("compare: models have different architectures");
      const Dataset ds = load_dataset(data, data.variant);
      const auto idx = split_index(ds, compare_split);
      const auto layers = a.spec.layer_names();
      json written = json::array();
      auto emit = [&](const std::string& file, const std::string& text) {
        write_text_file(dir / file, text);
        written.push_back(file);
      };
      if (wanted.count("cka")) emit("cka.csv", layerwise_cka(a, b, ds, idx, layers).to_csv());
      if (wanted.count("l2")) {
        const KernelDistance d = kernel_l2(a, b);
        emit("l2.csv", d.by_layer().to_csv());
        std::string per = "kernel,value\n";
        for (const auto& [name, v] : d.per_kernel) per += name + "," + format_double(v) + "\n";
        emit("l2_kernels.csv", per);
      }
      if (wanted.count("overlap") || wanted.count("entropy")) {
        if (wanted.count("entropy") && ds.task != TaskKind::style) {
          throw ConfigError("entropy needs a single-label (style) dataset");
        }
        std::vector<std::string> ids;
        for (std::size_t i : idx) ids.push_back(ds.ids[i]);
        const auto fa = capture_features(a, ds, idx, layers);
        const auto fb = capture_features(b, ds, idx, layers);
        std::vector<std::pair<std::string, std::vector<double>>> overlap, ent_a, ent_b;
        const auto labels = ds.task == TaskKind::style ? label_map(ds) : std::map<std::string, int>{};
        for (const auto& layer_name : layers) {
          const auto ta = topk_all_channels(fa.at(layer_name), ids, layer_name, k);
          const auto tb = topk_all_channels(fb.at(layer_name), ids, layer_name, k);
          std::vector<double> ov, ea, eb;
          for (std::size_t ch = 0; ch < ta.size(); ++ch) {
            ov.push_back(overlap_ratio(ta[ch], tb[ch]));
            if (wanted.count("entropy")) {
              ea.push_back(class_entropy(ta[ch], labels, ds.num_classes()).value);
              eb.push_back(class_entropy(tb[ch], labels, ds.num_classes()).value);
            }
          }
          overlap.emplace_back(layer_name, ov);
          ent_a.emplace_back(layer_name, ea);
          ent_b.emplace_back(layer_name, eb);
        }
        auto summaries = [](const std::vector<std::pair<std::string, std::vector<double>>>& rows) {
          std::vector<std::pair<std::string, Summary>> s;
          for (const auto& [name, v] : rows) s.emplace_back(name, summarize(v));
          return s;
        };
        if (wanted.count("overlap")) {
          emit("overlap.csv", summary_csv(summaries(overlap)));
          emit("overlap_channels.csv", channel_values_csv(overlap));
        }
        if (wanted.count("entropy")) {
          emit("entropy_a.csv", summary_csv(summaries(ent_a)));
          emit("entropy_a_channels.csv", channel_values_csv(ent_a));
          emit("entropy_b.csv", summary_csv(summaries(ent_b)));
          emit("entropy_b_channels.csv", channel_values_csv(ent_b));
        }
      }
      o << "wrote " << written.size() << " reports\n";
      return json{{"reports", written}, {"images", idx.size()}};
    };
  }

  // viz
  {
    Command& c = add_command("viz", "optimize an input image for one channel");
    c.app->add_option("--model", model_path, "checkpoint directory")->required();
    c.app->add_option("--layer", layer, "layer name")->required();
    c.app->add_option("--channel", channel, "channel index")->required();
    c.app->add_option("--steps", steps, "gradient ascent steps");
    c.app->add_option("--step-size", step_size, "Adam step size");
    c.app->add_option("--seed", seed, "initialization seed");
    c.app->add_option("--baseline-count", baseline_count, "random decoded inits averaged for the baseline");
    add_data_flags(c.app, data, "", false);
    add_common_data_flags(c.app, data);
    c.app->add_option("--variant", data.variant, "style variant");
    c.path_options.insert({"model", "dataset"});
    c.action = [&](const fs::path& dir, std::ostream& o) {
      const ModelCheckpoint model = load_checkpoint(model_path);
      const ChannelRef ch{layer, channel};
      check_channel(model.spec, ch);
      DecorrelationMatrix m = DecorrelationMatrix::identity();
      if (!data.source.empty()) {
        const Dataset ds = load_dataset(data, data.variant);
        m = fit_decorrelation(ds, ds.indices(Split::train));
        if (!m.warning.empty()) o << "warning: " << m.warning << "\n";
      }
      VizOptions opt;
      opt.steps = steps;
      opt.step_size = step_size;
      opt.seed = seed;
      const OptimizedImage img = optimize_channel(model, ch, m, opt);
      const double baseline = random_baseline(model, ch, m, baseline_count, seed + 1);
      write_ppm(img.image, dir / "image.ppm");
      write_text_file(dir / "trace.csv", trace_csv(img.trace));
      write_text_file(dir / "baseline.csv", "count,mean_objective\n" + std::to_string(baseline_count) + "," +
                                                format_double(baseline) + "\n");
      const double final_value = img.trace.back();
      json j{{"layer", layer},        {"channel", channel}, {"steps", steps},
             {"final", final_value},  {"baseline", baseline},
             {"ratio", baseline != 0.0 ? final_value / baseline : 0.0}};
      write_text_file(dir / "viz.json", j.dump(2) + "\n");
      o << layer << ":" << channel << " objective " << img.trace.front() << " -> " << final_value << " (baseline "
        << baseline << ")\n";
      return j;
    };
  }

  // topk
  {
    Command& c = add_command("topk", "maximal-activation images of one channel");
    c.app->add_option("--model", model_path, "checkpoint directory")->required();
    c.app->add_option("--layer", layer, "layer name")->required();
    c.app->add_option("--channel", channel, "channel index")->required();
    c.app->add_option("--k", k, "number of images");
    c.app->add_option("--split", topk_split, "images to rank: all, train, val or test");
    add_data_flags(c.app, data, "", true);
    add_common_data_flags(c.app, data);
    c.app->add_option("--variant", data.variant, "style variant (object corpus: background variant)");
    c.path_options.insert({"model", "dataset"});
    c.action = [&](const fs::path& dir, std::ostream& o) {
      const ModelCheckpoint model = load_checkpoint(model_path);
      const Dataset ds = load_dataset(data, data.variant);
      const auto idx = split_index(ds, topk_split);
      const TopKSet set = topk_activations(model, ds, idx, layer, channel, k);
      std::map<std::string, std::size_t> row;
      for (std::size_t i = 0; i < ds.size(); ++i) row[ds.ids[i]] = i;
      std::string csv = "rank,id,score,class\n";
      std::vector<Tensor> images;
      for (std::size_t r = 0; r < set.entries.size(); ++r) {
        const std::size_t i = row.at(set.entries[r].id);
        csv += std::to_string(r + 1) + "," + set.entries[r].id + "," + format_double(set.entries[r].score) + "," +
               class_text(ds, i) + "\n";
        images.push_back(ds.images[i]);
      }
      write_text_file(dir / "topk.csv", csv);
      const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(images.size()))));
      write_ppm(tile_images(images, cols), dir / "sheet.ppm");
      o << "top " << set.entries.size() << " of " << idx.size() << " images for " << layer << ":" << channel << "\n";
      return json{{"entries", set.entries.size()}};
    };
  }

  // replay
  {
    Command& c = add_command("replay", "re-run a manifest into a fresh directory and compare digests");
    c.app->add_option("--manifest", manifest_path, "manifest.json of an earlier run")->required();
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    for (auto& [name, cmd] : commands) {
      if (!cmd.app->parsed()) continue;
      if (name == "replay") return replay(manifest_path, out_dir, out, err);
      if (tag.empty()) tag = name;
      check_tag(tag);
      const fs::path root(out_dir);
      const auto canon = canonical_args(cmd);
      // Build into a scratch directory so a failed command leaves earlier artifacts alone.
      const fs::path staging = root / (".staging-" + tag);
      fs::remove_all(staging);
      fs::create_directories(staging);
      json config;
      try {
        config = cmd.action(staging, out);
      } catch (...) {
        fs::remove_all(staging);
        throw;
      }
      fs::remove_all(root / tag);
      fs::rename(staging, root / tag);
      record(root, tag, canon, config);
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

namespace {

int replay(const fs::path& manifest_path, const fs::path& new_out, std::ostream& out, std::ostream& err) {
  const json m = json::parse(read_text_file(manifest_path));
  const std::string old_root = m.at("out").get<std::string>();
  const std::string new_root = fs::absolute(new_out).lexically_normal().string();
  if (new_root == old_root) throw ConfigError("replay needs a fresh --out, not the recorded one");
  if (fs::exists(new_out) && !fs::is_empty(new_out)) throw ConfigError("replay output " + new_root + " is not empty");

  for (const auto& entry : m.at("entries")) {
    std::vector<std::string> args = entry.at("args").get<std::vector<std::string>>();
    for (auto& a : args) {
      if (a == old_root || a.rfind(old_root + "/", 0) == 0) a = new_root + a.substr(old_root.size());
    }
    out << "replay " << entry.at("tag").get<std::string>() << "\n";
    const int code = run(args, out, err);
    if (code != kExitOk) return code;
  }

  std::size_t checked = 0, mismatched = 0;
  for (const auto& entry : m.at("entries")) {
    for (const auto& [rel, digest] : entry.at("artifacts").items()) {
      ++checked;
      const fs::path p = fs::path(new_root) / rel;
      if (!fs::exists(p) || file_digest(p) != digest.get<std::string>()) {
        ++mismatched;
        err << "mismatch: " << rel << "\n";
      }
    }
  }
  out << "replayed " << checked << " artifacts, " << mismatched << " mismatched\n";
  return mismatched == 0 ? kExitOk : kExitRuntime;
}

}  // namespace

}  // namespace ftscope::cli
