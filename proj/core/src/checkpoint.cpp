#include "ftscope/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <set>

#include "ftscope/error.hpp"

namespace ftscope {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void to_little_endian(std::vector<char>& bytes) {
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i + 8 <= bytes.size(); i += 8) std::reverse(bytes.begin() + i, bytes.begin() + i + 8);
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for " + path.string());
  return data;
}

}  // namespace

void save_checkpoint(const ModelCheckpoint& model, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  json manifest;
  manifest["format_version"] = kCheckpointFormatVersion;
  manifest["spec"] = json::parse(to_json(model.spec));
  manifest["meta"] = {{"seed", model.meta.seed},
                      {"provenance", model.meta.provenance},
                      {"parent_id", model.meta.parent_id},
                      {"epoch", model.meta.epoch}};
  manifest["tensors"] = json::array();
  std::vector<char> blob;
  for (const auto& [name, t] : model.params.entries()) {
    const std::size_t bytes = t.size() * sizeof(double);
    manifest["tensors"].push_back({{"name", name}, {"shape", t.shape()}, {"offset", blob.size()}, {"length", bytes}});
    const auto* p = reinterpret_cast<const char*>(t.ptr());
    blob.insert(blob.end(), p, p + bytes);
  }
  to_little_endian(blob);

  {
    std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
    out << manifest.dump(2) << '\n';
    if (!out) throw IoError("write failed for manifest.json");
  }
  std::ofstream out(dir / "params.bin", std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "params.bin").string());
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw IoError("write failed for params.bin");
}

ModelCheckpoint load_checkpoint(const fs::path& dir) {
  const std::string manifest_text = read_file(dir / "manifest.json");
  std::string blob = read_file(dir / "params.bin");

  ModelCheckpoint model;
  struct Entry {
    std::string name;
    Shape shape;
    std::size_t offset, length;
  };
  std::vector<Entry> entries;
  try {
    const json m = json::parse(manifest_text);
    const int version = m.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw FormatError("unknown checkpoint format version " + std::to_string(version) + " (expected " +
                        std::to_string(kCheckpointFormatVersion) + ")");
    }
    model.spec = model_spec_from_json(m.at("spec").dump());
    const json& meta = m.at("meta");
    model.meta.seed = meta.at("seed").get<std::uint64_t>();
    model.meta.provenance = meta.at("provenance").get<std::string>();
    model.meta.parent_id = meta.at("parent_id").get<std::string>();
    model.meta.epoch = meta.at("epoch").get<int>();
    for (const auto& t : m.at("tensors")) {
      entries.push_back({t.at("name").get<std::string>(), t.at("shape").get<Shape>(),
                         t.at("offset").get<std::size_t>(), t.at("length").get<std::size_t>()});
    }
  } catch (const json::exception& e) {
    throw FormatError("malformed checkpoint manifest in " + dir.string() + ": " + e.what());
  }

  // Parameter set first, so a dropped tensor is reported by name.
  std::set<std::string> listed;
  for (const auto& e : entries) {
    if (!listed.insert(e.name).second) throw FormatError("duplicate parameter '" + e.name + "' in manifest");
  }
  const auto layout = param_layout(model.spec);
  for (const auto& info : layout) {
    if (!listed.count(info.name)) throw FormatError("missing parameter '" + info.name + "' in manifest");
  }
  if (entries.size() != layout.size()) {
    for (const auto& e : entries) {
      if (std::none_of(layout.begin(), layout.end(), [&](const ParamInfo& p) { return p.name == e.name; })) {
        throw FormatError("unexpected parameter '" + e.name + "' in manifest");
      }
    }
  }

  std::size_t expected = 0;
  for (const auto& e : entries) {
    if (e.offset != expected || e.length != shape_numel(e.shape) * sizeof(double)) {
      throw FormatError("manifest entry '" + e.name + "' has inconsistent offset/length");
    }
    expected += e.length;
  }
  if (blob.size() != expected) {
    throw FormatError("params.bin length mismatch: manifest lists " + std::to_string(expected) + " bytes, file has " +
                      std::to_string(blob.size()));
  }
  std::vector<char> bytes(blob.begin(), blob.end());
  to_little_endian(bytes);

  ParamMap loaded;
  for (const auto& e : entries) {
    std::vector<double> values(shape_numel(e.shape));
    std::memcpy(values.data(), bytes.data() + e.offset, e.length);
    loaded.insert(e.name, Tensor(e.shape, std::move(values)));
  }
  // Keep canonical order and verify shapes against the spec.
  for (const auto& info : layout) {
    const Tensor& t = loaded.at(info.name);
    if (t.shape() != info.shape) {
      throw FormatError("parameter '" + info.name + "' has shape " + shape_str(t.shape()) + ", spec needs " +
                        shape_str(info.shape));
    }
    model.params.insert(info.name, t);
  }
  return model;
}

}  // namespace ftscope
