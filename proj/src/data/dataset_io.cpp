#include "uda/dataset_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <vector>

#include "uda/common.hpp"

namespace uda::data {

namespace {

using nlohmann::json;

const char* kManifestName = "manifest.json";

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string entry_key(const std::string& domain, Partition p) {
  return domain + "/" + partition_name(p);
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace

const char* partition_name(Partition p) { return p == Partition::train ? "train" : "test"; }

Partition parse_partition(const std::string& s) {
  if (s == "train") return Partition::train;
  if (s == "test") return Partition::test;
  throw ValidationError("partition must be 'train' or 'test', got '" + s + "'");
}

void write_png(const fs::path& path, const Image& img) {
  std::vector<png_byte> buf(img.pixels.size());
  std::transform(img.pixels.begin(), img.pixels.end(), buf.begin(), [](float p) {
    return static_cast<png_byte>(std::lround(std::clamp(p, 0.0f, 1.0f) * 255.0f));
  });
  png_image pi{};
  pi.version = PNG_IMAGE_VERSION;
  pi.width = static_cast<png_uint_32>(img.size);
  pi.height = static_cast<png_uint_32>(img.size);
  pi.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&pi, path.c_str(), 0, buf.data(), 0, nullptr)) {
    std::string msg = pi.message;
    png_image_free(&pi);
    throw IoError("cannot write PNG " + path.string() + ": " + msg);
  }
}

Image read_png(const fs::path& path) {
  png_image pi{};
  pi.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&pi, path.c_str())) {
    std::string msg = pi.message;
    png_image_free(&pi);
    throw IoError("not a readable PNG: " + path.string() + " (" + msg + ")");
  }
  if (pi.width != pi.height) {
    png_image_free(&pi);
    throw IoError("non-square image: " + path.string());
  }
  pi.format = PNG_FORMAT_GRAY;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(pi));
  if (!png_image_finish_read(&pi, nullptr, buf.data(), 0, nullptr)) {
    std::string msg = pi.message;
    png_image_free(&pi);
    throw IoError("cannot decode PNG " + path.string() + ": " + msg);
  }
  Image img(static_cast<int>(pi.width));
  std::transform(buf.begin(), buf.end(), img.pixels.begin(),
                 [](png_byte b) { return static_cast<float>(b) / 255.0f; });
  return img;
}

nlohmann::json read_manifest(const fs::path& root) {
  const fs::path p = root / kManifestName;
  if (!fs::exists(p)) return json::object();
  std::ifstream in(p);
  try {
    json j = json::parse(in);
    if (j.value("format_version", std::string{}) != kDatasetFormatVersion) {
      throw IoError("unsupported dataset manifest format_version in " + p.string());
    }
    return j;
  } catch (const json::exception& e) {
    throw IoError("ill-formed manifest " + p.string() + ": " + e.what());
  }
}

void save_dataset(const DomainDataset& ds, const fs::path& root, Partition partition,
                  std::optional<std::uint64_t> generator_hash) {
  ds.validate();
  const fs::path dir = root / ds.domain / partition_name(partition);
  std::error_code ec;
  fs::remove_all(dir, ec);
  for (Label l : {Label::positive, Label::negative}) {
    fs::create_directories(dir / label_dir(l), ec);
    if (ec) throw IoError("cannot create " + (dir / label_dir(l)).string() + ": " + ec.message());
  }
  std::optional<std::string> synth_from;
  for (const auto& s : ds.samples) {
    if (s.provenance.synthesized_from) synth_from = s.provenance.synthesized_from;
    write_png(dir / label_dir(s.label) / (s.id + ".png"), s.image);
  }

  json manifest = read_manifest(root);
  manifest["format_version"] = kDatasetFormatVersion;
  if (generator_hash) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(*generator_hash));
    manifest["generator_config_hash"] = buf;
  }
  json entry = {{"domain", ds.domain},
                {"partition", partition_name(partition)},
                {"image_size", ds.image_size},
                {"n_pos", ds.count(Label::positive)},
                {"n_neg", ds.count(Label::negative)},
                {"synthesized_from", synth_from ? json(*synth_from) : json(nullptr)}};
  manifest["datasets"][entry_key(ds.domain, partition)] = entry;
  write_json_file(root / kManifestName, manifest);
}

DomainDataset load_dataset_dir(const fs::path& dir, const std::string& domain,
                               const std::optional<std::string>& synthesized_from) {
  if (!fs::is_directory(dir)) throw IoError("dataset directory not found: " + dir.string());
  DomainDataset ds;
  ds.domain = domain;
  std::set<std::string> seen;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (!entry.is_directory()) throw IoError("unexpected file in dataset root: " + entry.path().string());
    if (name != "pos" && name != "neg") {
      throw IoError("unexpected directory '" + name + "' in " + dir.string() + " (expected pos/neg)");
    }
  }
  for (Label l : {Label::positive, Label::negative}) {
    const fs::path sub = dir / label_dir(l);
    if (!fs::exists(sub)) continue;
    for (const auto& entry : fs::directory_iterator(sub)) {
      const fs::path& p = entry.path();
      if (!entry.is_regular_file() || p.extension() != ".png") {
        throw IoError("non-image entry in dataset: " + p.string());
      }
      ImageSample s;
      s.id = p.stem().string();
      if (!seen.insert(s.id).second) throw IoError("duplicate sample id '" + s.id + "' in " + dir.string());
      s.label = l;
      s.image = read_png(p);
      if (ends_with(s.id, kSynthSuffix)) s.provenance.synthesized_from = synthesized_from.value_or("unknown");
      ds.samples.push_back(std::move(s));
    }
  }
  if (ds.samples.empty()) throw IoError("no samples found in " + dir.string());
  std::sort(ds.samples.begin(), ds.samples.end(),
            [](const ImageSample& a, const ImageSample& b) { return a.id < b.id; });
  ds.image_size = ds.samples.front().image.size;
  for (const auto& s : ds.samples) {
    if (s.image.size != ds.image_size) {
      throw IoError("sample '" + s.id + "' has size " + std::to_string(s.image.size) +
                    ", expected " + std::to_string(ds.image_size));
    }
  }
  return ds;
}

DomainDataset load_dataset(const fs::path& root, const std::string& domain, Partition partition) {
  const json manifest = read_manifest(root);
  std::optional<std::string> synth_from;
  if (manifest.contains("datasets")) {
    const auto& all = manifest.at("datasets");
    const auto key = entry_key(domain, partition);
    if (all.contains(key) && all.at(key).at("synthesized_from").is_string()) {
      synth_from = all.at(key).at("synthesized_from").get<std::string>();
    }
  }
  DomainDataset ds = load_dataset_dir(root / domain / partition_name(partition), domain, synth_from);
  if (manifest.contains("datasets") && manifest.at("datasets").contains(entry_key(domain, partition))) {
    const auto& e = manifest.at("datasets").at(entry_key(domain, partition));
    if (e.at("image_size").get<int>() != ds.image_size ||
        e.at("n_pos").get<std::size_t>() != ds.count(Label::positive) ||
        e.at("n_neg").get<std::size_t>() != ds.count(Label::negative)) {
      throw IoError("dataset " + entry_key(domain, partition) + " disagrees with its manifest entry");
    }
  }
  return ds;
}

}  // namespace uda::data
