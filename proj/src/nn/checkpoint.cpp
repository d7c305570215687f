#include "uda/nn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

#include "uda/common.hpp"

namespace uda::nn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_manifest(const fs::path& dir) {
  const fs::path p = dir / "manifest.json";
  std::ifstream in(p);
  if (!in) throw IoError("checkpoint manifest not found: " + p.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("ill-formed checkpoint manifest " + p.string() + ": " + e.what());
  }
  const auto version = j.value("format_version", std::string{});
  if (version != kCheckpointFormatVersion) {
    throw IoError("unsupported checkpoint format_version '" + version + "' in " + p.string());
  }
  return j;
}

}  // namespace

void save_checkpoint(const fs::path& dir, const CheckpointHeader& header,
                     const ParamSet<float>& params) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint directory " + dir.string() + ": " + ec.message());

  json index = json::array();
  std::vector<unsigned char> bytes;
  bytes.reserve(params.numel() * 4);
  std::size_t offset = 0;
  for (const auto& [name, v] : params.items()) {
    const auto d = v->value.shape.dims();
    index.push_back({{"name", name},
                     {"shape", {d[0], d[1], d[2], d[3]}},
                     {"dtype", "float32"},
                     {"offset", offset}});
    for (float x : v->value.data) {
      const auto u = std::bit_cast<std::uint32_t>(x);
      for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<unsigned char>(u >> (8 * b)));
    }
    offset += v->value.numel() * 4;
  }
  json manifest = {{"format_version", kCheckpointFormatVersion},
                   {"kind", header.kind},
                   {"config", header.config},
                   {"step_count", header.step_count},
                   {"params", index}};
  {
    std::ofstream out(dir / "manifest.json");
    if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
    out << manifest.dump(2) << '\n';
  }
  std::ofstream bin(dir / "params.bin", std::ios::binary);
  if (!bin) throw IoError("cannot write " + (dir / "params.bin").string());
  bin.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

CheckpointHeader read_checkpoint_header(const fs::path& dir) {
  const json j = read_manifest(dir);
  return {j.at("kind").get<std::string>(), j.at("config"), j.at("step_count").get<long>()};
}

CheckpointHeader load_checkpoint(const fs::path& dir, ParamSet<float>& params) {
  const json j = read_manifest(dir);
  const json& index = j.at("params");
  if (index.size() != params.items().size()) {
    throw IoError("checkpoint " + dir.string() + " holds " + std::to_string(index.size()) +
                  " tensors, model expects " + std::to_string(params.items().size()));
  }
  std::ifstream bin(dir / "params.bin", std::ios::binary);
  if (!bin) throw IoError("missing params.bin in " + dir.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto& e = index[i];
    const auto& [name, v] = params.items()[i];
    const auto shape = e.at("shape").get<std::vector<int>>();
    const auto d = v->value.shape.dims();
    if (e.at("name").get<std::string>() != name || shape.size() != 4 ||
        !std::equal(shape.begin(), shape.end(), d.begin())) {
      throw IoError("checkpoint tensor " + std::to_string(i) + " ('" + e.at("name").get<std::string>() +
                    "') does not match model parameter '" + name + "'");
    }
    if (e.at("dtype").get<std::string>() != "float32") throw IoError("unsupported dtype for '" + name + "'");
    const auto offset = e.at("offset").get<std::size_t>();
    if (offset + v->value.numel() * 4 > bytes.size()) throw IoError("params.bin truncated at '" + name + "'");
    for (std::size_t k = 0; k < v->value.numel(); ++k) {
      std::uint32_t u = 0;
      for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(bytes[offset + 4 * k + b]) << (8 * b);
      v->value.data[k] = std::bit_cast<float>(u);
    }
  }
  return {j.at("kind").get<std::string>(), j.at("config"), j.at("step_count").get<long>()};
}

}  // namespace uda::nn
