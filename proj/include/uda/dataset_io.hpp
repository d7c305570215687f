#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "uda/dataset.hpp"

namespace uda::data {

namespace fs = std::filesystem;

inline constexpr const char* kDatasetFormatVersion = "1";

enum class Partition { train, test };
const char* partition_name(Partition p);
Partition parse_partition(const std::string& s);

/// 8-bit grayscale PNG.
void write_png(const fs::path& path, const Image& img);
Image read_png(const fs::path& path);

/// Writes `ds` to <root>/<domain>/<partition>/<pos|neg>/<id>.png and
/// updates <root>/manifest.json. Pixels are quantized on the way out.
void save_dataset(const DomainDataset& ds, const fs::path& root, Partition partition,
                  std::optional<std::uint64_t> generator_hash = std::nullopt);

/// Reads <root>/<domain>/<partition>; samples come back ordered by id.
DomainDataset load_dataset(const fs::path& root, const std::string& domain,
                           Partition partition);

/// Reads a single <dir>/{pos,neg}/*.png tree. Ids ending in "~syn" get
/// provenance synthesized_from:<synthesized_from> (or "unknown").
DomainDataset load_dataset_dir(const fs::path& dir, const std::string& domain,
                               const std::optional<std::string>& synthesized_from = std::nullopt);

nlohmann::json read_manifest(const fs::path& root);

}  // namespace uda::data
