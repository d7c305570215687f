#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "uda/dataset.hpp"
#include "uda/style.hpp"

namespace uda::data {

struct Range {
  double min = 0.0;
  double max = 0.0;
  bool operator==(const Range&) const = default;
};

/// Procedural two-domain benchmark. Positives carry a bright irregular
/// elliptical blob; negatives only have the smooth background texture (which
/// includes soft round bumps in both classes).
struct GenConfig {
  int n_pos = 250;
  int n_neg = 250;
  int image_size = 64;
  Range lesion_radius_range{3.0, 7.0};
  Range lesion_contrast_range{0.12, 0.30};
  StyleConfig style_a = StyleConfig::identity();
  StyleConfig style_b{0.5, 1.3, 0.0, 0.05, 0.8, false};
  std::uint64_t seed = 7;
  std::string domain_a = "A";
  std::string domain_b = "B";

  /// Throws ValidationError naming the offending field.
  void validate() const;
  /// Stable hash of the canonical JSON form.
  std::uint64_t hash() const;

  bool operator==(const GenConfig&) const = default;
};

void to_json(nlohmann::json& j, const Range& r);
void from_json(const nlohmann::json& j, Range& r);
void to_json(nlohmann::json& j, const StyleConfig& s);
void from_json(const nlohmann::json& j, StyleConfig& s);
void to_json(nlohmann::json& j, const GenConfig& c);
void from_json(const nlohmann::json& j, GenConfig& c);

/// Renders the unstyled content of sample `index` in `domain`'s stream.
Image render_content(const GenConfig& cfg, const std::string& domain, int index, Label label);

/// Renders one domain: content, then its style, then 8-bit quantization.
DomainDataset generate_domain(const GenConfig& cfg, const std::string& domain,
                              const StyleConfig& style);

/// Both domains; each is a pure function of (cfg, domain tag).
std::pair<DomainDataset, DomainDataset> generate_synthetic_pair(const GenConfig& cfg);

}  // namespace uda::data
