#pragma once

#include <cstdint>

#include "uda/dataset.hpp"

namespace uda::data {

/// Appearance transform that stands in for acquisition differences between domains.
struct StyleConfig {
  double gamma = 1.0;
  double contrast = 1.0;
  double brightness_offset = 0.0;
  double noise_sigma = 0.0;
  double blur_sigma = 0.0;
  bool invert = false;

  static StyleConfig identity() { return {}; }
  bool is_identity() const;
  void validate(const char* field) const;

  bool operator==(const StyleConfig&) const = default;
};

/// blur -> contrast/brightness about mid-grey (clamp) -> gamma -> additive
/// Gaussian noise (clamp) -> optional inversion. Output stays in [0,1].
Image apply_style(const Image& img, const StyleConfig& style, std::uint64_t noise_seed);

/// Separable Gaussian blur with clamp-to-edge borders; radius = ceil(3 sigma).
Image gaussian_blur(const Image& img, double sigma);

}  // namespace uda::data
