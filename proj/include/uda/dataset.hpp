#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace uda::data {

enum class Label { negative = 0, positive = 1 };

inline int label_value(Label l) { return l == Label::positive ? 1 : 0; }
inline const char* label_dir(Label l) { return l == Label::positive ? "pos" : "neg"; }

/// Square grayscale image, row-major, intensities in [0,1].
struct Image {
  int size = 0;
  std::vector<float> pixels;

  Image() = default;
  explicit Image(int n, float fill = 0.0f)
      : size(n), pixels(static_cast<std::size_t>(n) * n, fill) {}

  float& at(int row, int col) { return pixels[static_cast<std::size_t>(row) * size + col]; }
  float at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * size + col]; }

  bool operator==(const Image&) const = default;
};

/// Where a sample came from: a real draw, or a translation of another domain.
struct Provenance {
  std::optional<std::string> synthesized_from;

  bool is_real() const { return !synthesized_from.has_value(); }
  std::string to_string() const {
    return synthesized_from ? "synthesized_from:" + *synthesized_from : "real";
  }
  static Provenance parse(const std::string& s);

  bool operator==(const Provenance&) const = default;
};

struct ImageSample {
  Image image;
  Label label = Label::negative;
  std::string id;
  Provenance provenance;

  bool operator==(const ImageSample&) const = default;
};

struct DomainDataset {
  std::string domain;
  int image_size = 0;
  std::vector<ImageSample> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::size_t count(Label l) const;

  /// Throws ValidationError when sizes disagree, ids repeat or pixels leave [0,1].
  void validate() const;

  bool operator==(const DomainDataset&) const = default;
};

/// Suffix that marks the translated copy of a sample.
inline constexpr const char* kSynthSuffix = "~syn";

/// Snaps an intensity to the 8-bit grid: round(p*255)/255, clamped to [0,1].
float quantize(float p);
void quantize(Image& img);

double mean_intensity(const DomainDataset& ds);

}  // namespace uda::data
