#include "uda/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_set>

#include "uda/common.hpp"

namespace uda {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  std::string s(buf);
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
  return s;
}

std::string fixed9(double v) { return fixed(v, 9); }

}  // namespace uda

namespace uda::data {

Provenance Provenance::parse(const std::string& s) {
  constexpr std::string_view prefix = "synthesized_from:";
  if (s == "real") return {};
  if (s.rfind(prefix, 0) == 0 && s.size() > prefix.size()) {
    return Provenance{s.substr(prefix.size())};
  }
  throw ValidationError("unrecognized provenance '" + s + "'");
}

std::size_t DomainDataset::count(Label l) const {
  return static_cast<std::size_t>(std::count_if(
      samples.begin(), samples.end(), [l](const ImageSample& s) { return s.label == l; }));
}

void DomainDataset::validate() const {
  if (image_size <= 0) throw ValidationError("dataset '" + domain + "': image_size must be positive");
  std::unordered_set<std::string> ids;
  const auto npix = static_cast<std::size_t>(image_size) * image_size;
  for (const auto& s : samples) {
    if (s.image.size != image_size || s.image.pixels.size() != npix) {
      throw ValidationError("dataset '" + domain + "': sample '" + s.id +
                            "' does not match image_size " + std::to_string(image_size));
    }
    if (!ids.insert(s.id).second) {
      throw ValidationError("dataset '" + domain + "': duplicate id '" + s.id + "'");
    }
    for (float p : s.image.pixels) {
      if (!(p >= 0.0f && p <= 1.0f)) {
        throw ValidationError("dataset '" + domain + "': sample '" + s.id +
                              "' has an intensity outside [0,1]");
      }
    }
  }
}

float quantize(float p) {
  const float c = std::clamp(p, 0.0f, 1.0f);
  return static_cast<float>(std::lround(c * 255.0f)) / 255.0f;
}

void quantize(Image& img) {
  for (float& p : img.pixels) p = quantize(p);
}

double mean_intensity(const DomainDataset& ds) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : ds.samples) {
    for (float p : s.image.pixels) sum += p;
    n += s.image.pixels.size();
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

}  // namespace uda::data
