#include "uda/style.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "uda/common.hpp"

namespace uda::data {

bool StyleConfig::is_identity() const { return *this == StyleConfig::identity(); }

void StyleConfig::validate(const char* field) const {
  const std::string f(field);
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ValidationError(f + ".gamma must be positive");
  if (!(contrast > 0.0) || !std::isfinite(contrast)) throw ValidationError(f + ".contrast must be positive");
  if (!std::isfinite(brightness_offset)) throw ValidationError(f + ".brightness_offset must be finite");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw ValidationError(f + ".noise_sigma must be nonnegative");
  if (!(blur_sigma >= 0.0) || !std::isfinite(blur_sigma)) throw ValidationError(f + ".blur_sigma must be nonnegative");
}

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 0.0) return img;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double norm = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    kernel[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
    norm += kernel[k + radius];
  }
  for (double& k : kernel) k /= norm;

  const int n = img.size;
  auto clampi = [n](int v) { return std::clamp(v, 0, n - 1); };
  Image tmp(n), out(n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * img.at(r, clampi(c + k));
      tmp.at(r, c) = static_cast<float>(acc);
    }
  }
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * tmp.at(clampi(r + k), c);
      out.at(r, c) = static_cast<float>(acc);
    }
  }
  return out;
}

Image apply_style(const Image& img, const StyleConfig& style, std::uint64_t noise_seed) {
  if (style.is_identity()) return img;
  Image out = gaussian_blur(img, style.blur_sigma);
  std::mt19937_64 rng(noise_seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (float& p : out.pixels) {
    double v = (p - 0.5) * style.contrast + 0.5 + style.brightness_offset;
    v = std::clamp(v, 0.0, 1.0);
    v = std::pow(v, style.gamma);
    if (style.noise_sigma > 0.0) v += style.noise_sigma * noise(rng);
    v = std::clamp(v, 0.0, 1.0);
    if (style.invert) v = 1.0 - v;
    p = static_cast<float>(v);
  }
  return out;
}

}  // namespace uda::data
