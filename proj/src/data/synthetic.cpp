#include "uda/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "uda/common.hpp"

namespace uda::data {

namespace {

constexpr double kPi = std::numbers::pi;

// Background texture: base level, a few low-frequency waves and soft round
// bumps. Shared by both classes so the only class signal is the lesion.
constexpr double kBaseLo = 0.22;
constexpr double kBaseHi = 0.38;
constexpr int kWaves = 3;
constexpr double kWaveAmp = 0.04;
constexpr int kMaxBumps = 3;
constexpr double kBumpAmpLo = 0.03;
constexpr double kBumpAmpHi = 0.16;
constexpr double kBumpSigmaLo = 2.5;
constexpr double kBumpSigmaHi = 5.0;
constexpr double kEdgeSoftness = 0.12;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

void check_range(const Range& r, const char* field) {
  if (!std::isfinite(r.min) || !std::isfinite(r.max) || r.min > r.max) {
    throw ValidationError(std::string(field) + " must satisfy min <= max");
  }
}

std::string sample_id(const std::string& domain, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "_%05d", index);
  return domain + buf;
}

}  // namespace

void GenConfig::validate() const {
  if (n_pos < 1) throw ValidationError("n_pos must be >= 1");
  if (n_neg < 1) throw ValidationError("n_neg must be >= 1");
  if (n_pos + n_neg > 99999) throw ValidationError("n_pos + n_neg must be <= 99999");
  if (image_size < 16) throw ValidationError("image_size must be >= 16");
  check_range(lesion_radius_range, "lesion_radius_range");
  if (lesion_radius_range.min <= 0.0) throw ValidationError("lesion_radius_range must be positive");
  check_range(lesion_contrast_range, "lesion_contrast_range");
  style_a.validate("style_a");
  style_b.validate("style_b");
  if (domain_a.empty() || domain_b.empty() || domain_a == domain_b) {
    throw ValidationError("domain_a and domain_b must be distinct non-empty tags");
  }
  for (const auto& d : {domain_a, domain_b}) {
    if (d.find_first_of("/\\~ ") != std::string::npos) {
      throw ValidationError("domain tag '" + d + "' contains a reserved character");
    }
  }
}

std::uint64_t GenConfig::hash() const {
  nlohmann::json j = *this;
  return fnv1a(j.dump());
}

void to_json(nlohmann::json& j, const Range& r) { j = nlohmann::json::array({r.min, r.max}); }

void from_json(const nlohmann::json& j, Range& r) {
  if (!j.is_array() || j.size() != 2) throw ValidationError("range must be a [min, max] array");
  r.min = j.at(0).get<double>();
  r.max = j.at(1).get<double>();
}

void to_json(nlohmann::json& j, const StyleConfig& s) {
  j = {{"gamma", s.gamma},
       {"contrast", s.contrast},
       {"brightness_offset", s.brightness_offset},
       {"noise_sigma", s.noise_sigma},
       {"blur_sigma", s.blur_sigma},
       {"invert", s.invert}};
}

void from_json(const nlohmann::json& j, StyleConfig& s) {
  s = StyleConfig::identity();
  s.gamma = j.value("gamma", s.gamma);
  s.contrast = j.value("contrast", s.contrast);
  s.brightness_offset = j.value("brightness_offset", s.brightness_offset);
  s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
  s.blur_sigma = j.value("blur_sigma", s.blur_sigma);
  s.invert = j.value("invert", s.invert);
}

void to_json(nlohmann::json& j, const GenConfig& c) {
  j = {{"n_pos", c.n_pos},
       {"n_neg", c.n_neg},
       {"image_size", c.image_size},
       {"lesion_radius_range", c.lesion_radius_range},
       {"lesion_contrast_range", c.lesion_contrast_range},
       {"style_a", c.style_a},
       {"style_b", c.style_b},
       {"seed", c.seed},
       {"domain_a", c.domain_a},
       {"domain_b", c.domain_b}};
}

void from_json(const nlohmann::json& j, GenConfig& c) {
  c = GenConfig{};
  c.n_pos = j.value("n_pos", c.n_pos);
  c.n_neg = j.value("n_neg", c.n_neg);
  c.image_size = j.value("image_size", c.image_size);
  if (j.contains("lesion_radius_range")) c.lesion_radius_range = j.at("lesion_radius_range").get<Range>();
  if (j.contains("lesion_contrast_range")) c.lesion_contrast_range = j.at("lesion_contrast_range").get<Range>();
  if (j.contains("style_a")) c.style_a = j.at("style_a").get<StyleConfig>();
  if (j.contains("style_b")) c.style_b = j.at("style_b").get<StyleConfig>();
  c.seed = j.value("seed", c.seed);
  c.domain_a = j.value("domain_a", c.domain_a);
  c.domain_b = j.value("domain_b", c.domain_b);
}

Image render_content(const GenConfig& cfg, const std::string& domain, int index, Label label) {
  const int n = cfg.image_size;
  std::mt19937_64 rng(derive_seed(cfg.seed, {"content", domain, index}));
  const double scale = n / 64.0;

  const double base = uniform(rng, kBaseLo, kBaseHi);
  struct Wave { double fx, fy, phase, amp; };
  std::vector<Wave> waves(kWaves);
  for (auto& w : waves) {
    const double angle = uniform(rng, 0.0, 2.0 * kPi);
    const double freq = uniform(rng, 0.5, 2.0) * 2.0 * kPi / n;
    w = {freq * std::cos(angle), freq * std::sin(angle), uniform(rng, 0.0, 2.0 * kPi),
         uniform(rng, 0.3, 1.0) * kWaveAmp};
  }
  struct Bump { double cy, cx, sigma, amp; };
  std::vector<Bump> bumps(std::uniform_int_distribution<int>(0, kMaxBumps)(rng));
  for (auto& b : bumps) {
    b = {uniform(rng, 0.1 * n, 0.9 * n), uniform(rng, 0.1 * n, 0.9 * n),
         uniform(rng, kBumpSigmaLo, kBumpSigmaHi) * scale, uniform(rng, kBumpAmpLo, kBumpAmpHi)};
  }

  Image img(n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      double v = base;
      for (const auto& w : waves) v += w.amp * std::sin(w.fx * c + w.fy * r + w.phase);
      for (const auto& b : bumps) {
        const double d2 = (r - b.cy) * (r - b.cy) + (c - b.cx) * (c - b.cx);
        v += b.amp * std::exp(-0.5 * d2 / (b.sigma * b.sigma));
      }
      img.at(r, c) = static_cast<float>(v);
    }
  }

  if (label == Label::positive) {
    const double rx = uniform(rng, cfg.lesion_radius_range.min, cfg.lesion_radius_range.max) * scale;
    const double ry = uniform(rng, cfg.lesion_radius_range.min, cfg.lesion_radius_range.max) * scale;
    const double margin = std::max(rx, ry) + 2.0;
    const double cy = uniform(rng, std::min(margin, n / 2.0), std::max(n - margin, n / 2.0));
    const double cx = uniform(rng, std::min(margin, n / 2.0), std::max(n - margin, n / 2.0));
    const double theta = uniform(rng, 0.0, kPi);
    const double contrast =
        uniform(rng, cfg.lesion_contrast_range.min, cfg.lesion_contrast_range.max);
    // Irregular outline: radius modulated by low angular harmonics.
    double harm_amp[3], harm_phase[3];
    for (int k = 0; k < 3; ++k) {
      harm_amp[k] = uniform(rng, 0.0, 0.18);
      harm_phase[k] = uniform(rng, 0.0, 2.0 * kPi);
    }
    const double ct = std::cos(theta), st = std::sin(theta);
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        const double dy = r - cy, dx = c - cx;
        const double u = (dx * ct + dy * st) / rx;
        const double w = (-dx * st + dy * ct) / ry;
        const double rho = std::sqrt(u * u + w * w);
        const double phi = std::atan2(w, u);
        double boundary = 1.0;
        for (int k = 0; k < 3; ++k) boundary += harm_amp[k] * std::cos((k + 2) * phi + harm_phase[k]);
        const double profile = 1.0 / (1.0 + std::exp((rho / boundary - 1.0) / kEdgeSoftness));
        img.at(r, c) += static_cast<float>(contrast * profile);
      }
    }
  }
  for (float& p : img.pixels) p = std::clamp(p, 0.0f, 1.0f);
  return img;
}

DomainDataset generate_domain(const GenConfig& cfg, const std::string& domain,
                              const StyleConfig& style) {
  cfg.validate();
  const int total = cfg.n_pos + cfg.n_neg;
  std::vector<Label> labels(total, Label::negative);
  std::fill(labels.begin(), labels.begin() + cfg.n_pos, Label::positive);
  std::mt19937_64 rng(derive_seed(cfg.seed, {"labels", domain}));
  std::shuffle(labels.begin(), labels.end(), rng);

  DomainDataset ds;
  ds.domain = domain;
  ds.image_size = cfg.image_size;
  ds.samples.resize(total);
  for (int i = 0; i < total; ++i) {
    auto& s = ds.samples[i];
    s.id = sample_id(domain, i);
    s.label = labels[i];
    s.image = apply_style(render_content(cfg, domain, i, labels[i]), style,
                          derive_seed(cfg.seed, {"style", domain, i}));
    quantize(s.image);
  }
  return ds;
}

std::pair<DomainDataset, DomainDataset> generate_synthetic_pair(const GenConfig& cfg) {
  cfg.validate();
  return {generate_domain(cfg, cfg.domain_a, cfg.style_a),
          generate_domain(cfg, cfg.domain_b, cfg.style_b)};
}

}  // namespace uda::data
