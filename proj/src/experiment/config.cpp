#include <fstream>
#include <sstream>

#include "uda/common.hpp"
#include "uda/experiment.hpp"

namespace uda::experiment {

using nlohmann::json;
using classifier::Arch;

ExperimentConfig::ExperimentConfig() {
  classifier::TrainSpec alex;
  alex.epochs = 30;  // the plain stack needs longer to settle on mixed data
  classifier[Arch::mini_alexnet] = alex;
  classifier[Arch::mini_resnet] = classifier::TrainSpec{};
}

void ExperimentConfig::validate() const {
  gen.validate();
  translator.validate();
  if (archs.empty()) throw ValidationError("archs: must list at least one architecture");
  for (std::size_t i = 0; i < archs.size(); ++i) {
    for (std::size_t k = 0; k < i; ++k) {
      if (archs[i] == archs[k]) throw ValidationError(std::string("archs: duplicate ") + classifier::arch_name(archs[i]));
    }
    spec_for(archs[i]).validate();
  }
  if (n_runs < 1) throw ValidationError("n_runs must be >= 1, got " + std::to_string(n_runs));
  if (ci_mode == metrics::CiMode::multi_run && n_runs < 2) {
    throw ValidationError("ci_mode multi_run needs n_runs >= 2 (use ci_mode bootstrap for a single run)");
  }
  if (ci_mode == metrics::CiMode::bootstrap && n_boot < 100) throw ValidationError("n_boot must be >= 100");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ValidationError("train_fraction must lie in (0,1)");
  if (!(mix_ratio >= 0.0 && mix_ratio <= 1.0)) throw ValidationError("mix_ratio must lie in [0,1]");
  if (jobs < 1) throw ValidationError("jobs must be >= 1");
  if (output_dir.empty()) throw ValidationError("output_dir must be set");
  if (gen.image_size % 8 != 0) throw ValidationError("gen.image_size must be a multiple of 8");
}

const classifier::TrainSpec& ExperimentConfig::spec_for(Arch a) const {
  auto it = classifier.find(a);
  if (it == classifier.end()) throw ValidationError(std::string("classifier: no spec for ") + classifier::arch_name(a));
  return it->second;
}

std::string ExperimentConfig::hash() const {
  json j = config_to_json(*this);
  j.erase("output_dir");
  j.erase("data_dir");
  j.erase("jobs");
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

json config_to_json(const ExperimentConfig& c) {
  json specs = json::object();
  for (const auto& [arch, spec] : c.classifier) specs[classifier::arch_name(arch)] = spec;
  json archs = json::array();
  for (Arch a : c.archs) archs.push_back(classifier::arch_name(a));
  return {{"format_version", kConfigFormatVersion},
          {"global_seed", c.global_seed},
          {"n_runs", c.n_runs},
          {"ci_mode", metrics::ci_mode_name(c.ci_mode)},
          {"n_boot", c.n_boot},
          {"archs", archs},
          {"train_fraction", c.train_fraction},
          {"mix_ratio", c.mix_ratio},
          {"output_dir", c.output_dir.string()},
          {"data_dir", c.data_dir ? json(c.data_dir->string()) : json(nullptr)},
          {"jobs", c.jobs},
          {"gen", c.gen},
          {"translator", c.translator},
          {"classifier", specs}};
}

namespace {

// Every key in `doc` must also appear in the canonical default document.
void check_known_keys(const json& doc, const json& known, const std::string& prefix) {
  if (!doc.is_object() || !known.is_object()) return;
  for (const auto& [key, value] : doc.items()) {
    auto it = known.find(key);
    if (it == known.end()) throw ValidationError("unknown config key '" + prefix + key + "'");
    check_known_keys(value, *it, prefix + key + ".");
  }
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  check_known_keys(j, config_to_json(ExperimentConfig{}), "");
  if (j.value("format_version", std::string(kConfigFormatVersion)) != kConfigFormatVersion) {
    throw ValidationError("unsupported config format_version '" + j.at("format_version").dump() + "'");
  }
  try {
    ExperimentConfig c;
    c.global_seed = j.value("global_seed", c.global_seed);
    c.n_runs = j.value("n_runs", c.n_runs);
    if (j.contains("ci_mode")) c.ci_mode = metrics::parse_ci_mode(j.at("ci_mode").get<std::string>());
    c.n_boot = j.value("n_boot", c.n_boot);
    if (j.contains("archs")) {
      c.archs.clear();
      for (const auto& a : j.at("archs")) c.archs.push_back(classifier::parse_arch(a.get<std::string>()));
    }
    c.train_fraction = j.value("train_fraction", c.train_fraction);
    c.mix_ratio = j.value("mix_ratio", c.mix_ratio);
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("data_dir") && !j.at("data_dir").is_null()) c.data_dir = j.at("data_dir").get<std::string>();
    c.jobs = j.value("jobs", c.jobs);
    if (j.contains("gen")) {
      // Start from the experiment defaults, not the bare generator defaults.
      json g = c.gen;
      g.update(j.at("gen"));
      c.gen = g.get<data::GenConfig>();
    }
    if (j.contains("translator")) {
      json t = c.translator;
      t.update(j.at("translator"));
      c.translator = t.get<translator::TranslatorConfig>();
    }
    if (j.contains("classifier")) {
      for (const auto& [name, spec] : j.at("classifier").items()) {
        const Arch a = classifier::parse_arch(name);
        json s = c.classifier[a];
        s.update(spec);
        c.classifier[a] = s.get<classifier::TrainSpec>();
      }
    }
    return c;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ValidationError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  json* node = &doc;
  std::stringstream path(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(path, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object()) throw ValidationError("--set " + key + ": '" + parts[i] + "' is not an object");
    node = &(*node)[parts[i]];
    if (node->is_null()) *node = json::object();
  }
  if (!node->is_object()) throw ValidationError("--set " + key + ": parent is not an object");
  (*node)[parts.back()] = value;
}

ExperimentConfig load_config(const fs::path& path, const std::vector<std::string>& overrides,
                             std::optional<std::uint64_t> seed) {
  json doc = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ValidationError("config " + path.string() + " is not valid JSON");
  }
  for (const auto& o : overrides) apply_override(doc, o);
  if (seed) doc["global_seed"] = *seed;
  ExperimentConfig cfg = config_from_json(doc);
  cfg.validate();
  return cfg;
}

}  // namespace uda::experiment
