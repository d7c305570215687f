#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uda/classifier.hpp"
#include "uda/report.hpp"
#include "uda/synthetic.hpp"
#include "uda/translator.hpp"

namespace uda::experiment {

namespace fs = std::filesystem;

inline constexpr const char* kConfigFormatVersion = "1";

struct ExperimentConfig {
  data::GenConfig gen;
  translator::TranslatorConfig translator;
  std::map<classifier::Arch, classifier::TrainSpec> classifier;  // one spec per arch
  std::vector<classifier::Arch> archs{classifier::Arch::mini_alexnet, classifier::Arch::mini_resnet};
  int n_runs = 3;
  metrics::CiMode ci_mode = metrics::CiMode::multi_run;
  int n_boot = 1000;
  double train_fraction = 0.8;
  double mix_ratio = 1.0;
  fs::path output_dir = "uda_out";
  std::optional<fs::path> data_dir;  // load saved splits instead of generating
  int jobs = 1;
  std::uint64_t global_seed = 2024;

  ExperimentConfig();
  void validate() const;
  const classifier::TrainSpec& spec_for(classifier::Arch a) const;
  /// Hash of everything that affects results (paths and jobs excluded).
  std::string hash() const;
};

nlohmann::json config_to_json(const ExperimentConfig& c);
ExperimentConfig config_from_json(const nlohmann::json& j);

/// Applies "a.b.c=value" to a JSON document. The value is parsed as JSON when
/// possible and kept as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

ExperimentConfig load_config(const fs::path& path, const std::vector<std::string>& overrides = {},
                             std::optional<std::uint64_t> seed = std::nullopt);

struct DomainSplit {
  data::DomainDataset train;
  data::DomainDataset test;
};

struct DataPair {
  DomainSplit a;
  DomainSplit b;
};

/// Generates (or loads from cfg.data_dir) both domains and splits them.
DataPair prepare_data(const ExperimentConfig& cfg);
void save_data(const DataPair& data, const fs::path& root, std::optional<std::uint64_t> generator_hash);
DataPair load_data(const fs::path& root, const std::string& domain_a, const std::string& domain_b);

struct CellOutcome {
  classifier::ClassifierModel model;
  classifier::ScoredSet same;   // scored on source test
  classifier::ScoredSet cross;  // scored on target test
};

/// Train on source.train only; score on both test sets.
CellOutcome run_baseline(const DomainSplit& source, const DomainSplit& target, classifier::Arch arch,
                         const classifier::TrainSpec& spec);

/// Mix source.train with its translations, train, score.
CellOutcome run_uda(const DomainSplit& source, const DomainSplit& target, classifier::Arch arch,
                    const data::DomainDataset& synthesized, const classifier::TrainSpec& spec,
                    double mix_ratio = 1.0);

/// Translate source.train with a trained model, then as above.
CellOutcome run_uda(const DomainSplit& source, const DomainSplit& target, classifier::Arch arch,
                    const translator::TranslatorModel& translator, translator::Direction direction,
                    const classifier::TrainSpec& spec, double mix_ratio = 1.0);

/// Full pipeline including translator training on the two train splits.
CellOutcome run_uda(const DomainSplit& source, const DomainSplit& target, classifier::Arch arch,
                    const translator::TranslatorConfig& translator_cfg, const classifier::TrainSpec& spec,
                    double mix_ratio = 1.0);

std::uint64_t translator_seed(std::uint64_t global_seed, int run);
std::uint64_t cell_seed(std::uint64_t global_seed, const std::string& source_domain, classifier::Arch arch,
                        metrics::Method method, int run);

struct RunArtifacts {
  fs::path datasets;
  std::vector<fs::path> translator_checkpoints;
  std::vector<fs::path> classifier_checkpoints;
  std::vector<fs::path> scores;
  fs::path report_json, report_csv, table_txt, manifest;
};

struct MatrixResult {
  metrics::ExperimentReport report;
  RunArtifacts artifacts;
};

/// Both directions x archs x methods x runs. Failed cells are recorded in the
/// report metadata and the rest continue. Writes everything under output_dir.
MatrixResult run_matrix(const ExperimentConfig& cfg);

/// Writes report.json, report.csv and table.txt (the latter two only when complete).
void write_report(const metrics::ExperimentReport& report, const fs::path& dir);

}  // namespace uda::experiment
