#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <functional>
#include <thread>

#include "uda/common.hpp"
#include "uda/dataset_io.hpp"
#include "uda/experiment.hpp"
#include "uda/metrics.hpp"
#include "uda/split.hpp"

namespace uda::experiment {

using nlohmann::json;
using classifier::Arch;
using metrics::Method;

DataPair prepare_data(const ExperimentConfig& cfg) {
  if (cfg.data_dir) return load_data(*cfg.data_dir, cfg.gen.domain_a, cfg.gen.domain_b);
  auto [a, b] = data::generate_synthetic_pair(cfg.gen);
  const std::uint64_t split_seed = derive_seed(cfg.global_seed, {"split"});
  auto [atr, ate] = data::split_dataset(a, cfg.train_fraction, split_seed);
  auto [btr, bte] = data::split_dataset(b, cfg.train_fraction, split_seed);
  return {{std::move(atr), std::move(ate)}, {std::move(btr), std::move(bte)}};
}

void save_data(const DataPair& d, const fs::path& root, std::optional<std::uint64_t> generator_hash) {
  data::save_dataset(d.a.train, root, data::Partition::train, generator_hash);
  data::save_dataset(d.a.test, root, data::Partition::test, generator_hash);
  data::save_dataset(d.b.train, root, data::Partition::train, generator_hash);
  data::save_dataset(d.b.test, root, data::Partition::test, generator_hash);
}

DataPair load_data(const fs::path& root, const std::string& domain_a, const std::string& domain_b) {
  return {{data::load_dataset(root, domain_a, data::Partition::train), data::load_dataset(root, domain_a, data::Partition::test)},
          {data::load_dataset(root, domain_b, data::Partition::train), data::load_dataset(root, domain_b, data::Partition::test)}};
}

CellOutcome run_baseline(const DomainSplit& source, const DomainSplit& target, Arch arch,
                         const classifier::TrainSpec& spec) {
  CellOutcome out{classifier::train_classifier(source.train, arch, spec), {}, {}};
  out.same = classifier::predict_scores(out.model, source.test);
  out.cross = classifier::predict_scores(out.model, target.test);
  return out;
}

CellOutcome run_uda(const DomainSplit& source, const DomainSplit& target, Arch arch,
                    const translator::TranslatorModel& translator, translator::Direction direction,
                    const classifier::TrainSpec& spec, double mix_ratio) {
  return run_uda(source, target, arch, translator::translate_dataset(translator, source.train, direction), spec,
                 mix_ratio);
}

CellOutcome run_uda(const DomainSplit& source, const DomainSplit& target, Arch arch,
                    const data::DomainDataset& synthesized, const classifier::TrainSpec& spec, double mix_ratio) {
  const auto mixed = classifier::mix_datasets(source.train, synthesized, mix_ratio);
  CellOutcome out{classifier::train_classifier(mixed, arch, spec), {}, {}};
  out.same = classifier::predict_scores(out.model, source.test);
  out.cross = classifier::predict_scores(out.model, target.test);
  return out;
}

CellOutcome run_uda(const DomainSplit& source, const DomainSplit& target, Arch arch,
                    const translator::TranslatorConfig& translator_cfg, const classifier::TrainSpec& spec,
                    double mix_ratio) {
  auto trained = translator::train_translator(source.train, target.train, translator_cfg);
  return run_uda(source, target, arch, trained.first, translator::Direction::a_to_b, spec, mix_ratio);
}

std::uint64_t translator_seed(std::uint64_t global_seed, int run) {
  return derive_seed(global_seed, {"translator", run});
}

std::uint64_t cell_seed(std::uint64_t global_seed, const std::string& source_domain, Arch arch, Method method,
                        int run) {
  return derive_seed(global_seed, {source_domain, classifier::arch_name(arch), metrics::method_name(method), run});
}

namespace {

// Runs fn(0..n-1) on up to `jobs` threads. Each index is independent.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < std::min(jobs, n); ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string failure_text(const std::exception& e) {
  if (const auto* t = dynamic_cast<const TrainingError*>(&e)) {
    return std::string("training failure: ") + t->what();
  }
  return e.what();
}

struct TranslatorSlot {
  std::optional<translator::TranslatorModel> model;
  data::DomainDataset synth_ab, synth_ba;  // a.train -> b style, b.train -> a style
  std::string error;
};

struct Task {
  bool source_is_a;
  Arch arch;
  Method method;
  int run;
  // filled in by the worker
  double auc_same = 0, auc_cross = 0;
  double half_same = 0, half_cross = 0;  // bootstrap half-widths
  std::string error;
  std::vector<fs::path> written;
};

}  // namespace

void write_report(const metrics::ExperimentReport& report, const fs::path& dir) {
  fs::create_directories(dir);
  write_text(dir / "report.json", metrics::report_to_json(report).dump(2) + "\n");
  if (report.metadata.complete) {
    const auto table = metrics::build_table(report);
    write_text(dir / "report.csv", table.csv);
    write_text(dir / "table.txt", table.text);
  }
}

MatrixResult run_matrix(const ExperimentConfig& cfg) {
  cfg.validate();
  const fs::path out = cfg.output_dir;
  fs::create_directories(out / "checkpoints");
  fs::create_directories(out / "scores");

  MatrixResult result;
  RunArtifacts& art = result.artifacts;

  const DataPair data = prepare_data(cfg);
  if (cfg.data_dir) {
    art.datasets = *cfg.data_dir;
  } else {
    art.datasets = out / "datasets";
    save_data(data, art.datasets, cfg.gen.hash());
  }
  const std::string& name_a = data.a.train.domain;
  const std::string& name_b = data.b.train.domain;

  std::vector<TranslatorSlot> translators(static_cast<std::size_t>(cfg.n_runs));
  parallel_for(cfg.n_runs, cfg.jobs, [&](int r) {
    auto& slot = translators[static_cast<std::size_t>(r)];
    try {
      translator::TranslatorConfig tc = cfg.translator;
      tc.seed = translator_seed(cfg.global_seed, r);
      auto [model, log] = translator::train_translator(data.a.train, data.b.train, tc);
      const fs::path dir = out / "checkpoints" / ("translator_run" + std::to_string(r));
      translator::save_translator(model, dir);
      translator::write_train_log_csv(log, dir / "train_log.csv");
      slot.synth_ab = translator::translate_dataset(model, data.a.train, translator::Direction::a_to_b);
      slot.synth_ba = translator::translate_dataset(model, data.b.train, translator::Direction::b_to_a);
      const fs::path synth_root = out / "datasets" / "synthesized" / ("run" + std::to_string(r));
      data::save_dataset(slot.synth_ab, synth_root, data::Partition::train);
      data::save_dataset(slot.synth_ba, synth_root, data::Partition::train);
      slot.model = std::move(model);
    } catch (const std::exception& e) {
      slot.error = "translator run " + std::to_string(r) + ": " + failure_text(e);
    }
  });
  for (int r = 0; r < cfg.n_runs; ++r) {
    if (translators[static_cast<std::size_t>(r)].model) {
      art.translator_checkpoints.push_back(out / "checkpoints" / ("translator_run" + std::to_string(r)));
    }
  }

  std::vector<Task> tasks;
  for (bool source_is_a : {true, false}) {
    for (Arch arch : cfg.archs) {
      for (Method method : {Method::baseline, Method::uda}) {
        for (int r = 0; r < cfg.n_runs; ++r) tasks.push_back(Task{source_is_a, arch, method, r, 0, 0, 0, 0, {}, {}});
      }
    }
  }

  parallel_for(static_cast<int>(tasks.size()), cfg.jobs, [&](int i) {
    Task& t = tasks[static_cast<std::size_t>(i)];
    const DomainSplit& source = t.source_is_a ? data.a : data.b;
    const DomainSplit& target = t.source_is_a ? data.b : data.a;
    const std::string tag = source.train.domain + "_" + classifier::arch_name(t.arch) + "_" +
                            metrics::method_name(t.method) + "_run" + std::to_string(t.run);
    try {
      classifier::TrainSpec spec = cfg.spec_for(t.arch);
      spec.seed = cell_seed(cfg.global_seed, source.train.domain, t.arch, t.method, t.run);
      CellOutcome cell;
      if (t.method == Method::baseline) {
        cell = run_baseline(source, target, t.arch, spec);
      } else {
        const auto& slot = translators[static_cast<std::size_t>(t.run)];
        if (!slot.model) throw TrainingError(slot.error, -1, "translator");
        cell = run_uda(source, target, t.arch, t.source_is_a ? slot.synth_ab : slot.synth_ba, spec, cfg.mix_ratio);
      }
      const fs::path ckpt = out / "checkpoints" / ("classifier_" + tag);
      classifier::save_classifier(cell.model, ckpt);
      const fs::path s_same = out / "scores" / ("train-" + tag + "_test-" + source.test.domain + ".csv");
      const fs::path s_cross = out / "scores" / ("train-" + tag + "_test-" + target.test.domain + ".csv");
      classifier::write_scores_csv(cell.same, s_same);
      classifier::write_scores_csv(cell.cross, s_cross);
      t.written = {ckpt, s_same, s_cross};
      t.auc_same = metrics::roc_auc(cell.same);
      t.auc_cross = metrics::roc_auc(cell.cross);
      if (cfg.ci_mode == metrics::CiMode::bootstrap) {
        const auto bs = metrics::bootstrap_auc_ci(cell.same, cfg.n_boot, derive_seed(spec.seed, {"ci", "same"}));
        const auto bc = metrics::bootstrap_auc_ci(cell.cross, cfg.n_boot, derive_seed(spec.seed, {"ci", "cross"}));
        t.half_same = 0.5 * (bs.hi - bs.lo);
        t.half_cross = 0.5 * (bc.hi - bc.lo);
      }
    } catch (const std::exception& e) {
      t.error = tag + ": " + failure_text(e);
    }
  });

  metrics::ExperimentReport& report = result.report;
  report.metadata.global_seed = cfg.global_seed;
  report.metadata.config_hash = cfg.hash();
  report.metadata.ci_mode = cfg.ci_mode;
  report.metadata.domains = {name_a, name_b};
  for (Arch a : cfg.archs) report.metadata.archs.push_back(classifier::arch_name(a));

  // Tasks are grouped by (direction, arch, method) with n_runs consecutive entries.
  for (std::size_t g = 0; g < tasks.size(); g += static_cast<std::size_t>(cfg.n_runs)) {
    const Task& first = tasks[g];
    const std::string train = first.source_is_a ? name_a : name_b;
    const std::string other = first.source_is_a ? name_b : name_a;
    const std::string arch = classifier::arch_name(first.arch);
    std::string error;
    std::vector<double> same, cross, hs, hc;
    for (int r = 0; r < cfg.n_runs; ++r) {
      const Task& t = tasks[g + static_cast<std::size_t>(r)];
      for (const auto& p : t.written) {
        (p.extension() == ".csv" ? art.scores : art.classifier_checkpoints).push_back(p);
      }
      if (!t.error.empty()) {
        error += (error.empty() ? "" : "; ") + t.error;
        continue;
      }
      same.push_back(t.auc_same);
      cross.push_back(t.auc_cross);
      hs.push_back(t.half_same);
      hc.push_back(t.half_cross);
    }
    if (!error.empty()) {
      report.metadata.complete = false;
      for (const auto& test : {other, train}) report.metadata.failures.push_back({train, test, arch, first.method, error});
      continue;
    }
    auto halfwidth = [&](const std::vector<double>& aucs, const std::vector<double>& boot) {
      if (cfg.ci_mode == metrics::CiMode::multi_run) return metrics::multi_run_ci(aucs).halfwidth;
      double s = 0.0;
      for (double h : boot) s += h;
      return s / static_cast<double>(boot.size());
    };
    report.cells.push_back(metrics::make_cell(train, other, arch, first.method, cross, halfwidth(cross, hc)));
    report.cells.push_back(metrics::make_cell(train, train, arch, first.method, same, halfwidth(same, hs)));
  }

  write_report(report, out);
  art.report_json = out / "report.json";
  if (report.metadata.complete) {
    art.report_csv = out / "report.csv";
    art.table_txt = out / "table.txt";
  }
  art.manifest = out / "manifest.json";

  auto rel = [&](const fs::path& p) { return p.lexically_relative(out).generic_string(); };
  json paths = json::object();
  paths["datasets"] = cfg.data_dir ? art.datasets.string() : rel(art.datasets);
  for (const auto& [key, list] : {std::pair{"translator_checkpoints", &art.translator_checkpoints},
                                  std::pair{"classifier_checkpoints", &art.classifier_checkpoints},
                                  std::pair{"scores", &art.scores}}) {
    paths[key] = json::array();
    for (const auto& p : *list) paths[key].push_back(rel(p));
  }
  paths["report_json"] = "report.json";
  if (report.metadata.complete) {
    paths["report_csv"] = "report.csv";
    paths["table_txt"] = "table.txt";
  }
  json errors = json::array();
  for (const auto& s : translators) {
    if (!s.error.empty()) errors.push_back(s.error);
  }
  const json manifest = {{"format_version", kConfigFormatVersion},
                         {"created_utc", utc_timestamp()},
                         {"config", config_to_json(cfg)},
                         {"config_hash", cfg.hash()},
                         {"complete", report.metadata.complete},
                         {"translator_errors", errors},
                         {"artifacts", paths}};
  write_text(art.manifest, manifest.dump(2) + "\n");
  return result;
}

}  // namespace uda::experiment
