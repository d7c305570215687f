#include "cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <optional>

#include "uda/common.hpp"
#include "uda/dataset_io.hpp"
#include "uda/experiment.hpp"
#include "uda/metrics.hpp"

namespace uda::cli {

namespace {

namespace fs = std::filesystem;
using experiment::ExperimentConfig;

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;

  ExperimentConfig load() const { return experiment::load_config(config, sets, seed); }
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  sub->add_option("--set", c.sets, "Override a config value, key=value (dotted keys, JSON values)");
  sub->add_option("--seed", c.seed, "Override global_seed");
}

fs::path default_data_root(const ExperimentConfig& cfg) {
  return cfg.data_dir ? *cfg.data_dir : cfg.output_dir / "datasets";
}

std::string label_counts(const data::DomainDataset& ds) {
  return std::to_string(ds.count(data::Label::positive)) + " pos / " +
         std::to_string(ds.count(data::Label::negative)) + " neg";
}

int gen_data(const Common& c, const std::string& out_opt, std::ostream& out) {
  ExperimentConfig cfg = c.load();
  cfg.data_dir.reset();
  const fs::path root = out_opt.empty() ? cfg.output_dir / "datasets" : fs::path(out_opt);
  const auto d = experiment::prepare_data(cfg);
  experiment::save_data(d, root, cfg.gen.hash());
  for (const auto* s : {&d.a, &d.b}) {
    out << s->train.domain << ": train " << label_counts(s->train) << ", test " << label_counts(s->test) << "\n";
  }
  out << "wrote " << root.string() << "\n";
  return kOk;
}

int train_translator(const Common& c, const std::string& data_opt, const std::string& out_opt, int run,
                     std::ostream& out) {
  const ExperimentConfig cfg = c.load();
  const fs::path root = data_opt.empty() ? default_data_root(cfg) : fs::path(data_opt);
  const auto a = data::load_dataset(root, cfg.gen.domain_a, data::Partition::train);
  const auto b = data::load_dataset(root, cfg.gen.domain_b, data::Partition::train);
  translator::TranslatorConfig tc = cfg.translator;
  tc.seed = experiment::translator_seed(cfg.global_seed, run);
  auto [model, log] = translator::train_translator(a, b, tc);
  const fs::path dir = out_opt.empty() ? cfg.output_dir / "checkpoints" / ("translator_run" + std::to_string(run))
                                       : fs::path(out_opt);
  translator::save_translator(model, dir);
  translator::write_train_log_csv(log, dir / "train_log.csv");
  if (!log.empty()) {
    out << "steps " << log.size() << ", cycle loss " << fixed(log.front().cyc_loss, 6) << " -> "
        << fixed(log.back().cyc_loss, 6) << "\n";
  }
  out << "wrote " << dir.string() << "\n";
  return kOk;
}

int translate(const Common& c, const std::string& model_dir, const std::string& data_opt, const std::string& domain,
              const std::string& partition, const std::string& out_opt, std::ostream& out) {
  const ExperimentConfig cfg = c.load();
  const auto model = translator::load_translator(model_dir);
  if (domain != model.domain_a && domain != model.domain_b) {
    throw ValidationError("domain '" + domain + "' is neither of the translator's domains (" + model.domain_a +
                          ", " + model.domain_b + ")");
  }
  const auto dir = domain == model.domain_a ? translator::Direction::a_to_b : translator::Direction::b_to_a;
  const fs::path root = data_opt.empty() ? default_data_root(cfg) : fs::path(data_opt);
  const auto part = data::parse_partition(partition);
  const auto src = data::load_dataset(root, domain, part);
  const auto syn = translator::translate_dataset(model, src, dir);
  const fs::path out_root = out_opt.empty() ? cfg.output_dir / "datasets" / "synthesized" : fs::path(out_opt);
  data::save_dataset(syn, out_root, part);
  out << "translated " << syn.samples.size() << " images into " << (out_root / syn.domain).string() << "\n";
  return kOk;
}

int train_classifier(const Common& c, const std::string& data_opt, const std::string& domain,
                     const std::string& arch_name, const std::string& synth_root, const std::string& synth_domain,
                     const std::string& out_opt, int run, std::ostream& out) {
  const ExperimentConfig cfg = c.load();
  const auto arch = classifier::parse_arch(arch_name);
  const fs::path root = data_opt.empty() ? default_data_root(cfg) : fs::path(data_opt);
  data::DomainDataset train = data::load_dataset(root, domain, data::Partition::train);
  metrics::Method method = metrics::Method::baseline;
  if (!synth_domain.empty()) {
    const fs::path sroot = synth_root.empty() ? cfg.output_dir / "datasets" / "synthesized" : fs::path(synth_root);
    const auto syn = data::load_dataset(sroot, synth_domain, data::Partition::train);
    train = classifier::mix_datasets(train, syn, cfg.mix_ratio);
    method = metrics::Method::uda;
  }
  classifier::TrainSpec spec = cfg.spec_for(arch);
  spec.seed = experiment::cell_seed(cfg.global_seed, domain, arch, method, run);
  const auto model = classifier::train_classifier(train, arch, spec);
  const fs::path dir = out_opt.empty() ? cfg.output_dir / "checkpoints" /
                                             ("classifier_" + domain + "_" + arch_name + "_" +
                                              metrics::method_name(method) + "_run" + std::to_string(run))
                                       : fs::path(out_opt);
  classifier::save_classifier(model, dir);
  out << "trained " << arch_name << " on " << train.samples.size() << " images (" << label_counts(train)
      << ")\nwrote " << dir.string() << "\n";
  return kOk;
}

int score(const Common& c, const std::string& model_dir, const std::string& data_opt, const std::string& domain,
          const std::string& partition, const std::string& out_opt, std::ostream& out) {
  const ExperimentConfig cfg = c.load();
  const auto model = classifier::load_classifier(model_dir);
  const fs::path root = data_opt.empty() ? default_data_root(cfg) : fs::path(data_opt);
  const auto ds = data::load_dataset(root, domain, data::parse_partition(partition));
  const auto scored = classifier::predict_scores(model, ds);
  if (!out_opt.empty()) classifier::write_scores_csv(scored, out_opt);
  out << "auROC " << fixed9(metrics::roc_auc(scored)) << " on " << ds.samples.size() << " images\n";
  return kOk;
}

int report(const Common& c, const std::string& dir_opt, std::ostream& out) {
  const ExperimentConfig cfg = c.load();
  const fs::path dir = dir_opt.empty() ? cfg.output_dir : fs::path(dir_opt);
  std::ifstream in(dir / "report.json");
  if (!in) throw IoError("cannot open " + (dir / "report.json").string());
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw IoError((dir / "report.json").string() + " is not valid JSON");
  const auto rep = metrics::report_from_json(j);
  const auto table = metrics::build_table(rep);
  experiment::write_report(rep, dir);
  out << table.text;
  return kOk;
}

int run_matrix(const Common& c, std::ostream& out, std::ostream& err) {
  const ExperimentConfig cfg = c.load();
  const auto result = experiment::run_matrix(cfg);
  if (!result.report.metadata.complete) {
    err << "run-matrix: " << result.report.metadata.failures.size() << " cell(s) failed\n";
    for (const auto& f : result.report.metadata.failures) {
      err << "  (" << f.train_set << "," << f.test_set << "," << f.arch << "," << metrics::method_name(f.method)
          << "): " << f.message << "\n";
    }
    err << "partial report written to " << result.artifacts.report_json.string() << "\n";
    return kRuntime;
  }
  out << metrics::build_table(result.report).text;
  out << "wrote " << cfg.output_dir.string() << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Unsupervised domain adaptation study: Cycle-GAN translation + classifier training", "uda"};
  app.require_subcommand(1);

  Common common;
  std::string data_dir, out_path, model_dir, domain, arch = "mini_alexnet";
  std::string translate_partition = "train", score_partition = "test";
  std::string synth_root, synth_domain;
  int run_index = 0;

  auto* gen = app.add_subcommand("gen-data", "Generate, split and save the two synthetic domains");
  add_common(gen, common);
  gen->add_option("--out", out_path, "Dataset root (default <output_dir>/datasets)");

  auto* ttr = app.add_subcommand("train-translator", "Train the Cycle-GAN on both train splits");
  add_common(ttr, common);
  ttr->add_option("--data", data_dir, "Dataset root");
  ttr->add_option("--out", out_path, "Checkpoint directory");
  ttr->add_option("--run", run_index, "Run index used for seeding")->check(CLI::NonNegativeNumber);

  auto* tra = app.add_subcommand("translate", "Translate a saved dataset into the other domain's style");
  add_common(tra, common);
  tra->add_option("--translator", model_dir, "Translator checkpoint directory")->required();
  tra->add_option("--data", data_dir, "Dataset root");
  tra->add_option("--domain", domain, "Source domain name")->required();
  tra->add_option("--partition", translate_partition, "train or test (default train)");
  tra->add_option("--out", out_path, "Output dataset root (default <output_dir>/datasets/synthesized)");

  auto* tcl = app.add_subcommand("train-classifier", "Train a classifier (baseline, or UDA with --synth-domain)");
  add_common(tcl, common);
  tcl->add_option("--data", data_dir, "Dataset root");
  tcl->add_option("--domain", domain, "Training domain")->required();
  tcl->add_option("--arch", arch, "mini_alexnet or mini_resnet");
  tcl->add_option("--synth-data", synth_root, "Root holding translated datasets");
  tcl->add_option("--synth-domain", synth_domain, "Translated dataset to mix in, e.g. A_to_B");
  tcl->add_option("--out", out_path, "Checkpoint directory");
  tcl->add_option("--run", run_index, "Run index used for seeding")->check(CLI::NonNegativeNumber);

  auto* sco = app.add_subcommand("score", "Score a dataset with a trained classifier");
  add_common(sco, common);
  sco->add_option("--model", model_dir, "Classifier checkpoint directory")->required();
  sco->add_option("--data", data_dir, "Dataset root");
  sco->add_option("--domain", domain, "Domain to score")->required();
  sco->add_option("--partition", score_partition, "train or test (default test)");
  sco->add_option("--out", out_path, "Scores CSV path");

  auto* rep = app.add_subcommand("report", "Re-render report.csv and table.txt from report.json");
  add_common(rep, common);
  rep->add_option("--dir", out_path, "Experiment output directory");

  auto* mat = app.add_subcommand("run-matrix", "Run the full baseline/UDA matrix and write the report");
  add_common(mat, common);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kValidation;
  }

  try {
    if (gen->parsed()) return gen_data(common, out_path, out);
    if (ttr->parsed()) return train_translator(common, data_dir, out_path, run_index, out);
    if (tra->parsed()) return translate(common, model_dir, data_dir, domain, translate_partition, out_path, out);
    if (tcl->parsed()) {
      return train_classifier(common, data_dir, domain, arch, synth_root, synth_domain, out_path, run_index, out);
    }
    if (sco->parsed()) return score(common, model_dir, data_dir, domain, score_partition, out_path, out);
    if (rep->parsed()) return report(common, out_path, out);
    if (mat->parsed()) return run_matrix(common, out, err);
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const TrainingError& e) {
    err << "training failure in " << e.component() << " at step " << e.step() << ": " << e.what() << "\n";
    return kRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kValidation;
}

}  // namespace uda::cli
