#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "cli.hpp"
#include "test_support.hpp"
#include "uda/experiment.hpp"

using namespace uda;
using namespace uda::experiment;
using classifier::Arch;
using metrics::Method;
using nlohmann::json;

namespace {

ExperimentConfig tiny_config(const std::filesystem::path& out) {
  ExperimentConfig c;
  c.gen = testing::small_gen(12, 16);
  c.translator.steps = 6;
  c.translator.base_channels = 4;
  c.translator.n_residual_blocks = 1;
  c.translator.image_pool_size = 4;
  for (Arch a : {Arch::mini_alexnet, Arch::mini_resnet}) {
    auto& s = c.classifier[a];
    s.epochs = 2;
    s.width = 4;
    s.batch_size = 8;
  }
  c.n_runs = 2;
  c.output_dir = out;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path write_config(const ExperimentConfig& c, const std::filesystem::path& path) {
  std::ofstream(path) << config_to_json(c).dump(2);
  return path;
}

int run_cli(const std::vector<std::string>& args, std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (err_text) *err_text = err.str();
  return code;
}

}  // namespace

TEST_CASE("config JSON round trip and hash") {
  ExperimentConfig c;
  c.n_runs = 5;
  c.archs = {Arch::mini_resnet};
  c.ci_mode = metrics::CiMode::bootstrap;
  c.data_dir = "somewhere";
  const auto back = config_from_json(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));
  CHECK(back.hash() == c.hash());

  auto moved = c;
  moved.output_dir = "elsewhere";
  moved.jobs = 4;
  moved.data_dir.reset();
  CHECK(moved.hash() == c.hash());
  moved.global_seed = 1;
  CHECK(moved.hash() != c.hash());
}

TEST_CASE("overrides and unknown keys") {
  json doc = config_to_json(ExperimentConfig{});
  apply_override(doc, "translator.steps=12");
  apply_override(doc, "gen.style_b.gamma=0.7");
  apply_override(doc, "output_dir=out dir");
  apply_override(doc, "archs=[\"mini_resnet\"]");
  const auto c = config_from_json(doc);
  CHECK(c.translator.steps == 12);
  CHECK(c.gen.style_b.gamma == 0.7);
  CHECK(c.output_dir == "out dir");
  CHECK(c.archs == std::vector<Arch>{Arch::mini_resnet});
  CHECK_THROWS_AS(apply_override(doc, "no_equals_sign"), ValidationError);

  json bad = config_to_json(ExperimentConfig{});
  bad["translator"]["stpes"] = 3;
  CHECK_THROWS_WITH_AS(config_from_json(bad), doctest::Contains("stpes"), ValidationError);
  bad = config_to_json(ExperimentConfig{});
  bad["format_version"] = "2";
  CHECK_THROWS_AS(config_from_json(bad), ValidationError);

  // Partial documents fall back to defaults.
  const auto partial = config_from_json(json{{"format_version", "1"}, {"n_runs", 4}});
  CHECK(partial.n_runs == 4);
  CHECK(partial.translator == ExperimentConfig{}.translator);
}

TEST_CASE("load_config applies file, overrides and seed") {
  testing::TempDir dir;
  ExperimentConfig c;
  c.n_runs = 4;
  const auto path = write_config(c, dir.path() / "c.json");
  const auto loaded = load_config(path, {"n_runs=6"}, 99);
  CHECK(loaded.n_runs == 6);
  CHECK(loaded.global_seed == 99);
  CHECK_THROWS_WITH_AS(load_config(path, {"n_runs=0"}), doctest::Contains("n_runs"), ValidationError);
  CHECK_THROWS_AS(load_config(dir.path() / "missing.json"), IoError);
}

TEST_CASE("config validation") {
  ExperimentConfig c;
  c.n_runs = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c.n_runs = 1;
  CHECK_THROWS_AS(c.validate(), ValidationError);  // multi_run needs two runs
  c.ci_mode = metrics::CiMode::bootstrap;
  c.validate();
  c.n_boot = 10;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = ExperimentConfig{};
  c.archs.clear();
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = ExperimentConfig{};
  c.gen.image_size = 20;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("seed derivation is pure and cell-specific") {
  CHECK(cell_seed(1, "A", Arch::mini_alexnet, Method::uda, 0) ==
        cell_seed(1, "A", Arch::mini_alexnet, Method::uda, 0));
  std::set<std::uint64_t> seeds;
  for (const char* d : {"A", "B"}) {
    for (Arch a : {Arch::mini_alexnet, Arch::mini_resnet}) {
      for (Method m : {Method::baseline, Method::uda}) {
        for (int r = 0; r < 3; ++r) seeds.insert(cell_seed(1, d, a, m, r));
      }
    }
  }
  CHECK(seeds.size() == 24);
  CHECK(translator_seed(1, 0) != translator_seed(1, 1));
  CHECK(translator_seed(1, 0) != translator_seed(2, 0));
}

TEST_CASE("prepare_data splits both domains 80/20 per class") {
  testing::TempDir dir;
  auto cfg = tiny_config(dir.path());
  cfg.gen.n_pos = 250;
  cfg.gen.n_neg = 250;
  const auto d = prepare_data(cfg);
  CHECK(d.a.train.size() == 400);
  CHECK(d.a.test.size() == 100);
  CHECK(d.b.train.count(data::Label::positive) == 200);
  CHECK(d.b.test.count(data::Label::negative) == 50);
}

TEST_CASE("training never reads the test split") {
  testing::TempDir dir;
  const auto cfg = tiny_config(dir.path());
  const auto d = prepare_data(cfg);
  auto swapped_a = d.a;
  auto swapped_b = d.b;
  for (auto* split : {&swapped_a, &swapped_b}) {
    for (auto& s : split->test.samples) {
      for (float& p : s.image.pixels) p = data::quantize(1.0f - p);
    }
  }
  const auto& spec = cfg.spec_for(Arch::mini_alexnet);
  const auto base = run_baseline(d.a, d.b, Arch::mini_alexnet, spec);
  const auto base_swapped = run_baseline(swapped_a, swapped_b, Arch::mini_alexnet, spec);
  CHECK(base.model.parameters_equal(base_swapped.model));
  CHECK(base.same.rows.size() == d.a.test.size());
  CHECK(base.cross.rows.size() == d.b.test.size());

  const auto uda = run_uda(d.a, d.b, Arch::mini_alexnet, cfg.translator, spec);
  const auto uda_swapped = run_uda(swapped_a, swapped_b, Arch::mini_alexnet, cfg.translator, spec);
  CHECK(uda.model.parameters_equal(uda_swapped.model));
  CHECK(uda.cross.test_domain == "B");
}

TEST_CASE("zero-step translator still completes a UDA cell") {
  testing::TempDir dir;
  auto cfg = tiny_config(dir.path());
  cfg.translator.steps = 0;
  const auto d = prepare_data(cfg);
  const auto out = run_uda(d.b, d.a, Arch::mini_resnet, cfg.translator, cfg.spec_for(Arch::mini_resnet));
  CHECK(out.same.rows.size() == d.b.test.size());
  CHECK(out.cross.rows.size() == d.a.test.size());
}

TEST_CASE("run_matrix produces a complete, reproducible report") {
  testing::TempDir dir;
  const auto cfg = tiny_config(dir.path() / "one");
  const auto result = run_matrix(cfg);
  const auto& report = result.report;
  CHECK(report.metadata.complete);
  CHECK(report.cells.size() == 16);
  for (const auto& c : report.cells) CHECK(c.per_run_auroc.size() == 2);
  CHECK(report.metadata.config_hash == cfg.hash());

  const auto& a = result.artifacts;
  for (const auto& p : {a.datasets, a.report_json, a.report_csv, a.table_txt, a.manifest}) {
    CHECK_MESSAGE(std::filesystem::exists(p), p.string());
  }
  CHECK(a.translator_checkpoints.size() == 2);
  CHECK(a.classifier_checkpoints.size() == 16);
  CHECK(a.scores.size() == 32);
  for (const auto& p : a.classifier_checkpoints) CHECK(std::filesystem::exists(p));
  for (const auto& p : a.scores) CHECK(std::filesystem::exists(p));

  // Table structure: title, two header rows, 2 training sets x 2 testing sets.
  const auto table = slurp(a.table_txt);
  CHECK(std::count(table.begin(), table.end(), '\n') == 7);

  // Rerun, in parallel this time, into another directory.
  auto again = cfg;
  again.output_dir = dir.path() / "two";
  again.jobs = 3;
  run_matrix(again);
  CHECK(slurp(dir.path() / "two" / "report.json") == slurp(a.report_json));
  CHECK(slurp(dir.path() / "two" / "report.csv") == slurp(a.report_csv));

  // Changing one architecture's spec leaves the other's cells untouched.
  auto changed = cfg;
  changed.output_dir = dir.path() / "three";
  changed.classifier[Arch::mini_resnet].epochs = 1;
  const auto other = run_matrix(changed).report;
  for (const auto& c : report.cells) {
    const auto* o = other.find(c.train_set, c.test_set, c.arch, c.method);
    REQUIRE(o != nullptr);
    if (c.arch == "mini_alexnet") CHECK(o->per_run_auroc == c.per_run_auroc);
  }
}

TEST_CASE("saved datasets feed run-matrix with the same result") {
  testing::TempDir dir;
  const auto cfg_path = write_config(tiny_config(dir.path() / "single"), dir.path() / "cfg.json");
  REQUIRE(run_cli({"run-matrix", "--config", cfg_path.string()}) == 0);
  REQUIRE(run_cli({"gen-data", "--config", cfg_path.string(), "--set", "output_dir=" + (dir.path() / "gen").string()}) ==
          0);
  REQUIRE(run_cli({"run-matrix", "--config", cfg_path.string(), "--set",
               "data_dir=" + (dir.path() / "gen" / "datasets").string(), "--set",
               "output_dir=" + (dir.path() / "composed").string()}) == 0);
  CHECK(slurp(dir.path() / "composed" / "report.json") == slurp(dir.path() / "single" / "report.json"));
  for (const char* f : {"report.json", "report.csv", "table.txt", "manifest.json"}) {
    CHECK(std::filesystem::exists(dir.path() / "single" / f));
  }
  CHECK(run_cli({"report", "--dir", (dir.path() / "single").string()}) == 0);
}

TEST_CASE("step-by-step CLI pipeline") {
  testing::TempDir dir;
  const auto root = dir.path();
  const auto cfg_path = write_config(tiny_config(root / "out"), root / "cfg.json");
  const std::string cfg = cfg_path.string();
  REQUIRE(run_cli({"gen-data", "--config", cfg}) == 0);
  const auto data = (root / "out" / "datasets").string();
  REQUIRE(run_cli({"train-translator", "--config", cfg, "--data", data, "--out", (root / "t").string()}) == 0);
  REQUIRE(run_cli({"translate", "--config", cfg, "--translator", (root / "t").string(), "--data", data, "--domain", "A",
               "--out", (root / "syn").string()}) == 0);
  REQUIRE(std::filesystem::exists(root / "syn" / "A_to_B" / "train"));
  REQUIRE(run_cli({"train-classifier", "--config", cfg, "--data", data, "--domain", "A", "--arch", "mini_resnet",
               "--synth-data", (root / "syn").string(), "--synth-domain", "A_to_B", "--out",
               (root / "c").string()}) == 0);
  REQUIRE(run_cli({"score", "--config", cfg, "--model", (root / "c").string(), "--data", data, "--domain", "B", "--out",
               (root / "s.csv").string()}) == 0);
  const auto scores = classifier::read_scores_csv(root / "s.csv");
  CHECK(scores.rows.size() == 6);
}

TEST_CASE("CLI exit codes") {
  testing::TempDir dir;
  const auto cfg_path = write_config(tiny_config(dir.path() / "out"), dir.path() / "cfg.json");
  std::string err;
  CHECK(run_cli({"run-matrix", "--config", cfg_path.string(), "--set", "n_runs=0"}, &err) == 1);
  CHECK(err.find("n_runs") != std::string::npos);
  CHECK(run_cli({"bogus"}, &err) == 1);
  CHECK(run_cli({"run-matrix", "--frob"}, &err) == 1);
  CHECK(err.find("Usage") != std::string::npos);
  CHECK(run_cli({}, &err) == 1);
  CHECK(run_cli({"run-matrix", "--config", (dir.path() / "missing.json").string()}) == 1);
  CHECK(run_cli({"run-matrix", "--config", cfg_path.string(), "--set", "translator.bogus=1"}) == 1);
  CHECK(run_cli({"score", "--config", cfg_path.string(), "--model", (dir.path() / "nope").string(), "--domain", "A"}) ==
        2);
  CHECK(run_cli({"report", "--dir", (dir.path() / "nowhere").string()}) == 2);
}
