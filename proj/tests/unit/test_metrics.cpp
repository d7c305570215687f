#include <doctest.h>

#include <algorithm>
#include <random>

#include "test_support.hpp"
#include "uda/common.hpp"
#include "uda/metrics.hpp"
#include "uda/report.hpp"

using namespace uda;
using metrics::CellResult;
using metrics::Method;
using testing::scored;

TEST_CASE("roc_auc hand examples") {
  CHECK(metrics::roc_auc(scored({0.9, 0.8}, {0.3, 0.1})) == 1.0);
  CHECK(metrics::roc_auc(scored({0.4, 0.4, 0.4}, {0.4, 0.4})) == 0.5);
  // (0.9>0.6), (0.9>0.1), (0.4<0.6), (0.4>0.1)
  CHECK(metrics::roc_auc(scored({0.9, 0.4}, {0.6, 0.1})) == 0.75);
  CHECK(testing::roc_auc_oracle(scored({0.9, 0.4}, {0.6, 0.1})) == 0.75);
  CHECK(testing::roc_auc_oracle(scored({0.4, 0.4}, {0.4})) == 0.5);
  CHECK(metrics::roc_auc(scored({0.1}, {0.9})) == 0.0);
}

TEST_CASE("roc_auc rejects single-class and malformed input") {
  CHECK_THROWS_WITH_AS(metrics::roc_auc(scored({0.1, 0.2}, {})), doctest::Contains("auROC undefined"),
                       ValidationError);
  CHECK_THROWS_WITH_AS(metrics::roc_auc(scored({}, {0.3})), doctest::Contains("auROC undefined"), ValidationError);
  CHECK_THROWS_AS(metrics::roc_auc(scored({std::nan("")}, {0.3})), ValidationError);
  CHECK_THROWS_AS(testing::roc_auc_oracle(scored({}, {0.3})), ValidationError);
}

TEST_CASE("roc_auc matches the pairwise oracle on tie-rich random sets") {
  std::mt19937_64 rng(99);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const auto s = testing::random_tied_set(rng, 200, 1 + static_cast<int>(rng() % 12) + 1);
    worst = std::max(worst, std::abs(metrics::roc_auc(s) - testing::roc_auc_oracle(s)));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("roc_auc complement and monotone invariance") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 50; ++t) {
    auto s = testing::random_tied_set(rng, 80, 7);
    const double auc = metrics::roc_auc(s);
    auto flipped = s;
    for (auto& r : flipped.rows) r.score = 1.0 - r.score;
    CHECK(auc + metrics::roc_auc(flipped) == 1.0);
    auto warped = s;
    for (auto& r : warped.rows) r.score = std::exp(3.0 * r.score) - 7.0;
    CHECK(metrics::roc_auc(warped) == auc);
    auto shuffled = s;
    std::shuffle(shuffled.rows.begin(), shuffled.rows.end(), rng);
    CHECK(metrics::roc_auc(shuffled) == auc);
  }
}

TEST_CASE("normal critical value") {
  CHECK(metrics::normal_critical_value(0.05) == doctest::Approx(1.959964).epsilon(1e-7));
  CHECK(metrics::normal_critical_value(0.10) == doctest::Approx(1.644854).epsilon(1e-6));
  CHECK_THROWS_AS(metrics::normal_critical_value(0.0), ValidationError);
}

TEST_CASE("multi_run_ci examples") {
  const std::vector<double> same{0.6, 0.6, 0.6};
  auto ci = metrics::multi_run_ci(same);
  CHECK(ci.mean == doctest::Approx(0.6));
  CHECK(ci.halfwidth == 0.0);

  const std::vector<double> two{0.5, 0.7};
  ci = metrics::multi_run_ci(two);
  CHECK(ci.mean == doctest::Approx(0.6));
  // std = 0.1414214, halfwidth = 1.959964 * std / sqrt(2)
  CHECK(ci.halfwidth == doctest::Approx(0.1959964).epsilon(1e-6));

  const std::vector<double> one{0.7};
  CHECK_THROWS_AS(metrics::multi_run_ci(one), ValidationError);
}

TEST_CASE("multi_run_ci symmetry and shift invariance") {
  std::vector<double> v{0.61, 0.58, 0.66, 0.63};
  const auto base = metrics::multi_run_ci(v);
  CHECK(base.halfwidth > 0.0);
  std::reverse(v.begin(), v.end());
  const auto rev = metrics::multi_run_ci(v);
  CHECK(rev.mean == doctest::Approx(base.mean).epsilon(1e-14));
  CHECK(rev.halfwidth == doctest::Approx(base.halfwidth).epsilon(1e-12));
  for (double& x : v) x += 0.125;
  const auto shifted = metrics::multi_run_ci(v);
  CHECK(shifted.mean == doctest::Approx(base.mean + 0.125).epsilon(1e-14));
  CHECK(shifted.halfwidth == doctest::Approx(base.halfwidth).epsilon(1e-9));
  for (double& x : v) x *= 2.0;
  CHECK(metrics::multi_run_ci(v).halfwidth == doctest::Approx(2.0 * base.halfwidth).epsilon(1e-9));
}

TEST_CASE("bootstrap_auc_ci") {
  const auto separated = scored({0.9, 0.8, 0.7, 0.95}, {0.1, 0.2, 0.3});
  auto ci = metrics::bootstrap_auc_ci(separated, 200, 1);
  CHECK(ci.mean == 1.0);
  CHECK(ci.lo == 1.0);
  CHECK(ci.hi == 1.0);

  // 100 positives and 100 negatives with auROC exactly 0.75: positives at
  // levels shifted so that a known fraction of pairs is ordered.
  std::vector<double> pos, neg;
  for (int i = 0; i < 100; ++i) {
    neg.push_back(i);
    pos.push_back(i < 50 ? i + 50.5 : i - 0.5);
  }
  const auto s = scored(pos, neg);
  const double point = metrics::roc_auc(s);
  CHECK(point == doctest::Approx(0.75).epsilon(1e-3));
  const auto a = metrics::bootstrap_auc_ci(s, 500, 42);
  const auto b = metrics::bootstrap_auc_ci(s, 500, 42);
  CHECK(a.lo == b.lo);
  CHECK(a.hi == b.hi);
  CHECK(a.mean == b.mean);
  CHECK(a.lo <= point);
  CHECK(point <= a.hi);
  CHECK(a.lo < a.hi);
  const auto c = metrics::bootstrap_auc_ci(s, 500, 43);
  CHECK((c.lo != a.lo || c.hi != a.hi));

  CHECK_THROWS_AS(metrics::bootstrap_auc_ci(s, 99, 1), ValidationError);
  CHECK_THROWS_WITH_AS(metrics::bootstrap_auc_ci(scored({0.3}, {}), 100, 1), doctest::Contains("auROC undefined"),
                       ValidationError);
}

TEST_CASE("roc curve points") {
  const auto pts = metrics::roc_curve(scored({0.9, 0.4}, {0.6, 0.1}));
  REQUIRE(pts.size() == 5);
  CHECK(pts.front().fpr == 0.0);
  CHECK(pts.front().tpr == 0.0);
  CHECK(pts.back().fpr == 1.0);
  CHECK(pts.back().tpr == 1.0);
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    area += (pts[i].fpr - pts[i - 1].fpr) * 0.5 * (pts[i].tpr + pts[i - 1].tpr);
  }
  CHECK(area == doctest::Approx(0.75));
}

namespace {

CellResult cell(const std::string& tr, const std::string& te, const std::string& arch, Method m, double mean,
                double half) {
  return {tr, te, arch, m, mean, half, 0, {}};
}

// Full matrix with the reference table's values.
metrics::ExperimentReport reference_report() {
  metrics::ExperimentReport r;
  r.metadata.domains = {"UKY", "DDSM"};
  r.metadata.archs = {"AlexNet", "ResNet50"};
  r.metadata.config_hash = "0";
  const struct {
    const char* tr;
    const char* te;
    double v[8];
  } rows[] = {
      {"UKY", "DDSM", {0.516, 0.004, 0.601, 0.005, 0.624, 0.004, 0.672, 0.002}},
      {"UKY", "UKY", {0.785, 0.003, 0.769, 0.007, 0.836, 0.008, 0.869, 0.016}},
      {"DDSM", "UKY", {0.491, 0.007, 0.578, 0.002, 0.565, 0.002, 0.674, 0.003}},
      {"DDSM", "DDSM", {0.673, 0.015, 0.653, 0.024, 0.762, 0.008, 0.759, 0.012}},
  };
  for (const auto& row : rows) {
    r.cells.push_back(cell(row.tr, row.te, "AlexNet", Method::baseline, row.v[0], row.v[1]));
    r.cells.push_back(cell(row.tr, row.te, "AlexNet", Method::uda, row.v[2], row.v[3]));
    r.cells.push_back(cell(row.tr, row.te, "ResNet50", Method::baseline, row.v[4], row.v[5]));
    r.cells.push_back(cell(row.tr, row.te, "ResNet50", Method::uda, row.v[6], row.v[7]));
  }
  return r;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::string line;
  std::istringstream in(text);
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("table layout with the reference values") {
  const auto table = metrics::build_table(reference_report());
  const auto lines = lines_of(table.text);
  REQUIRE(lines.size() == 7);  // title, two header lines, four rows
  CHECK(lines[1].find("Training Set") == 0);
  CHECK(lines[1].find("AlexNet") != std::string::npos);
  CHECK(lines[2].find("Baseline") != std::string::npos);
  CHECK(lines[2].find("UDA") != std::string::npos);
  // First body row: trained on UKY, tested on DDSM.
  CHECK(lines[3].find("UKY") == 0);
  CHECK(lines[3].find("DDSM") != std::string::npos);
  const auto base = lines[3].find("0.516 ± 0.004");
  const auto uda = lines[3].find("0.601 ± 0.005");
  REQUIRE(base != std::string::npos);
  REQUIRE(uda != std::string::npos);
  CHECK(base < uda);
  CHECK(lines[4].find("0.785 ± 0.003") != std::string::npos);
  CHECK(lines[5].find("DDSM") == 0);
  CHECK(lines[5].find("0.491 ± 0.007") != std::string::npos);
  CHECK(lines[6].find("0.759 ± 0.012") != std::string::npos);
}

TEST_CASE("table rejects an incomplete report and names the missing tuple") {
  auto r = reference_report();
  r.cells.erase(r.cells.begin() + 5);  // (UKY, UKY, AlexNet, uda)
  CHECK_THROWS_WITH_AS(metrics::build_table(r), doctest::Contains("(UKY,UKY,AlexNet,uda)"), ValidationError);
  r.cells.clear();
  CHECK_THROWS_WITH_AS(metrics::build_table(r), doctest::Contains("16 cell(s)"), ValidationError);
}

TEST_CASE("table CSV re-parses to the same numbers") {
  const auto r = reference_report();
  const auto parsed = metrics::parse_table_csv(metrics::build_table(r).csv);
  REQUIRE(parsed.size() == 16);
  for (const auto& c : parsed) {
    const auto* orig = r.find(c.train_set, c.test_set, c.arch, c.method);
    REQUIRE(orig != nullptr);
    CHECK(c.auroc_mean == orig->auroc_mean);
    CHECK(c.ci_halfwidth == orig->ci_halfwidth);
  }
}

TEST_CASE("report round-trips through JSON and CSV for 9-decimal values") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  metrics::ExperimentReport r;
  r.metadata.domains = {"A", "B"};
  r.metadata.archs = {"mini_alexnet", "mini_resnet"};
  r.metadata.global_seed = 77;
  r.metadata.config_hash = "abc";
  for (const char* tr : {"A", "B"}) {
    for (const char* te : {"A", "B"}) {
      for (const char* arch : {"mini_alexnet", "mini_resnet"}) {
        for (Method m : {Method::baseline, Method::uda}) {
          r.cells.push_back(metrics::make_cell(tr, te, arch, m, {u(rng), u(rng), u(rng)}, 0.1 * u(rng)));
        }
      }
    }
  }
  for (const auto& c : r.cells) {
    double mean = 0.0;
    for (double v : c.per_run_auroc) mean += v / 3.0;
    CHECK(c.auroc_mean == doctest::Approx(mean).epsilon(1e-9));
    CHECK(c.n_runs == 3);
  }
  const auto back = metrics::report_from_json(nlohmann::json::parse(metrics::report_to_json(r).dump()));
  CHECK(metrics::report_to_json(back) == metrics::report_to_json(r));

  const auto parsed = metrics::parse_table_csv(metrics::build_table(r).csv);
  REQUIRE(parsed.size() == r.cells.size());
  for (const auto& c : parsed) {
    const auto* orig = r.find(c.train_set, c.test_set, c.arch, c.method);
    REQUIRE(orig != nullptr);
    CHECK(c.auroc_mean == orig->auroc_mean);
    CHECK(c.ci_halfwidth == orig->ci_halfwidth);
    CHECK(c.per_run_auroc == orig->per_run_auroc);
  }
}

TEST_CASE("cell and report validation") {
  CellResult c{"A", "B", "x", Method::uda, 0.5, 0.1, 2, {0.5}};
  CHECK_THROWS_AS(c.validate(), ValidationError);
  CHECK_THROWS_AS(metrics::parse_method("mixed"), ValidationError);
  CHECK_THROWS_AS(metrics::parse_ci_mode("jackknife"), ValidationError);
  CHECK_THROWS_AS(metrics::report_from_json(nlohmann::json::object()), ValidationError);
  CHECK_THROWS_AS(metrics::parse_table_csv("nonsense\n"), ValidationError);
}
