#include "uda/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <sstream>

#include "uda/common.hpp"

namespace uda::metrics {

using nlohmann::json;

std::string method_name(Method m) { return m == Method::baseline ? "baseline" : "uda"; }

Method parse_method(const std::string& s) {
  if (s == "baseline") return Method::baseline;
  if (s == "uda") return Method::uda;
  throw ValidationError("unknown method '" + s + "' (expected baseline or uda)");
}

std::string ci_mode_name(CiMode m) { return m == CiMode::multi_run ? "multi_run" : "bootstrap"; }

CiMode parse_ci_mode(const std::string& s) {
  if (s == "multi_run") return CiMode::multi_run;
  if (s == "bootstrap") return CiMode::bootstrap;
  throw ValidationError("unknown ci_mode '" + s + "' (expected multi_run or bootstrap)");
}

double round9(double x) { return std::strtod(fixed9(x).c_str(), nullptr); }

void CellResult::validate() const {
  if (n_runs != static_cast<int>(per_run_auroc.size())) throw ValidationError("cell n_runs does not match per_run_auroc");
  if (!(ci_halfwidth >= 0.0)) throw ValidationError("cell ci_halfwidth must be nonnegative");
  if (!(auroc_mean >= 0.0 && auroc_mean <= 1.0)) throw ValidationError("cell auroc_mean outside [0,1]");
}

CellResult make_cell(std::string train_set, std::string test_set, std::string arch, Method method,
                     const std::vector<double>& per_run_auroc, double ci_halfwidth) {
  CellResult c{std::move(train_set), std::move(test_set), std::move(arch), method, 0.0, round9(ci_halfwidth),
               static_cast<int>(per_run_auroc.size()), {}};
  for (double v : per_run_auroc) c.per_run_auroc.push_back(round9(v));
  if (!c.per_run_auroc.empty()) {
    c.auroc_mean = round9(std::accumulate(c.per_run_auroc.begin(), c.per_run_auroc.end(), 0.0) /
                          static_cast<double>(c.per_run_auroc.size()));
  }
  return c;
}

const CellResult* ExperimentReport::find(const std::string& train, const std::string& test, const std::string& arch,
                                         Method method) const {
  for (const auto& c : cells) {
    if (c.train_set == train && c.test_set == test && c.arch == arch && c.method == method) return &c;
  }
  return nullptr;
}

namespace {

json cell_key_json(const std::string& tr, const std::string& te, const std::string& arch, Method m) {
  return {{"train_set", tr}, {"test_set", te}, {"arch", arch}, {"method", method_name(m)}};
}

std::string tuple_text(const std::string& tr, const std::string& te, const std::string& arch, Method m) {
  return "(" + tr + "," + te + "," + arch + "," + method_name(m) + ")";
}

// Display width of a UTF-8 string (code points; the table only uses narrow glyphs).
std::size_t display_width(const std::string& s) {
  return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char ch) {
    return (static_cast<unsigned char>(ch) & 0xC0) != 0x80;
  }));
}

std::string pad(const std::string& s, std::size_t w) { return s + std::string(w - std::min(w, display_width(s)), ' '); }

}  // namespace

json report_to_json(const ExperimentReport& r) {
  json failures = json::array();
  for (const auto& f : r.metadata.failures) {
    json j = cell_key_json(f.train_set, f.test_set, f.arch, f.method);
    j["message"] = f.message;
    failures.push_back(j);
  }
  json cells = json::array();
  for (const auto& c : r.cells) {
    json j = cell_key_json(c.train_set, c.test_set, c.arch, c.method);
    j["auroc_mean"] = c.auroc_mean;
    j["ci_halfwidth"] = c.ci_halfwidth;
    j["n_runs"] = c.n_runs;
    j["per_run_auroc"] = c.per_run_auroc;
    cells.push_back(j);
  }
  return {{"metadata",
           {{"global_seed", r.metadata.global_seed},
            {"config_hash", r.metadata.config_hash},
            {"ci_mode", ci_mode_name(r.metadata.ci_mode)},
            {"domains", r.metadata.domains},
            {"archs", r.metadata.archs},
            {"complete", r.metadata.complete},
            {"failures", failures}}},
          {"cells", cells}};
}

ExperimentReport report_from_json(const json& j) {
  try {
    ExperimentReport r;
    const auto& m = j.at("metadata");
    r.metadata.global_seed = m.at("global_seed").get<std::uint64_t>();
    r.metadata.config_hash = m.at("config_hash").get<std::string>();
    r.metadata.ci_mode = parse_ci_mode(m.at("ci_mode").get<std::string>());
    r.metadata.domains = m.at("domains").get<std::vector<std::string>>();
    r.metadata.archs = m.at("archs").get<std::vector<std::string>>();
    r.metadata.complete = m.at("complete").get<bool>();
    for (const auto& f : m.at("failures")) {
      r.metadata.failures.push_back({f.at("train_set"), f.at("test_set"), f.at("arch"),
                                     parse_method(f.at("method")), f.at("message")});
    }
    for (const auto& c : j.at("cells")) {
      CellResult cell{c.at("train_set"),  c.at("test_set"),     c.at("arch"),   parse_method(c.at("method")),
                      c.at("auroc_mean"), c.at("ci_halfwidth"), c.at("n_runs"), c.at("per_run_auroc")};
      cell.validate();
      r.cells.push_back(std::move(cell));
    }
    return r;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed report: ") + e.what());
  }
}

Table build_table(const ExperimentReport& report) {
  const auto& domains = report.metadata.domains;
  const auto& archs = report.metadata.archs;
  if (domains.empty() || archs.empty()) throw ValidationError("report metadata lists no domains or archs");

  // Rows: each training set, tested first on the other domain(s), then on itself.
  std::vector<std::pair<std::string, std::string>> rows;
  for (const auto& tr : domains) {
    for (const auto& te : domains) {
      if (te != tr) rows.emplace_back(tr, te);
    }
    rows.emplace_back(tr, tr);
  }

  std::vector<std::string> missing;
  for (const auto& [tr, te] : rows) {
    for (const auto& a : archs) {
      for (Method m : {Method::baseline, Method::uda}) {
        if (!report.find(tr, te, a, m)) missing.push_back(tuple_text(tr, te, a, m));
      }
    }
  }
  if (!missing.empty()) {
    std::string msg = "report is missing " + std::to_string(missing.size()) + " cell(s):";
    for (const auto& t : missing) msg += " " + t;
    throw ValidationError(msg);
  }

  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> head1{"Training Set", "Testing Set"}, head2{"", ""};
  for (const auto& a : archs) {
    head1.insert(head1.end(), {a, ""});
    head2.insert(head2.end(), {"Baseline", "UDA"});
  }
  grid.push_back(head1);
  grid.push_back(head2);
  std::ostringstream csv;
  csv << "train_set,test_set,arch,method,auroc_mean,ci_halfwidth,n_runs,per_run_auroc\n";
  std::string prev_train;
  for (const auto& [tr, te] : rows) {
    std::vector<std::string> line{tr == prev_train ? "" : tr, te};
    prev_train = tr;
    for (const auto& a : archs) {
      for (Method m : {Method::baseline, Method::uda}) {
        const CellResult& c = *report.find(tr, te, a, m);
        line.push_back(fixed(c.auroc_mean, 3) + " ± " + fixed(c.ci_halfwidth, 3));
        csv << c.train_set << ',' << c.test_set << ',' << c.arch << ',' << method_name(c.method) << ','
            << fixed9(c.auroc_mean) << ',' << fixed9(c.ci_halfwidth) << ',' << c.n_runs << ',';
        for (std::size_t i = 0; i < c.per_run_auroc.size(); ++i) csv << (i ? ";" : "") << fixed9(c.per_run_auroc[i]);
        csv << '\n';
      }
    }
    grid.push_back(line);
  }

  std::vector<std::size_t> width(grid.front().size(), 0);
  for (const auto& line : grid) {
    for (std::size_t k = 0; k < line.size(); ++k) width[k] = std::max(width[k], display_width(line[k]));
  }
  std::ostringstream text;
  text << "Mean auROC (95% CI, " << ci_mode_name(report.metadata.ci_mode) << ")\n";
  for (const auto& line : grid) {
    std::string out;
    for (std::size_t k = 0; k < line.size(); ++k) out += (k ? "  " : "") + pad(line[k], width[k]);
    out.erase(out.find_last_not_of(' ') + 1);
    text << out << '\n';
  }
  return {text.str(), csv.str()};
}

std::vector<CellResult> parse_table_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line.rfind("train_set,test_set,arch,method,", 0) != 0) {
    throw ValidationError("table csv: missing header");
  }
  std::vector<CellResult> cells;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 8) throw ValidationError("table csv line " + std::to_string(lineno) + ": expected 8 fields");
    auto num = [&](const std::string& s) {
      char* end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      if (s.empty() || *end != '\0') throw ValidationError("table csv line " + std::to_string(lineno) + ": bad number '" + s + "'");
      return v;
    };
    CellResult c{f[0], f[1], f[2], parse_method(f[3]), num(f[4]), num(f[5]), std::stoi(f[6]), {}};
    std::stringstream runs(f[7]);
    while (std::getline(runs, tok, ';')) c.per_run_auroc.push_back(num(tok));
    c.validate();
    cells.push_back(std::move(c));
  }
  return cells;
}

}  // namespace uda::metrics
