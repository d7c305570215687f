#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace uda::metrics {

enum class Method { baseline, uda };
std::string method_name(Method m);
Method parse_method(const std::string& s);

enum class CiMode { multi_run, bootstrap };
std::string ci_mode_name(CiMode m);
CiMode parse_ci_mode(const std::string& s);

/// One table cell: a (train set, test set, arch, method) combination.
struct CellResult {
  std::string train_set;
  std::string test_set;
  std::string arch;
  Method method = Method::baseline;
  double auroc_mean = 0.0;
  double ci_halfwidth = 0.0;
  int n_runs = 0;
  std::vector<double> per_run_auroc;

  void validate() const;
};

struct CellFailure {
  std::string train_set;
  std::string test_set;
  std::string arch;
  Method method = Method::baseline;
  std::string message;
};

struct ReportMetadata {
  std::uint64_t global_seed = 0;
  std::string config_hash;
  CiMode ci_mode = CiMode::multi_run;
  std::vector<std::string> domains;  // table row order
  std::vector<std::string> archs;    // table column order
  bool complete = true;
  std::vector<CellFailure> failures;
};

struct ExperimentReport {
  ReportMetadata metadata;
  std::vector<CellResult> cells;

  const CellResult* find(const std::string& train, const std::string& test, const std::string& arch,
                         Method method) const;
};

/// Round to 9 decimals (nearest double to the 9-decimal rendering).
double round9(double x);

/// Fills mean from per_run values (rounded) and the halfwidth supplied by the caller.
CellResult make_cell(std::string train_set, std::string test_set, std::string arch, Method method,
                     const std::vector<double>& per_run_auroc, double ci_halfwidth);

nlohmann::json report_to_json(const ExperimentReport& r);
ExperimentReport report_from_json(const nlohmann::json& j);

struct Table {
  std::string text;  // aligned plain text, "m ± h" with 3 decimals
  std::string csv;   // one row per cell, 9-decimal fixed point
};

/// Requires every (train, test, arch, method) combination over metadata.domains
/// and metadata.archs; otherwise throws ValidationError listing the absent ones.
Table build_table(const ExperimentReport& report);

/// Parses the CSV emitted by build_table back into cells.
std::vector<CellResult> parse_table_csv(const std::string& csv);

}  // namespace uda::metrics
