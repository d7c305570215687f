#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "uda/classifier.hpp"

namespace uda::metrics {

/// Area under the ROC curve via midranks (Mann-Whitney U / (n_pos * n_neg)),
/// ties credited 1/2. Throws ValidationError "auROC undefined" on single-class input.
double roc_auc(const classifier::ScoredSet& scored);
double roc_auc(std::span<const double> scores, std::span<const data::Label> labels);

struct MeanCi {
  double mean = 0.0;
  double halfwidth = 0.0;
};

/// Two-sided standard normal quantile z(1 - alpha/2).
double normal_critical_value(double alpha);

/// Normal-approximation interval over independent runs:
/// halfwidth = z(1 - alpha/2) * s / sqrt(n), s with the n-1 denominator.
MeanCi multi_run_ci(std::span<const double> per_run, double alpha = 0.05);

struct BootstrapCi {
  double mean = 0.0;  // mean of the bootstrap replicates
  double lo = 0.0;
  double hi = 0.0;
};

/// Stratified bootstrap (resampling positives and negatives separately, with
/// replacement) with a percentile interval.
BootstrapCi bootstrap_auc_ci(const classifier::ScoredSet& scored, int n_boot, std::uint64_t seed,
                             double alpha = 0.05);

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

/// One point per distinct score (descending thresholds), starting at (0,0).
std::vector<RocPoint> roc_curve(const classifier::ScoredSet& scored);

}  // namespace uda::metrics
