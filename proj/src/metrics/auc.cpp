#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <boost/math/distributions/normal.hpp>

#include "uda/common.hpp"
#include "uda/metrics.hpp"

namespace uda::metrics {

namespace {

std::vector<double> scores_of(const classifier::ScoredSet& s) {
  std::vector<double> v;
  v.reserve(s.rows.size());
  for (const auto& r : s.rows) v.push_back(r.score);
  return v;
}

std::vector<data::Label> labels_of(const classifier::ScoredSet& s) {
  std::vector<data::Label> v;
  v.reserve(s.rows.size());
  for (const auto& r : s.rows) v.push_back(r.true_label);
  return v;
}

// AUC from separate positive and negative score lists. Sorted merge with
// tie groups; equivalent to the midrank formulation.
double auc_sorted(std::vector<double> pos, std::vector<double> neg) {
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  double wins = 0.0;
  std::size_t below = 0;  // negatives strictly below the current positive score
  std::size_t i = 0;
  while (i < pos.size()) {
    const double s = pos[i];
    std::size_t j = i;
    while (j < pos.size() && pos[j] == s) ++j;
    while (below < neg.size() && neg[below] < s) ++below;
    std::size_t equal = below;
    while (equal < neg.size() && neg[equal] == s) ++equal;
    wins += static_cast<double>(j - i) * (static_cast<double>(below) + 0.5 * static_cast<double>(equal - below));
    i = j;
  }
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const data::Label> labels) {
  if (scores.size() != labels.size()) throw ValidationError("roc_auc: scores and labels differ in length");
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw ValidationError("roc_auc: non-finite score");
    (labels[i] == data::Label::positive ? pos : neg).push_back(scores[i]);
  }
  if (pos.empty() || neg.empty()) throw ValidationError("auROC undefined: need at least one positive and one negative");
  return auc_sorted(std::move(pos), std::move(neg));
}

double roc_auc(const classifier::ScoredSet& scored) {
  const auto s = scores_of(scored);
  const auto l = labels_of(scored);
  return roc_auc(s, l);
}

double normal_critical_value(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0,1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), 1.0 - alpha / 2.0);
}

MeanCi multi_run_ci(std::span<const double> per_run, double alpha) {
  if (per_run.size() < 2) throw ValidationError("multi_run_ci needs at least 2 runs");
  const double n = static_cast<double>(per_run.size());
  const double mean = std::accumulate(per_run.begin(), per_run.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : per_run) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  return {mean, normal_critical_value(alpha) * sd / std::sqrt(n)};
}

BootstrapCi bootstrap_auc_ci(const classifier::ScoredSet& scored, int n_boot, std::uint64_t seed, double alpha) {
  if (n_boot < 100) throw ValidationError("bootstrap_auc_ci needs n_boot >= 100");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0,1)");
  std::vector<double> pos, neg;
  for (const auto& r : scored.rows) (r.true_label == data::Label::positive ? pos : neg).push_back(r.score);
  if (pos.empty() || neg.empty()) throw ValidationError("auROC undefined: need at least one positive and one negative");

  std::mt19937_64 rng(derive_seed(seed, {"bootstrap"}));
  std::uniform_int_distribution<std::size_t> pick_pos(0, pos.size() - 1), pick_neg(0, neg.size() - 1);
  std::vector<double> reps(static_cast<std::size_t>(n_boot));
  std::vector<double> bp(pos.size()), bn(neg.size());
  for (double& rep : reps) {
    for (double& v : bp) v = pos[pick_pos(rng)];
    for (double& v : bn) v = neg[pick_neg(rng)];
    rep = auc_sorted(bp, bn);
  }
  std::sort(reps.begin(), reps.end());
  // Linear interpolation between order statistics.
  auto quantile = [&](double q) {
    const double h = q * static_cast<double>(reps.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, reps.size() - 1);
    return reps[lo] + (h - static_cast<double>(lo)) * (reps[hi] - reps[lo]);
  };
  const double mean = std::accumulate(reps.begin(), reps.end(), 0.0) / static_cast<double>(reps.size());
  return {mean, quantile(alpha / 2.0), quantile(1.0 - alpha / 2.0)};
}

std::vector<RocPoint> roc_curve(const classifier::ScoredSet& scored) {
  std::vector<const classifier::ScoredRow*> rows;
  std::size_t n_pos = 0;
  for (const auto& r : scored.rows) {
    rows.push_back(&r);
    n_pos += r.true_label == data::Label::positive;
  }
  const std::size_t n_neg = rows.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw ValidationError("auROC undefined: need at least one positive and one negative");
  std::sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->score > b->score; });
  std::vector<RocPoint> pts{{std::numeric_limits<double>::infinity(), 0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < rows.size();) {
    const double s = rows[i]->score;
    for (; i < rows.size() && rows[i]->score == s; ++i) {
      (rows[i]->true_label == data::Label::positive ? tp : fp)++;
    }
    pts.push_back({s, static_cast<double>(fp) / n_neg, static_cast<double>(tp) / n_pos});
  }
  return pts;
}

}  // namespace uda::metrics
