#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "evscore/error.hpp"

namespace evscore {

// Metrics over per-event scores against boolean anomaly labels. Fields are
// present only when computable: auroc needs both classes, the per-class
// statistics need a non-empty class, and median_ratio needs both medians
// (it is +inf when the nominal median is zero and the anomalous one is not).
struct EvalReport {
  std::optional<double> auroc;
  std::optional<double> median_ratio;
  std::optional<double> p95_nominal;
  std::optional<double> median_anomalous;
  std::optional<double> median_nominal;
  std::size_t n_nominal = 0;
  std::size_t n_anomalous = 0;
};

namespace detail {

inline double median_sorted(const std::vector<double>& sorted) {
  const std::size_t n = sorted.size();
  if (n % 2 == 1) return sorted[n / 2];
  return 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

// Nearest-rank percentile on a sorted ascending sample.
inline double percentile_sorted(const std::vector<double>& sorted, double p) {
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n));
  if (rank == 0) rank = 1;
  if (rank > sorted.size()) rank = sorted.size();
  return sorted[rank - 1];
}

}  // namespace detail

// AUROC via the rank statistic: ties receive their mean rank, which matches
// the pairwise definition (wins + half-ties over all anomalous/nominal
// pairs) exactly.
inline double auroc_rank(const std::vector<double>& scores, const std::vector<bool>& labels) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double positive_rank_sum = 0;
  std::size_t n_pos = 0, n_neg = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mean_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]]) {
        positive_rank_sum += mean_rank;
        ++n_pos;
      } else {
        ++n_neg;
      }
    }
    i = j;
  }
  const double n_pos_d = static_cast<double>(n_pos);
  return (positive_rank_sum - n_pos_d * (n_pos_d + 1.0) / 2.0) /
         (n_pos_d * static_cast<double>(n_neg));
}

inline EvalReport evaluate(const std::vector<double>& scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size())
    throw Error(Errc::dimension_mismatch, "scores and labels differ in length");

  EvalReport report;
  std::vector<double> nominal, anomalous;
  for (std::size_t i = 0; i < scores.size(); ++i)
    (labels[i] ? anomalous : nominal).push_back(scores[i]);
  report.n_nominal = nominal.size();
  report.n_anomalous = anomalous.size();

  std::sort(nominal.begin(), nominal.end());
  std::sort(anomalous.begin(), anomalous.end());
  if (!nominal.empty()) {
    report.median_nominal = detail::median_sorted(nominal);
    report.p95_nominal = detail::percentile_sorted(nominal, 95.0);
  }
  if (!anomalous.empty()) report.median_anomalous = detail::median_sorted(anomalous);
  if (report.median_nominal && report.median_anomalous) {
    if (*report.median_nominal != 0.0)
      report.median_ratio = *report.median_anomalous / *report.median_nominal;
    else if (*report.median_anomalous != 0.0)
      report.median_ratio = std::numeric_limits<double>::infinity();
  }
  if (!nominal.empty() && !anomalous.empty()) report.auroc = auroc_rank(scores, labels);
  return report;
}

}  // namespace evscore
