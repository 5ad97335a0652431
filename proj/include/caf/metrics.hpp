#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "caf/cfselect.hpp"
#include "caf/errors.hpp"
#include "caf/matrix.hpp"

namespace caf {

// Probability that a random positive outranks a random negative, ties
// counted one half (rank-statistic formulation).
inline double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw ValidationError("auroc: length mismatch");
  const int n = static_cast<int>(scores.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return scores[a] < scores[b]; });
  // Average ranks across ties, 1-based.
  std::vector<double> rank(n);
  int i = 0;
  while (i < n) {
    int j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg = (i + 1 + j) / 2.0;
    for (int k = i; k < j; ++k) rank[order[k]] = avg;
    i = j;
  }
  double pos_rank_sum = 0;
  std::int64_t pos = 0, neg = 0;
  for (int k = 0; k < n; ++k) {
    if (labels[k] == 1) {
      pos_rank_sum += rank[k];
      ++pos;
    } else {
      ++neg;
    }
  }
  if (pos == 0 || neg == 0)
    throw ValidationError("auroc: both classes must be present");
  const double u = pos_rank_sum - static_cast<double>(pos) * (pos + 1) / 2.0;
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

// F1 on class 1; 0 when precision + recall is 0.
inline double f1_binary(const std::vector<int>& preds, const std::vector<int>& labels) {
  if (preds.size() != labels.size()) throw ValidationError("f1: length mismatch");
  std::int64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] == 1 && labels[i] == 1) ++tp;
    if (preds[i] == 1 && labels[i] == 0) ++fp;
    if (preds[i] == 0 && labels[i] == 1) ++fn;
  }
  if (2 * tp + fp + fn == 0) return 0.0;
  return 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
}

// |P(pred=1 | s=0) - P(pred=1 | s=1)|
inline double delta_sp(const std::vector<int>& preds, const std::vector<int>& sens) {
  if (preds.size() != sens.size()) throw ValidationError("delta_sp: length mismatch");
  std::int64_t pos0 = 0, n0 = 0, pos1 = 0, n1 = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (sens[i] == 0) {
      ++n0;
      pos0 += preds[i];
    } else {
      ++n1;
      pos1 += preds[i];
    }
  }
  if (n0 == 0 || n1 == 0) throw ValidationError("delta_sp: a sensitive group is empty");
  return std::fabs(static_cast<double>(pos0) / n0 - static_cast<double>(pos1) / n1);
}

// |P(pred=1 | y=1, s=0) - P(pred=1 | y=1, s=1)|; undefined (error) when a
// group has no positives.
inline double delta_eo(const std::vector<int>& preds, const std::vector<int>& labels,
                       const std::vector<int>& sens) {
  if (preds.size() != labels.size() || preds.size() != sens.size())
    throw ValidationError("delta_eo: length mismatch");
  std::int64_t tp0 = 0, p0 = 0, tp1 = 0, p1 = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] != 1) continue;
    if (sens[i] == 0) {
      ++p0;
      tp0 += preds[i];
    } else {
      ++p1;
      tp1 += preds[i];
    }
  }
  if (p0 == 0 || p1 == 0)
    throw ValidationError("delta_eo: a sensitive group has no positive labels");
  return std::fabs(static_cast<double>(tp0) / p0 - static_cast<double>(tp1) / p1);
}

// Fraction of nodes whose hard prediction changes under the whole-vector
// sensitive intervention.
inline double delta_cf(const std::vector<int>& preds_factual,
                       const std::vector<int>& preds_counterfactual) {
  if (preds_factual.size() != preds_counterfactual.size())
    throw ValidationError("delta_cf: length mismatch");
  if (preds_factual.empty()) throw ValidationError("delta_cf: empty prediction vectors");
  std::int64_t flips = 0;
  for (std::size_t i = 0; i < preds_factual.size(); ++i)
    flips += preds_factual[i] != preds_counterfactual[i];
  return static_cast<double>(flips) / static_cast<double>(preds_factual.size());
}

enum class DiscrepancyBlock { full, content };

// Mean L2 distance between the factual rows of the selected stand-ins and
// the exact counterfactual rows, over all (node, rank) pairs with
// candidates. repr_gt_cf must come from the same trained parameters
// applied to the ground-truth sensitive-flipped graph.
inline double cf_discrepancy(const Matrix& repr_factual, const Matrix& repr_gt_cf,
                             const CFIndex& index,
                             DiscrepancyBlock block = DiscrepancyBlock::full, int d_c = 0) {
  if (!repr_factual.same_shape(repr_gt_cf))
    throw ValidationError("cf_discrepancy: representation shapes differ");
  const int cols = block == DiscrepancyBlock::full ? repr_factual.cols() : d_c;
  if (cols <= 0 || cols > repr_factual.cols())
    throw ValidationError("cf_discrepancy: bad column block");
  double sum = 0;
  std::int64_t count = 0;
  for (int i = 0; i < index.n(); ++i) {
    for (int j : index.e_idx[i]) {
      double d2 = 0;
      for (int c = 0; c < cols; ++c) {
        const double d = repr_factual(j, c) - repr_gt_cf(i, c);
        d2 += d * d;
      }
      sum += std::sqrt(d2);
      ++count;
    }
  }
  if (count == 0) throw ValidationError("cf_discrepancy: index has no candidates");
  return sum / static_cast<double>(count);
}

struct MetricsReport {
  double auroc = 0;
  double f1 = 0;
  double delta_sp = 0;
  std::optional<double> delta_eo;
  std::optional<double> delta_cf;            // synthetic only
  std::optional<double> cf_discrepancy;      // synthetic, with a CF index
  std::optional<double> cf_discrepancy_random;  // random-selection baseline
  std::uint64_t seed = 0;
  std::string config_digest;
};

}  // namespace caf
