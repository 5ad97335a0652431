#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <vector>

#include "caf/encoder.hpp"
#include "caf/errors.hpp"
#include "caf/graph.hpp"
#include "caf/matrix.hpp"
#include "caf/rng.hpp"

namespace caf {

// Ground truth on train nodes, classifier argmax everywhere else.
struct FullLabels {
  std::vector<int> label;       // {0,1}, no -1 entries
  std::vector<bool> is_pseudo;  // provenance per node
};

inline FullLabels pseudo_labels(const Matrix& logits, const Graph& g) {
  if (logits.rows() != g.n || logits.cols() != 2)
    throw ValidationError("pseudo_labels: logits must be n x 2");
  FullLabels out;
  out.label.resize(g.n);
  out.is_pseudo.assign(g.n, true);
  for (int i : g.split.train) {
    out.label[i] = g.labels[i];
    out.is_pseudo[i] = false;
  }
  for (int i = 0; i < g.n; ++i)
    if (out.is_pseudo[i]) out.label[i] = logits(i, 1) > logits(i, 0) ? 1 : 0;  // tie -> 0
  return out;
}

// Per-node counterfactual candidates in representation space.
//   e_cf: same label, different sensitive attribute (content stand-ins)
//   c_cf: different label, same sensitive attribute (environment stand-ins)
// Lists are sorted by ascending squared L2 distance, ties by node id.
struct CFIndex {
  std::vector<std::vector<int>> e_idx, c_idx;
  std::vector<std::vector<double>> e_dist, c_dist;

  int n() const { return static_cast<int>(e_idx.size()); }
};

enum class CandidatePool { all, train };

inline CandidatePool pool_from_name(const std::string& s) {
  if (s == "all") return CandidatePool::all;
  if (s == "train") return CandidatePool::train;
  throw ValidationError("unknown candidate pool '" + s + "'");
}

namespace cfsel_detail {

inline double sq_dist(const double* a, const double* b, int d) {
  double s = 0;
  for (int k = 0; k < d; ++k) {
    const double diff = a[k] - b[k];
    s += diff * diff;
  }
  return s;
}

// Candidate node ids partitioned by (label, sens), optionally restricted
// to the train mask.
inline std::array<std::vector<int>, 4> bucket_candidates(const FullLabels& labels,
                                                         const std::vector<int>& sens,
                                                         CandidatePool pool,
                                                         const SplitMask& split) {
  std::array<std::vector<int>, 4> buckets;
  auto place = [&](int i) { buckets[labels.label[i] * 2 + sens[i]].push_back(i); };
  if (pool == CandidatePool::train) {
    for (int i : split.train) place(i);
  } else {
    for (int i = 0; i < static_cast<int>(sens.size()); ++i) place(i);
  }
  return buckets;
}

inline void top_k(const Matrix& h, int i, const std::vector<int>& bucket, int k,
                  std::vector<int>& idx_out, std::vector<double>& dist_out) {
  std::vector<std::pair<double, int>> scored;
  scored.reserve(bucket.size());
  for (int j : bucket) scored.emplace_back(sq_dist(h.row(i), h.row(j), h.cols()), j);
  const auto take = std::min<std::size_t>(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + take, scored.end());
  idx_out.reserve(take);
  dist_out.reserve(take);
  for (std::size_t r = 0; r < take; ++r) {
    idx_out.push_back(scored[r].second);
    dist_out.push_back(scored[r].first);
  }
}

}  // namespace cfsel_detail

// Exact top-K eligible candidates per node and kind, by squared L2 over
// full representation rows. Equivalent to an exhaustive scan.
inline CFIndex select_counterfactuals(const Matrix& h, const FullLabels& labels,
                                      const std::vector<int>& sens, int k, CandidatePool pool,
                                      const SplitMask& split) {
  const int n = h.rows();
  if (k < 1) throw ValidationError("select_counterfactuals: K must be >= 1");
  if (static_cast<int>(labels.label.size()) != n || static_cast<int>(sens.size()) != n)
    throw ValidationError("select_counterfactuals: length mismatch");
  const auto buckets = cfsel_detail::bucket_candidates(labels, sens, pool, split);
  CFIndex out;
  out.e_idx.resize(n);
  out.c_idx.resize(n);
  out.e_dist.resize(n);
  out.c_dist.resize(n);
  bool any_e = false, any_c = false;
  for (int i = 0; i < n; ++i) {
    const int y = labels.label[i], s = sens[i];
    const auto& e_bucket = buckets[y * 2 + (1 - s)];        // same label, other group
    const auto& c_bucket = buckets[(1 - y) * 2 + s];        // other label, same group
    cfsel_detail::top_k(h, i, e_bucket, k, out.e_idx[i], out.e_dist[i]);
    cfsel_detail::top_k(h, i, c_bucket, k, out.c_idx[i], out.c_dist[i]);
    any_e |= !out.e_idx[i].empty();
    any_c |= !out.c_idx[i].empty();
  }
  if (!any_e)
    throw ConfigError("select_counterfactuals: no same-label cross-group pair exists; "
                      "the fairness objective is undefined");
  if (!any_c)
    throw ConfigError("select_counterfactuals: no cross-label same-group pair exists; "
                      "the fairness objective is undefined");
  return out;
}

// Uniform-random eligible candidates, the baseline for selection quality.
inline CFIndex select_random_counterfactuals(const FullLabels& labels,
                                             const std::vector<int>& sens, int k,
                                             CandidatePool pool, const SplitMask& split,
                                             std::uint64_t seed) {
  const int n = static_cast<int>(sens.size());
  if (k < 1) throw ValidationError("select_random_counterfactuals: K must be >= 1");
  const auto buckets = cfsel_detail::bucket_candidates(labels, sens, pool, split);
  Rng rng(stream_key(seed, 0x72616e64ULL));
  CFIndex out;
  out.e_idx.resize(n);
  out.c_idx.resize(n);
  out.e_dist.resize(n);
  out.c_dist.resize(n);
  auto draw = [&](const std::vector<int>& bucket, std::vector<int>& into) {
    std::vector<int> pool_copy = bucket;
    const auto take = std::min<std::size_t>(k, pool_copy.size());
    for (std::size_t r = 0; r < take; ++r) {
      const auto pick = r + static_cast<std::size_t>(rng.below(pool_copy.size() - r));
      std::swap(pool_copy[r], pool_copy[pick]);
      into.push_back(pool_copy[r]);
    }
  };
  for (int i = 0; i < n; ++i) {
    const int y = labels.label[i], s = sens[i];
    draw(buckets[y * 2 + (1 - s)], out.e_idx[i]);
    draw(buckets[(1 - y) * 2 + s], out.c_idx[i]);
    out.e_dist[i].assign(out.e_idx[i].size(), 0.0);
    out.c_dist[i].assign(out.c_idx[i].size(), 0.0);
  }
  return out;
}

// Audit dump: node,kind,rank,candidate,distance.
inline void dump_cfindex_csv(const CFIndex& index, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path.string());
  out << "node,kind,rank,candidate,distance\n";
  for (int i = 0; i < index.n(); ++i) {
    for (std::size_t r = 0; r < index.e_idx[i].size(); ++r)
      out << i << ",e," << r << ',' << index.e_idx[i][r] << ','
          << csv::format_double(index.e_dist[i][r]) << '\n';
    for (std::size_t r = 0; r < index.c_idx[i].size(); ++r)
      out << i << ",c," << r << ',' << index.c_idx[i][r] << ','
          << csv::format_double(index.c_dist[i][r]) << '\n';
  }
}

}  // namespace caf
