#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "caf/cfselect.hpp"

using namespace caf;

namespace {

Graph labeled_graph(std::vector<int> labels, std::vector<int> sens,
                    std::vector<int> train = {}) {
  const int n = static_cast<int>(labels.size());
  Matrix feats(n, 1);
  Graph g = make_graph(n, {{0, 1}}, feats, std::move(sens), std::move(labels));
  g.split.train = std::move(train);
  return g;
}

// Exhaustive reference: scan all (i, j), apply the constraints, sort by
// (distance, id), truncate to K. The implementation must match exactly.
CFIndex brute_force_select(const Matrix& h, const FullLabels& labels,
                           const std::vector<int>& sens, int k, CandidatePool pool,
                           const SplitMask& split) {
  const int n = h.rows();
  CFIndex out;
  out.e_idx.resize(n);
  out.c_idx.resize(n);
  out.e_dist.resize(n);
  out.c_dist.resize(n);
  auto in_pool = [&](int j) {
    return pool == CandidatePool::all ||
           std::binary_search(split.train.begin(), split.train.end(), j);
  };
  for (int i = 0; i < n; ++i) {
    std::vector<std::pair<double, int>> e_cand, c_cand;
    for (int j = 0; j < n; ++j) {
      if (!in_pool(j)) continue;
      double d = 0;
      for (int c = 0; c < h.cols(); ++c) {
        const double diff = h(i, c) - h(j, c);
        d += diff * diff;
      }
      if (labels.label[j] == labels.label[i] && sens[j] != sens[i]) e_cand.emplace_back(d, j);
      if (labels.label[j] != labels.label[i] && sens[j] == sens[i]) c_cand.emplace_back(d, j);
    }
    std::sort(e_cand.begin(), e_cand.end());
    std::sort(c_cand.begin(), c_cand.end());
    for (int r = 0; r < std::min<int>(k, e_cand.size()); ++r) {
      out.e_idx[i].push_back(e_cand[r].second);
      out.e_dist[i].push_back(e_cand[r].first);
    }
    for (int r = 0; r < std::min<int>(k, c_cand.size()); ++r) {
      out.c_idx[i].push_back(c_cand[r].second);
      out.c_dist[i].push_back(c_cand[r].first);
    }
  }
  return out;
}

bool index_equal(const CFIndex& a, const CFIndex& b) {
  return a.e_idx == b.e_idx && a.c_idx == b.c_idx && a.e_dist == b.e_dist &&
         a.c_dist == b.c_dist;
}

}  // namespace

TEST_CASE("pseudo_labels combines ground truth and argmax") {
  Graph g = labeled_graph({1, 0, -1}, {0, 1, 0}, /*train=*/{0});
  Matrix logits = Matrix::from_rows({{5.0, -5.0},   // argmax 0, but train label 1 wins
                                     {0.2, 1.7},    // argmax 1
                                     {0.4, 0.4}});  // tie -> 0
  const FullLabels fl = pseudo_labels(logits, g);
  CHECK(fl.label == std::vector<int>{1, 1, 0});
  CHECK(fl.is_pseudo == std::vector<bool>{false, true, true});
}

TEST_CASE("four-node worked example") {
  // H rows: h0=[0,0], h1=[1,0], h2=[0,1], h3=[5,5]
  // labels {0,0,1,0}, sens {0,1,0,1}
  const Matrix h = Matrix::from_rows({{0, 0}, {1, 0}, {0, 1}, {5, 5}});
  FullLabels labels{{0, 0, 1, 0}, std::vector<bool>(4, false)};
  const std::vector<int> sens{0, 1, 0, 1};
  const auto idx = select_counterfactuals(h, labels, sens, 1, CandidatePool::all, {});
  CHECK(idx.e_idx[0] == std::vector<int>{1});  // same label 0, different sens, nearest
  CHECK(idx.c_idx[0] == std::vector<int>{2});  // different label, same sens
  CHECK(idx.e_dist[0] == std::vector<double>{1.0});
  CHECK(idx.c_dist[0] == std::vector<double>{1.0});
}

TEST_CASE("ties break toward the lower node id") {
  // Candidates 1 and 2 sit at identical distance from node 0.
  const Matrix h = Matrix::from_rows({{0, 0}, {1, 0}, {-1, 0}, {0, 2}});
  FullLabels labels{{0, 0, 0, 1}, std::vector<bool>(4, false)};
  const std::vector<int> sens{0, 1, 1, 0};
  const auto idx = select_counterfactuals(h, labels, sens, 1, CandidatePool::all, {});
  CHECK(idx.e_idx[0] == std::vector<int>{1});
}

TEST_CASE("missing cross-group pairs raise a configuration error") {
  const Matrix h = Matrix::from_rows({{0, 0}, {1, 0}, {0, 1}});
  FullLabels labels{{0, 1, 0}, std::vector<bool>(3, false)};
  const std::vector<int> all_same_sens{0, 0, 0};
  CHECK_THROWS_AS(select_counterfactuals(h, labels, all_same_sens, 1, CandidatePool::all, {}),
                  ConfigError);
}

TEST_CASE("node with no eligible candidates of one kind gets an empty list") {
  // Node 3 is the only (label 1) node with sens 1; e-kind needs label 1
  // sens 0 (exists: node 2), c-kind needs label 0 sens 1 (exists: node 1).
  // Node 2 has label 1 sens 0: its e-candidates are label 1 sens 1 = {3}.
  const Matrix h = Matrix::from_rows({{0, 0}, {1, 0}, {0, 1}, {5, 5}});
  FullLabels labels{{0, 0, 1, 1}, std::vector<bool>(4, false)};
  const std::vector<int> sens{0, 1, 0, 1};
  const auto idx = select_counterfactuals(h, labels, sens, 2, CandidatePool::all, {});
  CHECK(idx.e_idx[2] == std::vector<int>{3});
  CHECK(idx.c_idx[2] == std::vector<int>{0});
  // node 0: c-kind wants label 1 sens 0 -> {2}; e-kind wants label 0 sens 1 -> {1}
  CHECK(idx.e_idx[0] == std::vector<int>{1});
  CHECK(idx.c_idx[0] == std::vector<int>{2});
}

TEST_CASE("matches the exhaustive oracle on random instances") {
  Rng rng(2024);
  for (int trial = 0; trial < 12; ++trial) {
    const int n = 20 + static_cast<int>(rng.below(80));
    const int d = 2 + static_cast<int>(rng.below(5));
    const int k = 1 + static_cast<int>(rng.below(6));
    Matrix h(n, d);
    for (std::size_t i = 0; i < h.size(); ++i) h.data()[i] = rng.normal();
    FullLabels labels;
    std::vector<int> sens(n);
    labels.label.resize(n);
    labels.is_pseudo.assign(n, false);
    for (int i = 0; i < n; ++i) {
      labels.label[i] = static_cast<int>(rng.below(2));
      sens[i] = static_cast<int>(rng.below(2));
    }
    // Force all four compositions to exist.
    labels.label[0] = 0; sens[0] = 0;
    labels.label[1] = 0; sens[1] = 1;
    labels.label[2] = 1; sens[2] = 0;
    labels.label[3] = 1; sens[3] = 1;
    SplitMask split;
    for (int i = 0; i < n; i += 2) split.train.push_back(i);
    for (CandidatePool pool : {CandidatePool::all, CandidatePool::train}) {
      const auto got = select_counterfactuals(h, labels, sens, k, pool, split);
      const auto want = brute_force_select(h, labels, sens, k, pool, split);
      REQUIRE(index_equal(got, want));
    }
  }
}

TEST_CASE("K=5 lists are prefixes of K=10 lists") {
  Rng rng(7);
  const int n = 60;
  Matrix h(n, 4);
  for (std::size_t i = 0; i < h.size(); ++i) h.data()[i] = rng.normal();
  FullLabels labels;
  std::vector<int> sens(n);
  labels.label.resize(n);
  labels.is_pseudo.assign(n, false);
  for (int i = 0; i < n; ++i) {
    labels.label[i] = static_cast<int>(rng.below(2));
    sens[i] = static_cast<int>(rng.below(2));
  }
  const auto k5 = select_counterfactuals(h, labels, sens, 5, CandidatePool::all, {});
  const auto k10 = select_counterfactuals(h, labels, sens, 10, CandidatePool::all, {});
  for (int i = 0; i < n; ++i) {
    REQUIRE(k10.e_idx[i].size() >= k5.e_idx[i].size());
    CHECK(std::equal(k5.e_idx[i].begin(), k5.e_idx[i].end(), k10.e_idx[i].begin()));
    CHECK(std::equal(k5.c_idx[i].begin(), k5.c_idx[i].end(), k10.c_idx[i].begin()));
  }
}

TEST_CASE("train pool restricts candidates to the train mask") {
  Rng rng(13);
  const int n = 40;
  Matrix h(n, 3);
  for (std::size_t i = 0; i < h.size(); ++i) h.data()[i] = rng.normal();
  FullLabels labels;
  std::vector<int> sens(n);
  labels.label.resize(n);
  labels.is_pseudo.assign(n, false);
  for (int i = 0; i < n; ++i) {
    labels.label[i] = i % 2;
    sens[i] = (i / 2) % 2;
  }
  SplitMask split;
  for (int i = 0; i < n / 2; ++i) split.train.push_back(i);
  const auto idx = select_counterfactuals(h, labels, sens, 3, CandidatePool::train, split);
  for (int i = 0; i < n; ++i) {
    for (int j : idx.e_idx[i]) CHECK(j < n / 2);
    for (int j : idx.c_idx[i]) CHECK(j < n / 2);
  }
}

TEST_CASE("random selection respects eligibility and is seeded") {
  FullLabels labels{{0, 0, 1, 1, 0, 1}, std::vector<bool>(6, false)};
  const std::vector<int> sens{0, 1, 0, 1, 1, 0};
  const auto a = select_random_counterfactuals(labels, sens, 2, CandidatePool::all, {}, 5);
  const auto b = select_random_counterfactuals(labels, sens, 2, CandidatePool::all, {}, 5);
  CHECK(a.e_idx == b.e_idx);
  for (int i = 0; i < 6; ++i) {
    for (int j : a.e_idx[i]) {
      CHECK(labels.label[j] == labels.label[i]);
      CHECK(sens[j] != sens[i]);
    }
    for (int j : a.c_idx[i]) {
      CHECK(labels.label[j] != labels.label[i]);
      CHECK(sens[j] == sens[i]);
    }
  }
}

TEST_CASE("debug dump writes the audit CSV") {
  const Matrix h = Matrix::from_rows({{0, 0}, {1, 0}, {0, 1}, {5, 5}});
  FullLabels labels{{0, 0, 1, 0}, std::vector<bool>(4, false)};
  const std::vector<int> sens{0, 1, 0, 1};
  const auto idx = select_counterfactuals(h, labels, sens, 1, CandidatePool::all, {});
  const auto path = std::filesystem::temp_directory_path() / "caf_cfindex.csv";
  dump_cfindex_csv(idx, path);
  const auto lines = csv::read_lines(path);
  REQUIRE(lines.size() > 1);
  CHECK(lines[0] == "node,kind,rank,candidate,distance");
  CHECK(lines[1] == "0,e,0,1,1");
}
