#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "caf/csv.hpp"
#include "caf/errors.hpp"
#include "caf/matrix.hpp"
#include "caf/rng.hpp"

#include <json.hpp>

namespace caf {

struct SplitMask {
  std::vector<int> train, val, test;  // sorted, pairwise disjoint
};

// Immutable attributed graph: CSR adjacency (symmetric, no self-loops),
// features, binary sensitive attributes, labels with -1 = unlabeled.
struct Graph {
  int n = 0;
  std::vector<int> row_ptr{0};
  std::vector<int> col_idx;  // sorted within each row
  Matrix features;           // n x d2
  std::vector<int> sens;     // {0,1}
  std::vector<int> labels;   // {0,1,-1}
  SplitMask split;

  std::span<const int> neighbors(int i) const {
    return {col_idx.data() + row_ptr[i], col_idx.data() + row_ptr[i + 1]};
  }
  int degree(int i) const { return row_ptr[i + 1] - row_ptr[i]; }
  bool has_edge(int i, int j) const {
    const auto nb = neighbors(i);
    return std::binary_search(nb.begin(), nb.end(), j);
  }
  // Number of undirected edges.
  int edge_count() const { return static_cast<int>(col_idx.size()) / 2; }
};

// Unordered node pairs with i < j. For negative sets no pair is an edge.
struct EdgeSet {
  std::vector<std::pair<int, int>> pairs;
};

namespace detail {

inline std::vector<std::pair<int, int>> canonical_pairs(std::vector<std::pair<int, int>> pairs) {
  for (auto& [i, j] : pairs)
    if (i > j) std::swap(i, j);
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  return pairs;
}

inline void build_adjacency(Graph& g, const std::vector<std::pair<int, int>>& undirected) {
  std::vector<std::pair<int, int>> directed;
  directed.reserve(undirected.size() * 2);
  for (auto [i, j] : undirected) {
    directed.emplace_back(i, j);
    directed.emplace_back(j, i);
  }
  std::sort(directed.begin(), directed.end());
  g.row_ptr.assign(g.n + 1, 0);
  g.col_idx.clear();
  g.col_idx.reserve(directed.size());
  for (auto [i, j] : directed) {
    g.row_ptr[i + 1]++;
    g.col_idx.push_back(j);
  }
  for (int i = 0; i < g.n; ++i) g.row_ptr[i + 1] += g.row_ptr[i];
}

}  // namespace detail

// Assembles a Graph from an undirected pair list (either orientation, with
// duplicates allowed) and validates the domain invariants.
inline Graph make_graph(int n, const std::vector<std::pair<int, int>>& edges, Matrix features,
                        std::vector<int> sens, std::vector<int> labels) {
  if (n <= 0) throw ValidationError("graph: node count must be positive");
  if (features.rows() != n || static_cast<int>(sens.size()) != n ||
      static_cast<int>(labels.size()) != n)
    throw ValidationError("graph: field lengths disagree with node count");
  if (!all_finite(features)) throw ValidationError("graph: non-finite feature entry");
  for (int i = 0; i < n; ++i) {
    if (sens[i] != 0 && sens[i] != 1)
      throw ValidationError("graph: sensitive value outside {0,1} at node " + std::to_string(i));
    if (labels[i] != 0 && labels[i] != 1 && labels[i] != -1)
      throw ValidationError("graph: label outside {0,1,-1} at node " + std::to_string(i));
  }
  for (auto [i, j] : edges) {
    if (i < 0 || i >= n || j < 0 || j >= n)
      throw ValidationError("graph: dangling node id in edge (" + std::to_string(i) + "," +
                            std::to_string(j) + ")");
    if (i == j) throw ValidationError("graph: self-loop at node " + std::to_string(i));
  }
  Graph g;
  g.n = n;
  g.features = std::move(features);
  g.sens = std::move(sens);
  g.labels = std::move(labels);
  detail::build_adjacency(g, detail::canonical_pairs(edges));
  return g;
}

// Nodes CSV: id,feat_0,...,feat_{d2-1},sens,label with contiguous ids.
// Edges CSV: src,dst, one undirected edge per row, either orientation.
inline Graph load_graph(const std::filesystem::path& nodes_path,
                        const std::filesystem::path& edges_path) {
  const auto node_lines = csv::read_lines(nodes_path);
  if (node_lines.empty()) throw ParseError(nodes_path.string() + ": empty file");
  const auto header = csv::split_line(node_lines[0]);
  if (header.size() < 3 || header.front() != "id" || header[header.size() - 2] != "sens" ||
      header.back() != "label")
    throw ParseError(nodes_path.string() + ":1: expected header id,feat_*,sens,label");
  const int d2 = static_cast<int>(header.size()) - 3;
  const int n = static_cast<int>(node_lines.size()) - 1;
  if (n <= 0) throw ParseError(nodes_path.string() + ": no node rows");

  Matrix features(n, d2);
  std::vector<int> sens(n), labels(n);
  for (int i = 0; i < n; ++i) {
    const int line_no = i + 2;
    const auto cells = csv::split_line(node_lines[i + 1]);
    if (static_cast<int>(cells.size()) != d2 + 3)
      throw ParseError(nodes_path.string() + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(d2 + 3) + " columns, got " + std::to_string(cells.size()));
    const long id = csv::parse_int(cells[0], line_no, nodes_path.string());
    if (id != i)
      throw ValidationError(nodes_path.string() + ":" + std::to_string(line_no) +
                            ": ids must be contiguous 0..n-1, got " + std::to_string(id));
    for (int j = 0; j < d2; ++j)
      features(i, j) = csv::parse_double(cells[1 + j], line_no, nodes_path.string());
    const long s = csv::parse_int(cells[d2 + 1], line_no, nodes_path.string());
    if (s != 0 && s != 1)
      throw ValidationError(nodes_path.string() + ":" + std::to_string(line_no) +
                            ": sensitive value outside {0,1}");
    sens[i] = static_cast<int>(s);
    const long y = csv::parse_int(cells[d2 + 2], line_no, nodes_path.string());
    if (y != 0 && y != 1 && y != -1)
      throw ValidationError(nodes_path.string() + ":" + std::to_string(line_no) +
                            ": label outside {0,1,-1}");
    labels[i] = static_cast<int>(y);
  }

  const auto edge_lines = csv::read_lines(edges_path);
  if (edge_lines.empty() || csv::split_line(edge_lines[0]) != std::vector<std::string>{"src", "dst"})
    throw ParseError(edges_path.string() + ":1: expected header src,dst");
  std::vector<std::pair<int, int>> edges;
  edges.reserve(edge_lines.size());
  for (std::size_t r = 1; r < edge_lines.size(); ++r) {
    if (edge_lines[r].empty()) continue;
    const int line_no = static_cast<int>(r) + 1;
    const auto cells = csv::split_line(edge_lines[r]);
    if (cells.size() != 2)
      throw ParseError(edges_path.string() + ":" + std::to_string(line_no) +
                       ": expected 2 columns, got " + std::to_string(cells.size()));
    const long a = csv::parse_int(cells[0], line_no, edges_path.string());
    const long b = csv::parse_int(cells[1], line_no, edges_path.string());
    if (a < 0 || a >= n || b < 0 || b >= n)
      throw ValidationError(edges_path.string() + ":" + std::to_string(line_no) +
                            ": dangling node id");
    edges.emplace_back(static_cast<int>(a), static_cast<int>(b));
  }
  return make_graph(n, edges, std::move(features), std::move(sens), std::move(labels));
}

namespace detail {

inline std::uint64_t fnv1a(std::uint64_t h, const std::string& bytes) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string file_checksum(const std::filesystem::path& a, const std::filesystem::path& b) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : {a, b}) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    h = fnv1a(h, ss.str());
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace detail

// Serializes to dir/nodes.csv, dir/edges.csv, dir/meta.json.
inline void save_graph(const Graph& g, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "nodes.csv");
    out << "id";
    for (int j = 0; j < g.features.cols(); ++j) out << ",feat_" << j;
    out << ",sens,label\n";
    for (int i = 0; i < g.n; ++i) {
      out << i;
      for (int j = 0; j < g.features.cols(); ++j)
        out << ',' << csv::format_double(g.features(i, j));
      out << ',' << g.sens[i] << ',' << g.labels[i] << '\n';
    }
  }
  {
    std::ofstream out(dir / "edges.csv");
    out << "src,dst\n";
    for (int i = 0; i < g.n; ++i)
      for (int j : g.neighbors(i))
        if (i < j) out << i << ',' << j << '\n';
  }
  nlohmann::json meta{{"n", g.n},
                      {"d2", g.features.cols()},
                      {"checksum", detail::file_checksum(dir / "nodes.csv", dir / "edges.csv")}};
  std::ofstream out(dir / "meta.json");
  out << meta.dump(2) << '\n';
}

inline Graph load_graph_dir(const std::filesystem::path& dir) {
  std::ifstream meta_in(dir / "meta.json");
  if (!meta_in) throw ParseError("cannot open " + (dir / "meta.json").string());
  const auto meta = nlohmann::json::parse(meta_in);
  const auto sum = detail::file_checksum(dir / "nodes.csv", dir / "edges.csv");
  if (meta.at("checksum").get<std::string>() != sum)
    throw ValidationError(dir.string() + ": checksum mismatch");
  Graph g = load_graph(dir / "nodes.csv", dir / "edges.csv");
  if (g.n != meta.at("n").get<int>() || g.features.cols() != meta.at("d2").get<int>())
    throw ValidationError(dir.string() + ": meta.json disagrees with CSV contents");
  return g;
}

// Deterministic split of the labeled nodes. Sizes are floor(ratio * L)
// for train and val; test receives its floor plus the remainder of the
// assigned total.
inline SplitMask split_nodes(const Graph& g, double train_ratio, double val_ratio,
                             double test_ratio, std::uint64_t seed) {
  if (train_ratio < 0 || val_ratio < 0 || test_ratio < 0 ||
      train_ratio + val_ratio + test_ratio > 1.0 + 1e-12)
    throw ValidationError("split_nodes: ratios must be non-negative with sum <= 1");
  std::vector<int> labeled;
  for (int i = 0; i < g.n; ++i)
    if (g.labels[i] != -1) labeled.push_back(i);
  const auto L = static_cast<double>(labeled.size());
  if (labeled.empty()) throw ValidationError("split_nodes: no labeled nodes");

  const int n_train = static_cast<int>(std::floor(train_ratio * L));
  const int n_val = static_cast<int>(std::floor(val_ratio * L));
  const int n_total = static_cast<int>(std::floor((train_ratio + val_ratio + test_ratio) * L));
  const int n_test = n_total - n_train - n_val;
  if (n_train < 1) throw ValidationError("split_nodes: no labeled node lands in train");

  Rng rng(stream_key(seed, /*tag=*/0x73706c6974ULL));
  rng.shuffle(labeled);
  SplitMask mask;
  mask.train.assign(labeled.begin(), labeled.begin() + n_train);
  mask.val.assign(labeled.begin() + n_train, labeled.begin() + n_train + n_val);
  mask.test.assign(labeled.begin() + n_train + n_val, labeled.begin() + n_train + n_val + n_test);
  std::sort(mask.train.begin(), mask.train.end());
  std::sort(mask.val.begin(), mask.val.end());
  std::sort(mask.test.begin(), mask.test.end());
  return mask;
}

enum class AdjNorm { gcn_symmetric, row_mean };

// gcn_symmetric: D^{-1/2} (A+I) D^{-1/2} with D the degree of A+I.
// row_mean: row-stochastic neighbor averaging of A, zero row when isolated.
inline Csr normalized_adjacency(const Graph& g, AdjNorm scheme) {
  Csr s;
  s.rows = s.cols = g.n;
  s.row_ptr.assign(1, 0);
  if (scheme == AdjNorm::gcn_symmetric) {
    std::vector<double> inv_sqrt(g.n);
    for (int i = 0; i < g.n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(g.degree(i) + 1.0);
    for (int i = 0; i < g.n; ++i) {
      bool self_emitted = false;
      for (int j : g.neighbors(i)) {
        if (!self_emitted && j > i) {
          s.col_idx.push_back(i);
          s.values.push_back(inv_sqrt[i] * inv_sqrt[i]);
          self_emitted = true;
        }
        s.col_idx.push_back(j);
        s.values.push_back(inv_sqrt[i] * inv_sqrt[j]);
      }
      if (!self_emitted) {
        s.col_idx.push_back(i);
        s.values.push_back(inv_sqrt[i] * inv_sqrt[i]);
      }
      s.row_ptr.push_back(static_cast<int>(s.col_idx.size()));
    }
  } else {
    for (int i = 0; i < g.n; ++i) {
      const int deg = g.degree(i);
      for (int j : g.neighbors(i)) {
        s.col_idx.push_back(j);
        s.values.push_back(1.0 / deg);
      }
      s.row_ptr.push_back(static_cast<int>(s.col_idx.size()));
    }
  }
  return s;
}

// Plain adjacency as CSR with unit values (sum aggregation).
inline Csr adjacency_csr(const Graph& g) {
  Csr s;
  s.rows = s.cols = g.n;
  s.row_ptr = g.row_ptr;
  s.col_idx = g.col_idx;
  s.values.assign(g.col_idx.size(), 1.0);
  return s;
}

inline EdgeSet positive_edges(const Graph& g) {
  EdgeSet e;
  e.pairs.reserve(g.edge_count());
  for (int i = 0; i < g.n; ++i)
    for (int j : g.neighbors(i))
      if (i < j) e.pairs.emplace_back(i, j);
  return e;
}

// Uniform sample, without replacement, of unordered non-adjacent pairs.
// Output pairs are sorted; the sampled set is deterministic given seed.
inline EdgeSet sample_negative_edges(const Graph& g, int count, std::uint64_t seed) {
  if (count < 0) throw ValidationError("sample_negative_edges: negative count");
  const std::int64_t total_pairs = static_cast<std::int64_t>(g.n) * (g.n - 1) / 2;
  const std::int64_t available = total_pairs - g.edge_count();
  if (count > available)
    throw ValidationError("sample_negative_edges: requested " + std::to_string(count) +
                          " but only " + std::to_string(available) + " non-edges exist");
  EdgeSet out;
  if (count == 0) return out;
  Rng rng(stream_key(seed, /*tag=*/0x6e656765ULL));
  if (static_cast<std::int64_t>(count) * 3 >= available) {
    std::vector<std::pair<int, int>> non_edges;
    non_edges.reserve(static_cast<std::size_t>(available));
    for (int i = 0; i < g.n; ++i)
      for (int j = i + 1; j < g.n; ++j)
        if (!g.has_edge(i, j)) non_edges.emplace_back(i, j);
    for (int k = 0; k < count; ++k) {
      const auto pick = k + static_cast<std::size_t>(rng.below(non_edges.size() - k));
      std::swap(non_edges[k], non_edges[pick]);
    }
    out.pairs.assign(non_edges.begin(), non_edges.begin() + count);
  } else {
    std::unordered_set<std::int64_t> seen;
    seen.reserve(static_cast<std::size_t>(count) * 2);
    while (static_cast<int>(out.pairs.size()) < count) {
      int i = static_cast<int>(rng.below(g.n));
      int j = static_cast<int>(rng.below(g.n));
      if (i == j) continue;
      if (i > j) std::swap(i, j);
      if (g.has_edge(i, j)) continue;
      if (!seen.insert(static_cast<std::int64_t>(i) * g.n + j).second) continue;
      out.pairs.emplace_back(i, j);
    }
  }
  std::sort(out.pairs.begin(), out.pairs.end());
  return out;
}

}  // namespace caf
