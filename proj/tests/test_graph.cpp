#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>

#include "caf/graph.hpp"

using namespace caf;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  static int counter = 0;
  auto dir = fs::temp_directory_path() / ("caf_graph_test_" + std::to_string(counter++));
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

Graph tiny_graph(int n, const std::vector<std::pair<int, int>>& edges,
                 std::vector<int> labels = {}, std::vector<int> sens = {}) {
  if (labels.empty()) labels.assign(n, 0);
  if (sens.empty()) sens.assign(n, 0);
  Matrix feats(n, 2);
  for (int i = 0; i < n; ++i) {
    feats(i, 0) = i;
    feats(i, 1) = -i;
  }
  return make_graph(n, edges, feats, sens, labels);
}

}  // namespace

TEST_CASE("load_graph parses a 3-node file") {
  auto dir = temp_dir();
  write_file(dir / "nodes.csv",
             "id,feat_0,feat_1,sens,label\n"
             "0,1.5,2.0,0,1\n"
             "1,-1.0,0.25,1,0\n"
             "2,0.0,3.0,0,-1\n");
  write_file(dir / "edges.csv", "src,dst\n0,1\n");
  const Graph g = load_graph(dir / "nodes.csv", dir / "edges.csv");
  REQUIRE(g.n == 3);
  REQUIRE(g.features.cols() == 2);
  CHECK(g.features(0, 0) == 1.5);
  CHECK(std::vector<int>(g.neighbors(0).begin(), g.neighbors(0).end()) == std::vector<int>{1});
  CHECK(std::vector<int>(g.neighbors(1).begin(), g.neighbors(1).end()) == std::vector<int>{0});
  CHECK(g.neighbors(2).empty());
  CHECK(g.labels == std::vector<int>{1, 0, -1});

  SECTION("unlabeled node never lands in a split") {
    const auto mask = split_nodes(g, 1.0, 0.0, 0.0, 7);
    CHECK(mask.train == std::vector<int>{0, 1});
    CHECK(mask.val.empty());
    CHECK(mask.test.empty());
  }
}

TEST_CASE("load_graph symmetrizes and dedups both orientations") {
  auto dir = temp_dir();
  write_file(dir / "nodes.csv",
             "id,feat_0,sens,label\n0,0,0,0\n1,0,0,1\n");
  write_file(dir / "edges.csv", "src,dst\n0,1\n1,0\n");
  const Graph g = load_graph(dir / "nodes.csv", dir / "edges.csv");
  CHECK(g.edge_count() == 1);
  CHECK(g.degree(0) == 1);
  CHECK(g.degree(1) == 1);
}

TEST_CASE("load_graph error paths") {
  auto dir = temp_dir();
  write_file(dir / "nodes.csv",
             "id,feat_0,sens,label\n0,0,0,0\n1,0,0\n");
  write_file(dir / "edges.csv", "src,dst\n");
  SECTION("column count mismatch names the line") {
    try {
      load_graph(dir / "nodes.csv", dir / "edges.csv");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find(":3") != std::string::npos);
    }
  }
  SECTION("sensitive value outside {0,1}") {
    write_file(dir / "nodes.csv", "id,feat_0,sens,label\n0,0,2,0\n");
    CHECK_THROWS_AS(load_graph(dir / "nodes.csv", dir / "edges.csv"), ValidationError);
  }
  SECTION("dangling edge id") {
    write_file(dir / "nodes.csv", "id,feat_0,sens,label\n0,0,0,0\n1,0,1,1\n");
    write_file(dir / "edges.csv", "src,dst\n0,5\n");
    CHECK_THROWS_AS(load_graph(dir / "nodes.csv", dir / "edges.csv"), ValidationError);
  }
}

TEST_CASE("graph save/load round-trips exactly") {
  auto dir = temp_dir();
  Matrix feats = Matrix::from_rows({{0.1, -2.5e-7}, {3.0, 4.125}, {1e16, 0.3333333333333333}});
  const Graph g = make_graph(3, {{0, 1}, {1, 2}}, feats, {0, 1, 1}, {1, 0, -1});
  save_graph(g, dir / "g");
  const Graph back = load_graph_dir(dir / "g");
  CHECK(back.n == g.n);
  CHECK(bit_equal(back.features, g.features));
  CHECK(back.sens == g.sens);
  CHECK(back.labels == g.labels);
  CHECK(back.row_ptr == g.row_ptr);
  CHECK(back.col_idx == g.col_idx);

  SECTION("checksum mismatch is rejected") {
    std::ofstream out(dir / "g" / "nodes.csv", std::ios::app);
    out << "tampered\n";
    out.close();
    CHECK_THROWS_AS(load_graph_dir(dir / "g"), ValidationError);
  }
}

TEST_CASE("adjacency is symmetric for generated graphs") {
  const Graph g = tiny_graph(6, {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 1}});
  int matched = 0;
  for (int i = 0; i < g.n; ++i)
    for (int j : g.neighbors(i))
      if (g.has_edge(j, i)) ++matched;
  CHECK(matched == static_cast<int>(g.col_idx.size()));
}

TEST_CASE("split_nodes honors ratio floors and determinism") {
  std::vector<int> labels(100, 0);
  for (int i = 0; i < 50; ++i) labels[i] = 1;
  Matrix feats(100, 1);
  const Graph g = make_graph(100, {{0, 1}}, feats, std::vector<int>(100, 0), labels);

  SECTION("50/25/25 on 100 labeled nodes") {
    const auto mask = split_nodes(g, 0.5, 0.25, 0.25, 3);
    CHECK(mask.train.size() == 50);
    CHECK(mask.val.size() == 25);
    CHECK(mask.test.size() == 25);
    std::set<int> all;
    for (const auto* part : {&mask.train, &mask.val, &mask.test})
      all.insert(part->begin(), part->end());
    CHECK(all.size() == 100);
  }
  SECTION("degenerate (1,0,0) split") {
    const auto mask = split_nodes(g, 1.0, 0.0, 0.0, 3);
    CHECK(mask.train.size() == 100);
    CHECK(mask.val.empty());
    CHECK(mask.test.empty());
  }
  SECTION("same seed reproduces, different seed differs") {
    const auto a = split_nodes(g, 0.5, 0.25, 0.25, 11);
    const auto b = split_nodes(g, 0.5, 0.25, 0.25, 11);
    const auto c = split_nodes(g, 0.5, 0.25, 0.25, 12);
    CHECK(a.train == b.train);
    CHECK(a.val == b.val);
    CHECK(a.test == b.test);
    CHECK(a.train != c.train);
  }
  SECTION("remainder goes to test") {
    std::vector<int> l101(101, 1);
    Matrix f101(101, 1);
    const Graph g101 = make_graph(101, {{0, 1}}, f101, std::vector<int>(101, 0), l101);
    const auto mask = split_nodes(g101, 0.5, 0.25, 0.25, 3);
    CHECK(mask.train.size() == 50);
    CHECK(mask.val.size() == 25);
    CHECK(mask.test.size() == 26);
  }
}

TEST_CASE("split_nodes rejects a graph with no labeled nodes") {
  Matrix feats(3, 1);
  const Graph g = make_graph(3, {{0, 1}}, feats, {0, 0, 0}, {-1, -1, -1});
  CHECK_THROWS_AS(split_nodes(g, 0.5, 0.25, 0.25, 1), ValidationError);
}

TEST_CASE("normalized_adjacency gcn-symmetric") {
  SECTION("single isolated node") {
    const Graph g = tiny_graph(1, {});
    const Csr s = normalized_adjacency(g, AdjNorm::gcn_symmetric);
    const Matrix d = csr_to_dense(s);
    CHECK(d(0, 0) == 1.0);
  }
  SECTION("two connected nodes give four 0.5 entries") {
    const Graph g = tiny_graph(2, {{0, 1}});
    const Matrix d = csr_to_dense(normalized_adjacency(g, AdjNorm::gcn_symmetric));
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) CHECK(d(i, j) == Catch::Approx(0.5).epsilon(1e-15));
  }
  SECTION("rows of a regular graph sum to one") {
    // 6-cycle: every node has degree 2.
    const Graph g = tiny_graph(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 0}});
    const Matrix d = csr_to_dense(normalized_adjacency(g, AdjNorm::gcn_symmetric));
    for (int i = 0; i < 6; ++i) {
      double row = 0;
      for (int j = 0; j < 6; ++j) row += d(i, j);
      CHECK(row == Catch::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("normalized_adjacency row-mean") {
  const Graph g = tiny_graph(4, {{0, 1}, {0, 2}});
  const Matrix d = csr_to_dense(normalized_adjacency(g, AdjNorm::row_mean));
  CHECK(d(0, 1) == 0.5);
  CHECK(d(0, 2) == 0.5);
  CHECK(d(0, 0) == 0.0);
  // isolated node 3: zero row
  for (int j = 0; j < 4; ++j) CHECK(d(3, j) == 0.0);
}

TEST_CASE("sample_negative_edges") {
  SECTION("complete graph, count 0") {
    const Graph g = tiny_graph(3, {{0, 1}, {0, 2}, {1, 2}});
    CHECK(sample_negative_edges(g, 0, 5).pairs.empty());
  }
  SECTION("path graph forces the only non-edge") {
    const Graph g = tiny_graph(3, {{0, 1}, {1, 2}});
    const auto neg = sample_negative_edges(g, 1, 5);
    REQUIRE(neg.pairs.size() == 1);
    CHECK(neg.pairs[0] == std::pair<int, int>{0, 2});
  }
  SECTION("empty graph on 4 nodes yields all C(4,2) pairs") {
    const Graph g = tiny_graph(4, {});
    const auto neg = sample_negative_edges(g, 6, 5);
    const std::vector<std::pair<int, int>> want = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
    CHECK(neg.pairs == want);
  }
  SECTION("count above available fails") {
    const Graph g = tiny_graph(3, {{0, 1}, {1, 2}});
    CHECK_THROWS_AS(sample_negative_edges(g, 2, 5), ValidationError);
  }
  SECTION("never intersects positives, across seeds") {
    const Graph g = tiny_graph(8, {{0, 1}, {1, 2}, {2, 3}, {4, 5}, {6, 7}, {0, 7}});
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto neg = sample_negative_edges(g, 10, seed);
      CHECK(neg.pairs.size() == 10);
      for (auto [i, j] : neg.pairs) {
        CHECK(i < j);
        CHECK(!g.has_edge(i, j));
      }
      const auto rerun = sample_negative_edges(g, 10, seed);
      CHECK(neg.pairs == rerun.pairs);
    }
  }
}

TEST_CASE("make_graph rejects self-loops and bad fields") {
  Matrix feats(2, 1);
  CHECK_THROWS_AS(make_graph(2, {{0, 0}}, feats, {0, 0}, {0, 1}), ValidationError);
  CHECK_THROWS_AS(make_graph(2, {{0, 1}}, feats, {0, 2}, {0, 1}), ValidationError);
  CHECK_THROWS_AS(make_graph(2, {{0, 1}}, feats, {0, 0}, {0, 3}), ValidationError);
  Matrix bad(2, 1);
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(make_graph(2, {{0, 1}}, bad, {0, 0}, {0, 1}), ValidationError);
}
