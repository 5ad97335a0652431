#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "caf/autodiff.hpp"
#include "caf/csv.hpp"
#include "caf/errors.hpp"
#include "caf/graph.hpp"
#include "caf/matrix.hpp"
#include "caf/rng.hpp"

#include <json.hpp>

namespace caf {

enum class Backbone { gcn, sage, gin };

inline const char* backbone_name(Backbone b) {
  switch (b) {
    case Backbone::gcn: return "gcn";
    case Backbone::sage: return "sage";
    case Backbone::gin: return "gin";
  }
  return "?";
}

inline Backbone backbone_from_name(const std::string& s) {
  if (s == "gcn") return Backbone::gcn;
  if (s == "sage") return Backbone::sage;
  if (s == "gin") return Backbone::gin;
  throw ValidationError("unknown backbone '" + s + "'");
}

// Named parameter tensors in a fixed order; the optimizer walks them by
// index, checkpoints by name.
struct ParamSet {
  std::vector<std::pair<std::string, Matrix>> tensors;

  Matrix& at(const std::string& name) {
    for (auto& [n, m] : tensors)
      if (n == name) return m;
    throw ValidationError("no parameter named '" + name + "'");
  }
  const Matrix& at(const std::string& name) const {
    for (const auto& [n, m] : tensors)
      if (n == name) return m;
    throw ValidationError("no parameter named '" + name + "'");
  }
};

inline bool bit_equal(const ParamSet& a, const ParamSet& b) {
  if (a.tensors.size() != b.tensors.size()) return false;
  for (std::size_t i = 0; i < a.tensors.size(); ++i)
    if (a.tensors[i].first != b.tensors[i].first ||
        !bit_equal(a.tensors[i].second, b.tensors[i].second))
      return false;
  return true;
}

// Two propagation layers with relu between, linear output of width
// d = d_c + d_e (content columns first).
struct EncoderConfig {
  Backbone backbone = Backbone::sage;
  int in_dim = 0;
  int hidden = 16;
  int d_c = 8;  // = d_e
  int out_dim() const { return 2 * d_c; }
};

struct Representation {
  Matrix H;
  int d_c = 0;
  int d_e() const { return H.cols() - d_c; }
};

struct HeadParams {
  Matrix weight;  // d_c x 2
  Matrix bias;    // 1 x 2
};

namespace enc_detail {

inline Matrix glorot(Rng& rng, int rows, int cols) {
  const double limit = std::sqrt(6.0 / (rows + cols));
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = (2.0 * rng.uniform() - 1.0) * limit;
  return m;
}

}  // namespace enc_detail

inline ParamSet init_encoder_params(const EncoderConfig& cfg, std::uint64_t seed) {
  Rng rng(stream_key(seed, 0x656e63ULL));
  ParamSet p;
  const int d = cfg.out_dim();
  auto add = [&](const std::string& name, int r, int c) {
    p.tensors.emplace_back(name, enc_detail::glorot(rng, r, c));
  };
  auto add_zeros = [&](const std::string& name, int r, int c) {
    p.tensors.emplace_back(name, Matrix(r, c));
  };
  switch (cfg.backbone) {
    case Backbone::gcn:
      add("l1.weight", cfg.in_dim, cfg.hidden);
      add_zeros("l1.bias", 1, cfg.hidden);
      add("l2.weight", cfg.hidden, d);
      add_zeros("l2.bias", 1, d);
      break;
    case Backbone::sage:
      add("l1.self", cfg.in_dim, cfg.hidden);
      add("l1.neigh", cfg.in_dim, cfg.hidden);
      add_zeros("l1.bias", 1, cfg.hidden);
      add("l2.self", cfg.hidden, d);
      add("l2.neigh", cfg.hidden, d);
      add_zeros("l2.bias", 1, d);
      break;
    case Backbone::gin:
      add_zeros("l1.eps", 1, 1);
      add("l1.mlp1", cfg.in_dim, cfg.hidden);
      add_zeros("l1.mlp1_bias", 1, cfg.hidden);
      add("l1.mlp2", cfg.hidden, cfg.hidden);
      add_zeros("l1.mlp2_bias", 1, cfg.hidden);
      add_zeros("l2.eps", 1, 1);
      add("l2.mlp1", cfg.hidden, d);
      add_zeros("l2.mlp1_bias", 1, d);
      add("l2.mlp2", d, d);
      add_zeros("l2.mlp2_bias", 1, d);
      break;
  }
  return p;
}

inline HeadParams init_head_params(const EncoderConfig& cfg, std::uint64_t seed) {
  Rng rng(stream_key(seed, 0x686561ULL));
  return {enc_detail::glorot(rng, cfg.d_c, 2), Matrix(1, 2)};
}

// Propagation operators of one graph, shared across epochs.
struct GraphOps {
  Csr gcn_norm;   // D^{-1/2}(A+I)D^{-1/2}
  Csr row_mean;   // neighbor averaging
  Csr adj_sum;    // plain adjacency
};

inline GraphOps build_graph_ops(const Graph& g) {
  return {normalized_adjacency(g, AdjNorm::gcn_symmetric),
          normalized_adjacency(g, AdjNorm::row_mean), adjacency_csr(g)};
}

// Builds the encoder forward pass on the tape. param_ids must align with
// init_encoder_params order. Returns the node holding H (n x 2*d_c).
inline int encode_on_tape(ad::Tape& tape, const GraphOps& ops, const EncoderConfig& cfg,
                          int features, const std::vector<int>& param_ids) {
  std::size_t next = 0;
  auto take = [&] { return param_ids.at(next++); };
  switch (cfg.backbone) {
    case Backbone::gcn: {
      const int w1 = take(), b1 = take(), w2 = take(), b2 = take();
      const int h1 = tape.relu(
          tape.add(tape.sparse_dense_matmul(ops.gcn_norm, tape.dense_matmul(features, w1)), b1));
      return tape.add(tape.sparse_dense_matmul(ops.gcn_norm, tape.dense_matmul(h1, w2)), b2);
    }
    case Backbone::sage: {
      const int w1s = take(), w1n = take(), b1 = take();
      const int w2s = take(), w2n = take(), b2 = take();
      const int mean1 = tape.sparse_dense_matmul(ops.row_mean, features);
      const int h1 = tape.relu(tape.add(
          tape.add(tape.dense_matmul(features, w1s), tape.dense_matmul(mean1, w1n)), b1));
      const int mean2 = tape.sparse_dense_matmul(ops.row_mean, h1);
      return tape.add(tape.add(tape.dense_matmul(h1, w2s), tape.dense_matmul(mean2, w2n)), b2);
    }
    case Backbone::gin: {
      auto gin_layer = [&](int x) {
        const int eps = take(), m1 = take(), m1b = take(), m2 = take(), m2b = take();
        const int agg = tape.add(tape.add(tape.sparse_dense_matmul(ops.adj_sum, x), x),
                                 tape.elementwise_multiply(x, eps));
        const int mid = tape.relu(tape.add(tape.dense_matmul(agg, m1), m1b));
        return tape.add(tape.dense_matmul(mid, m2), m2b);
      };
      const int h1 = tape.relu(gin_layer(features));
      return gin_layer(h1);
    }
  }
  throw ValidationError("encode: unknown backbone");
}

inline int classify_on_tape(ad::Tape& tape, int content, int weight, int bias) {
  return tape.add(tape.dense_matmul(content, weight), bias);
}

// Numeric forward pass: H = f(A, X).
inline Representation encode(const Graph& g, const EncoderConfig& cfg, const ParamSet& params,
                             const GraphOps* prebuilt = nullptr) {
  if (g.features.cols() != cfg.in_dim)
    throw ValidationError("encode: feature width " + std::to_string(g.features.cols()) +
                          " does not match configured input dim " + std::to_string(cfg.in_dim));
  GraphOps local;
  const GraphOps* ops = prebuilt;
  if (!ops) {
    local = build_graph_ops(g);
    ops = &local;
  }
  ad::Tape tape;
  const int x = tape.constant(g.features);
  std::vector<int> ids;
  ids.reserve(params.tensors.size());
  for (const auto& [name, m] : params.tensors) ids.push_back(tape.constant(m));
  const int h = encode_on_tape(tape, *ops, cfg, x, ids);
  return {tape.value(h), cfg.d_c};
}

// C = first d_c columns, E = the rest; concatenating them restores H.
inline std::pair<Matrix, Matrix> split_repr(const Representation& repr) {
  Matrix c(repr.H.rows(), repr.d_c), e(repr.H.rows(), repr.d_e());
  for (int r = 0; r < repr.H.rows(); ++r) {
    for (int j = 0; j < repr.d_c; ++j) c(r, j) = repr.H(r, j);
    for (int j = 0; j < repr.d_e(); ++j) e(r, j) = repr.H(r, repr.d_c + j);
  }
  return {std::move(c), std::move(e)};
}

inline Matrix classify(const Matrix& content, const HeadParams& head) {
  if (content.cols() != head.weight.rows())
    throw ValidationError("classify: content width does not match head");
  Matrix logits = matmul(content, head.weight);
  for (int r = 0; r < logits.rows(); ++r)
    for (int c = 0; c < 2; ++c) logits(r, c) += head.bias(0, c);
  return logits;
}

// Class-1 probability per row of a 2-column logit matrix.
inline std::vector<double> class1_probabilities(const Matrix& logits) {
  std::vector<double> out(logits.rows());
  for (int r = 0; r < logits.rows(); ++r) {
    const double d = logits(r, 0) - logits(r, 1);
    out[r] = d >= 0 ? std::exp(-d) / (1.0 + std::exp(-d)) : 1.0 / (1.0 + std::exp(d));
  }
  return out;
}

inline std::vector<int> argmax_predictions(const Matrix& logits) {
  std::vector<int> out(logits.rows());
  for (int r = 0; r < logits.rows(); ++r) out[r] = logits(r, 1) > logits(r, 0) ? 1 : 0;
  return out;
}

// Checkpoint: one CSV per tensor plus a manifest with names, shapes and
// encoder dims.
inline void save_params(const ParamSet& params, const HeadParams& head, const EncoderConfig& cfg,
                        const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json tensors = nlohmann::json::array();
  auto dump = [&](const std::string& name, const Matrix& m) {
    const std::string file = name + ".csv";
    csv::write_matrix(dir / file, m);
    tensors.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"file", file}});
  };
  for (const auto& [name, m] : params.tensors) dump(name, m);
  dump("head.weight", head.weight);
  dump("head.bias", head.bias);
  const nlohmann::json manifest{{"backbone", backbone_name(cfg.backbone)},
                                {"in_dim", cfg.in_dim},
                                {"hidden", cfg.hidden},
                                {"d_c", cfg.d_c},
                                {"tensors", tensors}};
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
}

inline std::tuple<ParamSet, HeadParams, EncoderConfig> load_params(
    const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw ParseError("cannot open " + (dir / "manifest.json").string());
  const auto manifest = nlohmann::json::parse(in);
  EncoderConfig cfg;
  cfg.backbone = backbone_from_name(manifest.at("backbone").get<std::string>());
  cfg.in_dim = manifest.at("in_dim").get<int>();
  cfg.hidden = manifest.at("hidden").get<int>();
  cfg.d_c = manifest.at("d_c").get<int>();
  ParamSet params;
  HeadParams head;
  for (const auto& t : manifest.at("tensors")) {
    const auto name = t.at("name").get<std::string>();
    Matrix m = csv::read_matrix(dir / t.at("file").get<std::string>());
    if (m.rows() != t.at("rows").get<int>() || m.cols() != t.at("cols").get<int>())
      throw ValidationError(dir.string() + ": tensor '" + name + "' shape mismatch");
    if (name == "head.weight")
      head.weight = std::move(m);
    else if (name == "head.bias")
      head.bias = std::move(m);
    else
      params.tensors.emplace_back(name, std::move(m));
  }
  return {std::move(params), std::move(head), cfg};
}

}  // namespace caf
