#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "caf/csv.hpp"
#include "caf/errors.hpp"
#include "caf/graph.hpp"
#include "caf/matrix.hpp"
#include "caf/rng.hpp"

#include <json.hpp>

namespace caf {

// Biased-graph generation under the causal model S -> E -> G <- C <- Y.
// Every random draw is recorded (or re-derivable from a keyed counter
// stream), so intervening on s or y and re-running the same mechanism
// yields exact counterfactual graphs.

struct SynthParams {
  int n = 2000;
  double p = 0.5;          // Bernoulli(sensitive)
  double q = 0.5;          // Bernoulli(label)
  int d1 = 16;             // width of each latent block
  int d2 = 32;             // observed feature width
  double edge_threshold = 0.5;
  std::uint64_t seed = 0;

  void validate() const {
    if (n < 1 || d1 < 1 || d2 < 1)
      throw ValidationError("synth: n, d1, d2 must be >= 1");
    if (p < 0 || p > 1 || q < 0 || q > 1)
      throw ValidationError("synth: p, q must lie in [0,1]");
    if (edge_threshold <= 0 || edge_threshold >= 1)
      throw ValidationError("synth: edge_threshold must lie in (0,1)");
  }
};

// All randomness behind one generation. eta/nu/W/b are dense; the n x n
// edge noise is re-derived from a keyed counter stream instead of stored.
struct NoiseRecord {
  Matrix eta;  // n x d1, environment block noise
  Matrix nu;   // n x d1, content block noise
  Matrix W;    // d2 x 2*d1, entries 1 + N(0,1)
  Matrix b;    // n x d2
  std::uint64_t eps_seed = 0;

  double eps(int i, int j) const {
    const int lo = std::min(i, j), hi = std::max(i, j);
    return keyed_normal(stream_key(eps_seed, static_cast<std::uint64_t>(lo),
                                   static_cast<std::uint64_t>(hi)),
                        0);
  }
};

struct SyntheticDataset {
  SynthParams params;
  Graph factual;
  Matrix latent;  // n x 2*d1, [C | E]
  NoiseRecord noise;
  Graph cf_sens;   // all sensitive attributes flipped, same noise
  Graph cf_label;  // all labels flipped, same noise
};

enum class FlipKind { sensitive, label };

namespace synth_detail {

constexpr std::uint64_t kTagSens = 1;
constexpr std::uint64_t kTagLabel = 2;
constexpr std::uint64_t kTagW = 3;
constexpr std::uint64_t kTagB = 4;
constexpr std::uint64_t kTagNode = 5;
constexpr std::uint64_t kTagEps = 6;

inline double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// z_i = [y_i * 1 + nu_i | s_i * 1 + eta_i]
inline Matrix latent_matrix(const SynthParams& sp, const NoiseRecord& noise,
                            const std::vector<int>& sens, const std::vector<int>& labels) {
  Matrix z(sp.n, 2 * sp.d1);
  for (int i = 0; i < sp.n; ++i) {
    for (int k = 0; k < sp.d1; ++k) {
      z(i, k) = labels[i] + noise.nu(i, k);
      z(i, sp.d1 + k) = sens[i] + noise.eta(i, k);
    }
  }
  return z;
}

inline std::vector<double> row_norms(const Matrix& z) {
  std::vector<double> norms(z.rows());
  for (int i = 0; i < z.rows(); ++i) {
    double s = 0;
    for (int k = 0; k < z.cols(); ++k) s += z(i, k) * z(i, k);
    norms[i] = std::sqrt(s);
  }
  return norms;
}

// x_i = W z_i + b_i
inline Matrix observed_features(const NoiseRecord& noise, const Matrix& z) {
  Matrix x = matmul(z, transpose(noise.W));
  for (int i = 0; i < x.rows(); ++i)
    for (int j = 0; j < x.cols(); ++j) x(i, j) += noise.b(i, j);
  return x;
}

// Edge rule: sigmoid(cos(z_i, z_j) + eps_ij) >= threshold, i != j.
inline std::vector<std::pair<int, int>> edges_from_latent(const SynthParams& sp,
                                                          const NoiseRecord& noise,
                                                          const Matrix& z) {
  const auto norms = row_norms(z);
  for (int i = 0; i < sp.n; ++i)
    if (norms[i] == 0.0)
      throw ValidationError("synth: degenerate all-zero latent row " + std::to_string(i));
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < sp.n; ++i) {
    const double* zi = z.row(i);
    for (int j = i + 1; j < sp.n; ++j) {
      const double* zj = z.row(j);
      double dot = 0;
      for (int k = 0; k < z.cols(); ++k) dot += zi[k] * zj[k];
      const double score = sigmoid(dot / (norms[i] * norms[j]) + noise.eps(i, j));
      if (score >= sp.edge_threshold) edges.emplace_back(i, j);
    }
  }
  return edges;
}

inline Graph assemble_graph(const SynthParams& sp, const NoiseRecord& noise,
                            const std::vector<int>& sens, const std::vector<int>& labels,
                            Matrix* latent_out) {
  const Matrix z = latent_matrix(sp, noise, sens, labels);
  Matrix x = observed_features(noise, z);
  auto edges = edges_from_latent(sp, noise, z);
  if (latent_out) *latent_out = z;
  return make_graph(sp.n, edges, std::move(x), sens, labels);
}

}  // namespace synth_detail

// Rebuilds the graph from the stored noise with the whole sensitive (or
// label) vector flipped. Applying the same flip twice reproduces the
// original graph bit-exactly.
inline Graph materialize_counterfactual(const SynthParams& params, const NoiseRecord& noise,
                                        const std::vector<int>& sens,
                                        const std::vector<int>& labels, FlipKind flip) {
  std::vector<int> s = sens, y = labels;
  if (flip == FlipKind::sensitive) {
    for (auto& v : s) v = 1 - v;
  } else {
    for (auto& v : y)
      if (v != -1) v = 1 - v;
  }
  return synth_detail::assemble_graph(params, noise, s, y, nullptr);
}

namespace synth_detail {

struct Draws {
  std::vector<int> sens, labels;
  NoiseRecord noise;
};

inline Draws draw_generation(const SynthParams& params) {
  Draws d;
  d.sens.resize(params.n);
  d.labels.resize(params.n);
  {
    Rng rs(stream_key(params.seed, kTagSens));
    Rng ry(stream_key(params.seed, kTagLabel));
    for (int i = 0; i < params.n; ++i) {
      d.sens[i] = rs.uniform() < params.p ? 1 : 0;
      d.labels[i] = ry.uniform() < params.q ? 1 : 0;
    }
  }
  d.noise.eps_seed = stream_key(params.seed, kTagEps);
  {
    Rng rw(stream_key(params.seed, kTagW));
    d.noise.W = Matrix(params.d2, 2 * params.d1);
    for (std::size_t i = 0; i < d.noise.W.size(); ++i) d.noise.W.data()[i] = 1.0 + rw.normal();
    Rng rb(stream_key(params.seed, kTagB));
    d.noise.b = Matrix(params.n, params.d2);
    for (std::size_t i = 0; i < d.noise.b.size(); ++i) d.noise.b.data()[i] = rb.normal();
  }
  // Per-node latent noise; a node whose latent row comes out exactly zero
  // redraws from the next substream.
  d.noise.eta = Matrix(params.n, params.d1);
  d.noise.nu = Matrix(params.n, params.d1);
  for (int i = 0; i < params.n; ++i) {
    bool ok = false;
    for (std::uint64_t attempt = 0; attempt < 100 && !ok; ++attempt) {
      Rng rn(stream_key(params.seed, kTagNode, static_cast<std::uint64_t>(i), attempt));
      double norm2 = 0;
      for (int k = 0; k < params.d1; ++k) {
        d.noise.nu(i, k) = rn.normal();
        d.noise.eta(i, k) = rn.normal();
        const double c = d.labels[i] + d.noise.nu(i, k);
        const double e = d.sens[i] + d.noise.eta(i, k);
        norm2 += c * c + e * e;
      }
      ok = norm2 > 0.0;
    }
    if (!ok)
      throw ValidationError("synth: node " + std::to_string(i) +
                            " degenerate after 100 redraws");
  }
  return d;
}

}  // namespace synth_detail

inline SyntheticDataset generate_synthetic(const SynthParams& params) {
  using namespace synth_detail;
  params.validate();
  SyntheticDataset ds;
  ds.params = params;
  Draws d = draw_generation(params);
  ds.factual = assemble_graph(params, d.noise, d.sens, d.labels, &ds.latent);
  ds.noise = std::move(d.noise);
  ds.cf_sens = materialize_counterfactual(params, ds.noise, d.sens, d.labels, FlipKind::sensitive);
  ds.cf_label = materialize_counterfactual(params, ds.noise, d.sens, d.labels, FlipKind::label);
  return ds;
}

// Threshold at the score quantile of m = round(target * n / 2) pairs, so
// the generated graph lands on the requested mean degree.
inline double tune_edge_threshold(SynthParams params, double target_mean_degree) {
  using namespace synth_detail;
  if (target_mean_degree <= 0)
    throw ValidationError("synth: target mean degree must be positive");
  params.edge_threshold = 0.5;  // irrelevant to the score pass
  params.validate();
  const Draws d = draw_generation(params);
  const Matrix z = latent_matrix(params, d.noise, d.sens, d.labels);
  const auto norms = row_norms(z);
  const std::int64_t total = static_cast<std::int64_t>(params.n) * (params.n - 1) / 2;
  std::vector<double> scores;
  scores.reserve(static_cast<std::size_t>(total));
  for (int i = 0; i < params.n; ++i) {
    const double* zi = z.row(i);
    for (int j = i + 1; j < params.n; ++j) {
      const double* zj = z.row(j);
      double dot = 0;
      for (int k = 0; k < z.cols(); ++k) dot += zi[k] * zj[k];
      scores.push_back(sigmoid(dot / (norms[i] * norms[j]) + d.noise.eps(i, j)));
    }
  }
  std::int64_t m = std::llround(target_mean_degree * params.n / 2.0);
  m = std::clamp<std::int64_t>(m, 1, total);
  std::nth_element(scores.begin(), scores.begin() + (m - 1), scores.end(),
                   std::greater<double>());
  const double kth = scores[m - 1];
  double next_below = 0.0;
  for (std::int64_t i = m; i < total; ++i) next_below = std::max(next_below, scores[i]);
  // Midpoint keeps the >= comparison stable under re-evaluation.
  const double threshold = m == total ? kth : 0.5 * (kth + next_below);
  return std::clamp(threshold, 1e-12, 1.0 - 1e-12);
}

inline SyntheticDataset generate_synthetic_with_mean_degree(SynthParams params,
                                                            double target_mean_degree) {
  params.edge_threshold = tune_edge_threshold(params, target_mean_degree);
  return generate_synthetic(params);
}

// Directory layout: factual/, cf_sens/, cf_label/ (graph directories),
// latents.csv, noise/{W,b,eta,nu}.csv, params.json (with the eps stream
// key; the n x n noise is re-derived, never stored).
inline void save_dataset(const SyntheticDataset& ds, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "noise");
  save_graph(ds.factual, dir / "factual");
  save_graph(ds.cf_sens, dir / "cf_sens");
  save_graph(ds.cf_label, dir / "cf_label");
  csv::write_matrix(dir / "latents.csv", ds.latent);
  csv::write_matrix(dir / "noise" / "W.csv", ds.noise.W);
  csv::write_matrix(dir / "noise" / "b.csv", ds.noise.b);
  csv::write_matrix(dir / "noise" / "eta.csv", ds.noise.eta);
  csv::write_matrix(dir / "noise" / "nu.csv", ds.noise.nu);
  const nlohmann::json j{{"n", ds.params.n},
                         {"p", ds.params.p},
                         {"q", ds.params.q},
                         {"d1", ds.params.d1},
                         {"d2", ds.params.d2},
                         {"edge_threshold", ds.params.edge_threshold},
                         {"seed", ds.params.seed},
                         {"eps_seed", ds.noise.eps_seed}};
  std::ofstream out(dir / "params.json");
  out << j.dump(2) << '\n';
}

inline SyntheticDataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "params.json");
  if (!in) throw ParseError("cannot open " + (dir / "params.json").string());
  const auto j = nlohmann::json::parse(in);
  SyntheticDataset ds;
  ds.params.n = j.at("n").get<int>();
  ds.params.p = j.at("p").get<double>();
  ds.params.q = j.at("q").get<double>();
  ds.params.d1 = j.at("d1").get<int>();
  ds.params.d2 = j.at("d2").get<int>();
  ds.params.edge_threshold = j.at("edge_threshold").get<double>();
  ds.params.seed = j.at("seed").get<std::uint64_t>();
  ds.noise.eps_seed = j.at("eps_seed").get<std::uint64_t>();
  ds.factual = load_graph_dir(dir / "factual");
  ds.cf_sens = load_graph_dir(dir / "cf_sens");
  ds.cf_label = load_graph_dir(dir / "cf_label");
  ds.latent = csv::read_matrix(dir / "latents.csv");
  ds.noise.W = csv::read_matrix(dir / "noise" / "W.csv");
  ds.noise.b = csv::read_matrix(dir / "noise" / "b.csv");
  ds.noise.eta = csv::read_matrix(dir / "noise" / "eta.csv");
  ds.noise.nu = csv::read_matrix(dir / "noise" / "nu.csv");
  return ds;
}

}  // namespace caf
