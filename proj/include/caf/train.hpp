#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "caf/autodiff.hpp"
#include "caf/cfselect.hpp"
#include "caf/encoder.hpp"
#include "caf/errors.hpp"
#include "caf/graph.hpp"
#include "caf/losses.hpp"
#include "caf/metrics.hpp"

#include <json.hpp>

namespace caf {

struct TrainConfig {
  double alpha = 1.0;
  double beta = 5.0;
  double gamma = 0.5;
  int k = 10;                     // counterfactuals per kind
  int refresh_period = 10;        // t
  DisMetric dis_metric = DisMetric::cosine_distance;
  Backbone backbone = Backbone::sage;
  int hidden = 16;
  int d_c = 8;                    // = d_e
  double learning_rate = 1e-3;
  double weight_decay = 1e-5;
  int pretrain_epochs = 200;
  int epochs = 1000;
  std::uint64_t seed = 0;
  CandidatePool cf_pool = CandidatePool::all;
  bool disable_pretrain = false;      // ablation NP
  bool enable_cf_selection = true;    // plain backbone runs switch this off
  bool random_selection = false;      // uniform eligible stand-ins instead of nearest
  bool standardize_features = true;   // z-score columns before encoding

  LossWeights loss_weights() const { return {alpha, beta, gamma, dis_metric}; }

  void validate() const {
    if (refresh_period < 1) throw ValidationError("train: refresh period t must be >= 1");
    if (k < 1) throw ValidationError("train: K must be >= 1");
    if (epochs < 0 || pretrain_epochs < 0)
      throw ValidationError("train: epoch counts must be non-negative");
  }
};

struct EpochStats {
  double l_pred = 0, l_inv = 0, l_suf = 0, total = 0;
  double val_auroc = std::numeric_limits<double>::quiet_NaN();
  bool refreshed = false;
};

// Per-column affine transform fitted on the training graph's features and
// applied to every graph the model encodes.
struct FeatureTransform {
  Matrix mean, inv_std;  // 1 x d2 each; identity when empty

  Matrix apply(const Matrix& features) const {
    if (mean.size() == 0) return features;
    Matrix out = features;
    for (int i = 0; i < out.rows(); ++i)
      for (int j = 0; j < out.cols(); ++j)
        out(i, j) = (out(i, j) - mean(0, j)) * inv_std(0, j);
    return out;
  }

  static FeatureTransform fit(const Matrix& features) {
    FeatureTransform t;
    t.mean = Matrix(1, features.cols());
    t.inv_std = Matrix(1, features.cols());
    for (int j = 0; j < features.cols(); ++j) {
      double sum = 0;
      for (int i = 0; i < features.rows(); ++i) sum += features(i, j);
      const double mu = sum / features.rows();
      double sq = 0;
      for (int i = 0; i < features.rows(); ++i) {
        const double d = features(i, j) - mu;
        sq += d * d;
      }
      const double sd = std::sqrt(sq / features.rows());
      t.mean(0, j) = mu;
      t.inv_std(0, j) = 1.0 / (sd + 1e-12);
    }
    return t;
  }
};

struct TrainedModel {
  ParamSet encoder;  // validation-selected checkpoint
  HeadParams head;
  ParamSet final_encoder;  // parameters after the last step
  HeadParams final_head;
  CFIndex cf_index;        // last refresh during training
  FullLabels full_labels;  // frozen pseudo-labels used for selection
  FeatureTransform feature_transform;
  std::vector<EpochStats> history;
  EncoderConfig encoder_config;
  int best_epoch = -1;

  // Encoder forward pass on any graph, with the training-time transform.
  Representation encode_graph(const Graph& g, const GraphOps* ops = nullptr) const {
    Graph view = g;
    view.features = feature_transform.apply(g.features);
    return encode(view, encoder_config, encoder, ops);
  }
};

// Adaptive-moment gradient descent with additive L2 weight decay,
// moments 0.9/0.999, epsilon 1e-8.
class AdamOptimizer {
 public:
  AdamOptimizer(double learning_rate, double weight_decay)
      : lr_(learning_rate), wd_(weight_decay) {}

  void step(std::vector<Matrix*> params, const std::vector<Matrix>& grads) {
    if (m_.empty()) {
      for (const auto* p : params) {
        m_.emplace_back(p->rows(), p->cols());
        v_.emplace_back(p->rows(), p->cols());
      }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(kBeta1, t_);
    const double bc2 = 1.0 - std::pow(kBeta2, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      Matrix& p = *params[i];
      for (std::size_t j = 0; j < p.size(); ++j) {
        const double g = grads[i].data()[j] + wd_ * p.data()[j];
        double& m = m_[i].data()[j];
        double& v = v_[i].data()[j];
        m = kBeta1 * m + (1.0 - kBeta1) * g;
        v = kBeta2 * v + (1.0 - kBeta2) * g * g;
        p.data()[j] -= lr_ * (m / bc1) / (std::sqrt(v / bc2) + kEps);
      }
    }
  }

  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

 private:
  double lr_, wd_;
  std::int64_t t_ = 0;
  std::vector<Matrix> m_, v_;
};

namespace train_detail {

struct ModelState {
  EncoderConfig enc_cfg;
  ParamSet encoder;
  HeadParams head;

  std::vector<Matrix*> param_ptrs() {
    std::vector<Matrix*> ptrs;
    for (auto& [name, m] : encoder.tensors) ptrs.push_back(&m);
    ptrs.push_back(&head.weight);
    ptrs.push_back(&head.bias);
    return ptrs;
  }
};

struct ForwardNodes {
  int h = -1, content = -1, environment = -1, logits = -1;
};

inline ForwardNodes build_forward(ad::Tape& tape, const Graph& g, const GraphOps& ops,
                                  ModelState& state, std::vector<int>& leaf_ids) {
  leaf_ids.clear();
  for (auto& [name, m] : state.encoder.tensors) leaf_ids.push_back(tape.input(m));
  const int head_w = tape.input(state.head.weight);
  const int head_b = tape.input(state.head.bias);
  leaf_ids.push_back(head_w);
  leaf_ids.push_back(head_b);
  ForwardNodes nodes;
  const int x = tape.constant(g.features);
  const std::vector<int> enc_ids(leaf_ids.begin(), leaf_ids.end() - 2);
  nodes.h = encode_on_tape(tape, ops, state.enc_cfg, x, enc_ids);
  nodes.content = tape.slice_columns(nodes.h, 0, state.enc_cfg.d_c);
  nodes.environment = tape.slice_columns(nodes.h, state.enc_cfg.d_c, state.enc_cfg.out_dim());
  nodes.logits = classify_on_tape(tape, nodes.content, head_w, head_b);
  return nodes;
}

inline std::vector<Matrix> collect_grads(const ad::Tape& tape, const std::vector<int>& leaf_ids) {
  std::vector<Matrix> grads;
  grads.reserve(leaf_ids.size());
  for (int id : leaf_ids) grads.push_back(tape.grad(id));
  return grads;
}

// Validation AUROC from current parameters; empty when undefined
// (no val nodes or a single class).
inline std::optional<double> validation_auroc(const Graph& g, const GraphOps& ops,
                                              const ModelState& state) {
  if (g.split.val.empty()) return std::nullopt;
  const Representation r = encode(g, state.enc_cfg, state.encoder, &ops);
  const auto [c, e] = split_repr(r);
  const auto probs = class1_probabilities(classify(c, state.head));
  std::vector<double> scores;
  std::vector<int> labels;
  for (int i : g.split.val) {
    scores.push_back(probs[i]);
    labels.push_back(g.labels[i]);
  }
  try {
    return auroc(scores, labels);
  } catch (const ValidationError&) {
    return std::nullopt;
  }
}

inline ModelState init_state(const Graph& g, const TrainConfig& cfg) {
  ModelState state;
  state.enc_cfg = {cfg.backbone, g.features.cols(), cfg.hidden, cfg.d_c};
  state.encoder = init_encoder_params(state.enc_cfg, cfg.seed);
  state.head = init_head_params(state.enc_cfg, cfg.seed);
  return state;
}

inline std::pair<Graph, FeatureTransform> training_view(const Graph& g, const TrainConfig& cfg) {
  if (!cfg.standardize_features) return {g, FeatureTransform{}};
  const FeatureTransform t = FeatureTransform::fit(g.features);
  Graph view = g;
  view.features = t.apply(g.features);
  return {std::move(view), t};
}

}  // namespace train_detail

// Full-batch gradient descent on the prediction loss alone; the warm start
// for the main phase.
inline std::pair<ParamSet, HeadParams> pretrain(const Graph& g_in, const TrainConfig& cfg) {
  cfg.validate();
  if (g_in.split.train.empty()) throw ValidationError("pretrain: empty train mask");
  const auto [g, transform] = train_detail::training_view(g_in, cfg);
  auto state = train_detail::init_state(g, cfg);
  const GraphOps ops = build_graph_ops(g);
  AdamOptimizer opt(cfg.learning_rate, cfg.weight_decay);
  for (int epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
    ad::Tape tape;
    std::vector<int> leaf_ids;
    const auto nodes = train_detail::build_forward(tape, g, ops, state, leaf_ids);
    const int loss = prediction_loss_on_tape(tape, nodes.logits, g);
    if (!std::isfinite(tape.value(loss)(0, 0)))
      throw ValidationError("pretrain: non-finite loss at epoch " + std::to_string(epoch));
    tape.backward(loss);
    opt.step(state.param_ptrs(), train_detail::collect_grads(tape, leaf_ids));
  }
  return {std::move(state.encoder), std::move(state.head)};
}

// Algorithm: pretrain (unless disabled), freeze pseudo-labels from the
// warm-started model, then per epoch: forward, refresh the counterfactual
// index every t epochs (epoch 0 included), step on
// L_pred + alpha L_inv + beta L_suf. The reported parameters are the best
// validation-AUROC checkpoint; the post-loop parameters are kept as well.
inline TrainedModel train_caf(const Graph& g_in, const TrainConfig& cfg) {
  cfg.validate();
  if (g_in.split.train.empty()) throw ValidationError("train_caf: empty train mask");
  const auto [g, transform] = train_detail::training_view(g_in, cfg);
  auto state = train_detail::init_state(g, cfg);
  if (!cfg.disable_pretrain) {
    auto [enc, head] = pretrain(g_in, cfg);
    state.encoder = std::move(enc);
    state.head = std::move(head);
  }
  const GraphOps ops = build_graph_ops(g);

  TrainedModel model;
  model.encoder_config = state.enc_cfg;
  model.feature_transform = transform;

  // Pseudo-labels come from the warm-started model, once.
  {
    const Representation r = encode(g, state.enc_cfg, state.encoder, &ops);
    const auto [c, e] = split_repr(r);
    model.full_labels = pseudo_labels(classify(c, state.head), g);
  }

  const EdgeSet pos = positive_edges(g);
  const LossWeights weights = cfg.loss_weights();
  AdamOptimizer opt(cfg.learning_rate, cfg.weight_decay);
  CFIndex cf_index;
  bool have_index = false;
  double best_val = -std::numeric_limits<double>::infinity();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    ad::Tape tape;
    std::vector<int> leaf_ids;
    const auto nodes = train_detail::build_forward(tape, g, ops, state, leaf_ids);

    EpochStats stats;
    if (cfg.enable_cf_selection && epoch % cfg.refresh_period == 0) {
      cf_index = cfg.random_selection
                     ? select_random_counterfactuals(
                           model.full_labels, g.sens, cfg.k, cfg.cf_pool, g.split,
                           cfg.seed + static_cast<std::uint64_t>(epoch))
                     : select_counterfactuals(tape.value(nodes.h), model.full_labels, g.sens,
                                              cfg.k, cfg.cf_pool, g.split);
      have_index = true;
      stats.refreshed = true;
    }

    const int l_pred = prediction_loss_on_tape(tape, nodes.logits, g);
    const EdgeSet neg = sample_negative_edges(
        g, static_cast<int>(pos.pairs.size()), cfg.seed + static_cast<std::uint64_t>(epoch));
    const PairBatch batch = make_pair_batch(pos, neg, g.n);
    const int l_suf = sufficiency_loss_on_tape(tape, nodes.h, batch);
    InvariancePairs inv_pairs;
    int l_inv;
    if (have_index) {
      inv_pairs = make_invariance_pairs(cf_index, g.n);
      l_inv = invariance_loss_on_tape(tape, nodes.content, nodes.environment, inv_pairs, weights);
    } else {
      l_inv = tape.constant(Matrix(1, 1, 0.0));
    }
    const int total = total_loss_on_tape(tape, l_pred, l_inv, l_suf, weights);

    stats.l_pred = tape.value(l_pred)(0, 0);
    stats.l_inv = tape.value(l_inv)(0, 0);
    stats.l_suf = tape.value(l_suf)(0, 0);
    stats.total = tape.value(total)(0, 0);
    if (!std::isfinite(stats.total))
      throw ValidationError("train_caf: non-finite loss at epoch " + std::to_string(epoch));

    tape.backward(total);
    opt.step(state.param_ptrs(), train_detail::collect_grads(tape, leaf_ids));

    const auto val = train_detail::validation_auroc(g, ops, state);
    if (val) {
      stats.val_auroc = *val;
      if (*val > best_val) {
        best_val = *val;
        model.encoder = state.encoder;
        model.head = state.head;
        model.best_epoch = epoch;
      }
    }
    model.history.push_back(stats);
  }

  model.final_encoder = state.encoder;
  model.final_head = state.head;
  if (model.best_epoch < 0) {  // no usable validation signal
    model.encoder = state.encoder;
    model.head = state.head;
  }
  model.cf_index = std::move(cf_index);
  return model;
}

// Checkpoint directory: parameter manifests, the resolved config, and the
// per-epoch history.
inline void save_checkpoint(const TrainedModel& model, const TrainConfig& cfg,
                            const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  save_params(model.encoder, model.head, model.encoder_config, dir / "model");
  nlohmann::json j{{"alpha", cfg.alpha},
                   {"beta", cfg.beta},
                   {"gamma", cfg.gamma},
                   {"k", cfg.k},
                   {"t", cfg.refresh_period},
                   {"dis_metric", dis_metric_name(cfg.dis_metric)},
                   {"backbone", backbone_name(cfg.backbone)},
                   {"hidden", cfg.hidden},
                   {"d_c", cfg.d_c},
                   {"learning_rate", cfg.learning_rate},
                   {"weight_decay", cfg.weight_decay},
                   {"pretrain_epochs", cfg.pretrain_epochs},
                   {"epochs", cfg.epochs},
                   {"seed", cfg.seed},
                   {"cf_pool", cfg.cf_pool == CandidatePool::all ? "all" : "train"},
                   {"disable_pretrain", cfg.disable_pretrain},
                   {"enable_cf_selection", cfg.enable_cf_selection},
                   {"best_epoch", model.best_epoch}};
  std::ofstream cfg_out(dir / "config.json");
  cfg_out << j.dump(2) << '\n';
  std::ofstream hist(dir / "history.csv");
  hist << "epoch,l_pred,l_inv,l_suf,total,val_auroc\n";
  for (std::size_t e = 0; e < model.history.size(); ++e) {
    const auto& s = model.history[e];
    hist << e << ',' << csv::format_double(s.l_pred) << ',' << csv::format_double(s.l_inv)
         << ',' << csv::format_double(s.l_suf) << ',' << csv::format_double(s.total) << ','
         << csv::format_double(s.val_auroc) << '\n';
  }
}

}  // namespace caf
