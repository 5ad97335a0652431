#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "caf/cfselect.hpp"
#include "caf/encoder.hpp"
#include "caf/errors.hpp"
#include "caf/graph.hpp"
#include "caf/metrics.hpp"
#include "caf/synthetic.hpp"
#include "caf/train.hpp"

#include <json.hpp>

namespace caf {

enum class Variant { caf, plain, caf_na, caf_nb, caf_np, caf_ns, random_cf };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::caf: return "caf";
    case Variant::plain: return "plain";
    case Variant::caf_na: return "caf-na";
    case Variant::caf_nb: return "caf-nb";
    case Variant::caf_np: return "caf-np";
    case Variant::caf_ns: return "caf-ns";
    case Variant::random_cf: return "random-cf";
  }
  return "?";
}

inline Variant variant_from_name(const std::string& s) {
  for (Variant v : {Variant::caf, Variant::plain, Variant::caf_na, Variant::caf_nb,
                    Variant::caf_np, Variant::caf_ns, Variant::random_cf})
    if (s == variant_name(v)) return v;
  throw ValidationError("unknown variant '" + s + "'");
}

// Variant switches over the base training configuration.
inline TrainConfig apply_variant(TrainConfig cfg, Variant v) {
  switch (v) {
    case Variant::caf:
      break;
    case Variant::plain:
      cfg.alpha = 0.0;
      cfg.beta = 0.0;
      cfg.enable_cf_selection = false;
      break;
    case Variant::caf_na:
      cfg.alpha = 0.0;
      break;
    case Variant::caf_nb:
      cfg.beta = 0.0;
      break;
    case Variant::caf_np:
      cfg.disable_pretrain = true;
      break;
    case Variant::caf_ns:
      cfg.cf_pool = CandidatePool::train;
      break;
    case Variant::random_cf:
      cfg.random_selection = true;
      break;
  }
  return cfg;
}

struct DatasetSpec {
  bool synthetic = true;
  SynthParams synth;               // seed is replaced by the run seed
  double mean_degree = 20.0;       // <= 0 keeps synth.edge_threshold as given
  std::filesystem::path dir;       // graph directory when !synthetic
};

struct SweepSpec {
  std::string axis;                // "alpha" or "beta"
  std::vector<double> values;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  TrainConfig train;
  Variant variant = Variant::caf;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  double split_train = 0.5, split_val = 0.25, split_test = 0.25;
  std::optional<SweepSpec> sweep;
  std::filesystem::path out = "runs";
};

// --- config (de)serialization -------------------------------------------

inline nlohmann::json train_config_to_json(const TrainConfig& t) {
  return {{"alpha", t.alpha},
          {"beta", t.beta},
          {"gamma", t.gamma},
          {"k", t.k},
          {"t", t.refresh_period},
          {"dis_metric", dis_metric_name(t.dis_metric)},
          {"backbone", backbone_name(t.backbone)},
          {"hidden", t.hidden},
          {"d_c", t.d_c},
          {"learning_rate", t.learning_rate},
          {"weight_decay", t.weight_decay},
          {"pretrain_epochs", t.pretrain_epochs},
          {"epochs", t.epochs},
          {"seed", t.seed},
          {"cf_pool", t.cf_pool == CandidatePool::all ? "all" : "train"},
          {"disable_pretrain", t.disable_pretrain},
          {"enable_cf_selection", t.enable_cf_selection},
          {"random_selection", t.random_selection},
          {"standardize_features", t.standardize_features}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig t;
  if (j.contains("alpha")) t.alpha = j.at("alpha").get<double>();
  if (j.contains("beta")) t.beta = j.at("beta").get<double>();
  if (j.contains("gamma")) t.gamma = j.at("gamma").get<double>();
  if (j.contains("k")) t.k = j.at("k").get<int>();
  if (j.contains("t")) t.refresh_period = j.at("t").get<int>();
  if (j.contains("dis_metric"))
    t.dis_metric = dis_metric_from_name(j.at("dis_metric").get<std::string>());
  if (j.contains("backbone"))
    t.backbone = backbone_from_name(j.at("backbone").get<std::string>());
  if (j.contains("hidden")) t.hidden = j.at("hidden").get<int>();
  if (j.contains("d_c")) t.d_c = j.at("d_c").get<int>();
  if (j.contains("learning_rate")) t.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("weight_decay")) t.weight_decay = j.at("weight_decay").get<double>();
  if (j.contains("pretrain_epochs")) t.pretrain_epochs = j.at("pretrain_epochs").get<int>();
  if (j.contains("epochs")) t.epochs = j.at("epochs").get<int>();
  if (j.contains("seed")) t.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("cf_pool")) t.cf_pool = pool_from_name(j.at("cf_pool").get<std::string>());
  if (j.contains("disable_pretrain")) t.disable_pretrain = j.at("disable_pretrain").get<bool>();
  if (j.contains("enable_cf_selection"))
    t.enable_cf_selection = j.at("enable_cf_selection").get<bool>();
  if (j.contains("random_selection")) t.random_selection = j.at("random_selection").get<bool>();
  if (j.contains("standardize_features"))
    t.standardize_features = j.at("standardize_features").get<bool>();
  return t;
}

inline nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json dataset;
  if (cfg.dataset.synthetic) {
    dataset["synthetic"] = {{"n", cfg.dataset.synth.n},
                            {"p", cfg.dataset.synth.p},
                            {"q", cfg.dataset.synth.q},
                            {"d1", cfg.dataset.synth.d1},
                            {"d2", cfg.dataset.synth.d2},
                            {"edge_threshold", cfg.dataset.synth.edge_threshold},
                            {"mean_degree", cfg.dataset.mean_degree}};
  } else {
    dataset["dir"] = cfg.dataset.dir.string();
  }
  nlohmann::json j{{"dataset", dataset},
                   {"train", train_config_to_json(cfg.train)},
                   {"variant", variant_name(cfg.variant)},
                   {"seeds", cfg.seeds},
                   {"split", {cfg.split_train, cfg.split_val, cfg.split_test}},
                   {"out", cfg.out.string()}};
  if (cfg.sweep) j["sweep"] = {{"axis", cfg.sweep->axis}, {"values", cfg.sweep->values}};
  return j;
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    if (d.contains("synthetic")) {
      const auto& s = d.at("synthetic");
      cfg.dataset.synthetic = true;
      if (s.contains("n")) cfg.dataset.synth.n = s.at("n").get<int>();
      if (s.contains("p")) cfg.dataset.synth.p = s.at("p").get<double>();
      if (s.contains("q")) cfg.dataset.synth.q = s.at("q").get<double>();
      if (s.contains("d1")) cfg.dataset.synth.d1 = s.at("d1").get<int>();
      if (s.contains("d2")) cfg.dataset.synth.d2 = s.at("d2").get<int>();
      if (s.contains("edge_threshold"))
        cfg.dataset.synth.edge_threshold = s.at("edge_threshold").get<double>();
      cfg.dataset.mean_degree =
          s.contains("mean_degree") ? s.at("mean_degree").get<double>() : 20.0;
    } else if (d.contains("dir")) {
      cfg.dataset.synthetic = false;
      cfg.dataset.dir = d.at("dir").get<std::string>();
    } else {
      throw ValidationError("config: dataset must name 'synthetic' or 'dir'");
    }
  }
  if (j.contains("train")) cfg.train = train_config_from_json(j.at("train"));
  if (j.contains("variant")) cfg.variant = variant_from_name(j.at("variant").get<std::string>());
  if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("split")) {
    const auto split = j.at("split").get<std::vector<double>>();
    if (split.size() != 3) throw ValidationError("config: split must have 3 ratios");
    cfg.split_train = split[0];
    cfg.split_val = split[1];
    cfg.split_test = split[2];
  }
  if (j.contains("sweep")) {
    SweepSpec sweep;
    sweep.axis = j.at("sweep").at("axis").get<std::string>();
    sweep.values = j.at("sweep").at("values").get<std::vector<double>>();
    cfg.sweep = sweep;
  }
  if (j.contains("out")) cfg.out = j.at("out").get<std::string>();
  // CI hook: CAF_SEED=1,2,3 overrides the seed list.
  if (const char* env = std::getenv("CAF_SEED")) {
    std::vector<std::uint64_t> seeds;
    std::string tok;
    for (const char* c = env;; ++c) {
      if (*c == ',' || *c == '\0') {
        if (!tok.empty()) seeds.push_back(std::stoull(tok));
        tok.clear();
        if (*c == '\0') break;
      } else {
        tok.push_back(*c);
      }
    }
    if (!seeds.empty()) cfg.seeds = seeds;
  }
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config " + path.string());
  return experiment_config_from_json(nlohmann::json::parse(in));
}

// --- running -------------------------------------------------------------

struct ResolvedDataset {
  Graph graph;  // factual graph with the split applied
  std::optional<SyntheticDataset> synth;
};

inline ResolvedDataset resolve_dataset(const ExperimentConfig& cfg, std::uint64_t seed) {
  ResolvedDataset out;
  if (cfg.dataset.synthetic) {
    SynthParams sp = cfg.dataset.synth;
    sp.seed = seed;
    out.synth = cfg.dataset.mean_degree > 0
                    ? generate_synthetic_with_mean_degree(sp, cfg.dataset.mean_degree)
                    : generate_synthetic(sp);
    out.graph = out.synth->factual;
  } else {
    out.graph = load_graph_dir(cfg.dataset.dir / "factual");
    std::error_code ec;
    if (std::filesystem::exists(cfg.dataset.dir / "params.json", ec))
      out.synth = load_dataset(cfg.dataset.dir);
  }
  out.graph.split = split_nodes(out.graph, cfg.split_train, cfg.split_val, cfg.split_test, seed);
  if (out.synth) out.synth->factual.split = out.graph.split;
  return out;
}

namespace harness_detail {

inline std::string fnv_digest(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

template <class T>
inline std::vector<T> gather(const std::vector<T>& values, const std::vector<int>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(values[i]);
  return out;
}

}  // namespace harness_detail

// Trains one variant on one resolved dataset and evaluates every
// applicable metric on the test mask.
inline MetricsReport evaluate_run(const ExperimentConfig& cfg, Variant variant,
                                  std::uint64_t seed, const ResolvedDataset& data,
                                  TrainedModel* model_out = nullptr) {
  TrainConfig tcfg = apply_variant(cfg.train, variant);
  tcfg.seed = seed;
  const Graph& g = data.graph;
  TrainedModel model = train_caf(g, tcfg);

  MetricsReport report;
  report.seed = seed;
  {
    ExperimentConfig resolved = cfg;
    resolved.variant = variant;
    resolved.train = tcfg;
    resolved.seeds = {seed};
    report.config_digest = harness_detail::fnv_digest(experiment_config_to_json(resolved).dump());
  }

  const GraphOps ops = build_graph_ops(g);
  const Representation repr = model.encode_graph(g, &ops);
  const auto [content, environment] = split_repr(repr);
  const Matrix logits = classify(content, model.head);
  const auto probs = class1_probabilities(logits);
  const auto preds = argmax_predictions(logits);

  const auto& test = g.split.test;
  std::vector<double> test_scores;
  for (int i : test) test_scores.push_back(probs[i]);
  const auto test_labels = harness_detail::gather(g.labels, test);
  const auto test_preds = harness_detail::gather(preds, test);
  const auto test_sens = harness_detail::gather(g.sens, test);

  report.auroc = auroc(test_scores, test_labels);
  report.f1 = f1_binary(test_preds, test_labels);
  report.delta_sp = delta_sp(test_preds, test_sens);
  try {
    report.delta_eo = delta_eo(test_preds, test_labels, test_sens);
  } catch (const ValidationError&) {
    // undefined when a group has no positives; reported as missing
  }

  if (data.synth) {
    const Representation repr_cf = model.encode_graph(data.synth->cf_sens);
    const auto [content_cf, env_cf] = split_repr(repr_cf);
    const auto preds_cf = argmax_predictions(classify(content_cf, model.head));
    report.delta_cf = delta_cf(test_preds, harness_detail::gather(preds_cf, test));

    if (tcfg.enable_cf_selection) {
      // Selection quality at the reported checkpoint: the model's nearest
      // stand-ins vs uniform-random eligible ones, same representations.
      const CFIndex selected = select_counterfactuals(repr.H, model.full_labels, g.sens, tcfg.k,
                                                      tcfg.cf_pool, g.split);
      report.cf_discrepancy = cf_discrepancy(repr.H, repr_cf.H, selected);
      const CFIndex random_index = select_random_counterfactuals(
          model.full_labels, g.sens, tcfg.k, tcfg.cf_pool, g.split, seed);
      report.cf_discrepancy_random = cf_discrepancy(repr.H, repr_cf.H, random_index);
    }
  }
  if (model_out) *model_out = std::move(model);
  return report;
}

inline nlohmann::json report_to_json(const MetricsReport& r, Variant variant,
                                     const nlohmann::json& resolved_config) {
  nlohmann::json j{{"variant", variant_name(variant)},
                   {"seed", r.seed},
                   {"config_digest", r.config_digest},
                   {"auroc", r.auroc},
                   {"f1", r.f1},
                   {"delta_sp", r.delta_sp},
                   {"config", resolved_config}};
  if (r.delta_eo) j["delta_eo"] = *r.delta_eo;
  if (r.delta_cf) j["delta_cf"] = *r.delta_cf;
  if (r.cf_discrepancy) j["cf_discrepancy"] = *r.cf_discrepancy;
  if (r.cf_discrepancy_random) j["cf_discrepancy_random"] = *r.cf_discrepancy_random;
  return j;
}

inline const std::vector<std::string>& metric_keys() {
  static const std::vector<std::string> keys = {
      "auroc",    "f1",       "delta_sp",       "delta_eo",
      "delta_cf", "cf_discrepancy", "cf_discrepancy_random"};
  return keys;
}

// Mean and sample standard deviation per metric, over the seeds where the
// metric is present.
struct Aggregate {
  struct Stat {
    double mean = 0, stddev = 0;
    int count = 0;
  };
  std::map<std::string, Stat> stats;
  int n_runs = 0;

  double mean_of(const std::string& key) const {
    const auto it = stats.find(key);
    if (it == stats.end() || it->second.count == 0)
      throw ValidationError("aggregate: metric '" + key + "' absent");
    return it->second.mean;
  }
};

inline Aggregate aggregate_json_reports(const std::vector<nlohmann::json>& reports) {
  if (reports.empty()) throw ValidationError("aggregate: no reports");
  Aggregate agg;
  agg.n_runs = static_cast<int>(reports.size());
  for (const auto& key : metric_keys()) {
    std::vector<double> values;
    for (const auto& r : reports)
      if (r.contains(key)) values.push_back(r.at(key).get<double>());
    if (values.empty()) continue;
    double sum = 0;
    for (double v : values) sum += v;
    const double mean = sum / values.size();
    double sq = 0;
    for (double v : values) sq += (v - mean) * (v - mean);
    const double stddev = values.size() > 1 ? std::sqrt(sq / (values.size() - 1)) : 0.0;
    agg.stats[key] = {mean, stddev, static_cast<int>(values.size())};
  }
  return agg;
}

inline nlohmann::json aggregate_to_json(const Aggregate& agg) {
  nlohmann::json j{{"n_runs", agg.n_runs}};
  for (const auto& [key, stat] : agg.stats)
    j[key] = {{"mean", stat.mean}, {"std", stat.stddev}, {"count", stat.count}};
  return j;
}

// Per-seed JSONs plus aggregate.json under `dir`.
inline Aggregate write_run_outputs(const std::vector<nlohmann::json>& reports,
                                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& r : reports) {
    const auto seed = r.at("seed").get<std::uint64_t>();
    std::ofstream out(dir / ("seed_" + std::to_string(seed) + ".json"));
    out << r.dump(2) << '\n';
  }
  const Aggregate agg = aggregate_json_reports(reports);
  std::ofstream out(dir / "aggregate.json");
  out << aggregate_to_json(agg).dump(2) << '\n';
  return agg;
}

// One variant, all seeds. Datasets are generated per seed and shared with
// nothing else; identical configs give byte-identical outputs.
inline Aggregate run_experiment(const ExperimentConfig& cfg) {
  if (cfg.seeds.empty()) throw ValidationError("run_experiment: no seeds");
  std::vector<nlohmann::json> reports;
  for (std::uint64_t seed : cfg.seeds) {
    const ResolvedDataset data = resolve_dataset(cfg, seed);
    const MetricsReport r = evaluate_run(cfg, cfg.variant, seed, data);
    ExperimentConfig resolved = cfg;
    resolved.train = apply_variant(cfg.train, cfg.variant);
    resolved.train.seed = seed;
    reports.push_back(report_to_json(r, cfg.variant, experiment_config_to_json(resolved)));
  }
  return write_run_outputs(reports, cfg.out);
}

// The §-style ablation matrix: caf plus its four switched-off variants on
// identical per-seed datasets. Returns (variant name, aggregate) rows.
inline std::vector<std::pair<std::string, Aggregate>> run_ablation(const ExperimentConfig& base) {
  const std::vector<Variant> variants = {Variant::caf, Variant::caf_na, Variant::caf_nb,
                                         Variant::caf_np, Variant::caf_ns};
  std::map<std::string, std::vector<nlohmann::json>> by_variant;
  for (std::uint64_t seed : base.seeds) {
    const ResolvedDataset data = resolve_dataset(base, seed);
    for (Variant v : variants) {
      const MetricsReport r = evaluate_run(base, v, seed, data);
      ExperimentConfig resolved = base;
      resolved.variant = v;
      resolved.train = apply_variant(base.train, v);
      resolved.train.seed = seed;
      by_variant[variant_name(v)].push_back(
          report_to_json(r, v, experiment_config_to_json(resolved)));
    }
  }
  std::vector<std::pair<std::string, Aggregate>> rows;
  for (Variant v : variants) {
    const auto name = variant_name(v);
    rows.emplace_back(name, write_run_outputs(by_variant[name], base.out / name));
  }
  return rows;
}

// Sweep one loss weight over a value list, same per-seed datasets at every
// point. Writes <axis>_<value>/ run dirs plus a sweep manifest.
inline std::vector<std::pair<double, Aggregate>> run_sweep(const ExperimentConfig& base,
                                                           const SweepSpec& sweep) {
  if (sweep.axis != "alpha" && sweep.axis != "beta")
    throw ValidationError("sweep: axis must be alpha or beta");
  auto value_dir = [&](double v) {
    std::string s = csv::format_double(v);
    return base.out / (sweep.axis + "_" + s);
  };
  std::map<std::string, std::vector<nlohmann::json>> by_value;
  for (std::uint64_t seed : base.seeds) {
    const ResolvedDataset data = resolve_dataset(base, seed);
    for (double value : sweep.values) {
      ExperimentConfig point = base;
      if (sweep.axis == "alpha")
        point.train.alpha = value;
      else
        point.train.beta = value;
      const MetricsReport r = evaluate_run(point, point.variant, seed, data);
      ExperimentConfig resolved = point;
      resolved.train = apply_variant(point.train, point.variant);
      resolved.train.seed = seed;
      by_value[csv::format_double(value)].push_back(
          report_to_json(r, point.variant, experiment_config_to_json(resolved)));
    }
  }
  std::vector<std::pair<double, Aggregate>> rows;
  for (double value : sweep.values)
    rows.emplace_back(value,
                      write_run_outputs(by_value[csv::format_double(value)], value_dir(value)));
  std::filesystem::create_directories(base.out);
  nlohmann::json manifest{{"axis", sweep.axis}, {"values", sweep.values}};
  std::ofstream out(base.out / "sweep_manifest.json");
  out << manifest.dump(2) << '\n';
  return rows;
}

// --- reporting -----------------------------------------------------------

namespace harness_detail {

// Table convention from the source material: rates shown x100 with two
// decimals; the representation discrepancy is left in raw units.
inline std::string fmt_stat(const std::string& key, const Aggregate::Stat& s) {
  char buf[64];
  if (key == "cf_discrepancy" || key == "cf_discrepancy_random")
    std::snprintf(buf, sizeof(buf), "%.4f±%.4f", s.mean, s.stddev);
  else
    std::snprintf(buf, sizeof(buf), "%.2f±%.2f", 100.0 * s.mean, 100.0 * s.stddev);
  return buf;
}

inline std::vector<nlohmann::json> load_seed_reports(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("seed_", 0) == 0 && entry.path().extension() == ".json")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<nlohmann::json> reports;
  for (const auto& f : files) {
    std::ifstream in(f);
    reports.push_back(nlohmann::json::parse(in));
  }
  return reports;
}

inline std::string header_label(const std::string& key) {
  if (key == "auroc") return "AUROC";
  if (key == "f1") return "F1";
  if (key == "delta_sp") return "ΔSP";
  if (key == "delta_eo") return "ΔEO";
  if (key == "delta_cf") return "δCF";
  if (key == "cf_discrepancy") return "CF-Discrepancy";
  if (key == "cf_discrepancy_random") return "CF-Discrepancy(random)";
  return key;
}

inline std::string table_row(const std::string& label, const Aggregate& agg,
                             const std::vector<std::string>& keys) {
  std::string row = "| " + label + " |";
  for (const auto& key : keys) {
    const auto it = agg.stats.find(key);
    row += ' ';
    row += (it == agg.stats.end() || it->second.count == 0) ? std::string("—")
                                                            : fmt_stat(key, it->second);
    row += " |";
  }
  return row;
}

}  // namespace harness_detail

// Renders a run directory (variant subdirectories, a sweep, or a flat seed
// list) into report.md; sweep directories additionally get one CSV per
// metric with (value, mean, std) rows.
inline std::string render_report(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  namespace hd = harness_detail;
  if (!fs::exists(dir)) throw ValidationError("render_report: no such directory " + dir.string());

  // Collect (label, aggregate) rows.
  std::vector<std::pair<std::string, Aggregate>> rows;
  std::optional<SweepSpec> sweep;
  if (fs::exists(dir / "sweep_manifest.json")) {
    std::ifstream in(dir / "sweep_manifest.json");
    const auto manifest = nlohmann::json::parse(in);
    SweepSpec s;
    s.axis = manifest.at("axis").get<std::string>();
    s.values = manifest.at("values").get<std::vector<double>>();
    sweep = s;
    for (double v : s.values) {
      const auto sub = dir / (s.axis + "_" + csv::format_double(v));
      rows.emplace_back(s.axis + "=" + csv::format_double(v),
                        aggregate_json_reports(hd::load_seed_reports(sub)));
    }
  } else {
    auto direct = hd::load_seed_reports(dir);
    if (!direct.empty()) {
      const auto label = direct.front().contains("variant")
                             ? direct.front().at("variant").get<std::string>()
                             : dir.filename().string();
      rows.emplace_back(label, aggregate_json_reports(direct));
    } else {
      std::vector<fs::path> subs;
      for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_directory() && !hd::load_seed_reports(entry.path()).empty())
          subs.push_back(entry.path());
      std::sort(subs.begin(), subs.end());
      for (const auto& sub : subs)
        rows.emplace_back(sub.filename().string(),
                          aggregate_json_reports(hd::load_seed_reports(sub)));
    }
  }
  if (rows.empty()) throw ValidationError("render_report: no per-seed reports under " +
                                          dir.string());

  // Keep only metrics that appear somewhere.
  std::vector<std::string> keys;
  for (const auto& key : metric_keys())
    for (const auto& [label, agg] : rows)
      if (agg.stats.count(key) && agg.stats.at(key).count > 0) {
        keys.push_back(key);
        break;
      }

  std::string md = "| Run |";
  for (const auto& key : keys) md += " " + hd::header_label(key) + " |";
  md += "\n|---|";
  for (std::size_t i = 0; i < keys.size(); ++i) md += "---|";
  md += "\n";
  for (const auto& [label, agg] : rows) md += hd::table_row(label, agg, keys) + "\n";

  std::ofstream out(dir / "report.md");
  out << md;

  if (sweep) {
    for (const auto& key : keys) {
      std::ofstream csv_out(dir / ("sweep_" + key + ".csv"));
      csv_out << "value,mean,std\n";
      for (std::size_t i = 0; i < sweep->values.size(); ++i) {
        const auto it = rows[i].second.stats.find(key);
        if (it == rows[i].second.stats.end() || it->second.count == 0) continue;
        csv_out << csv::format_double(sweep->values[i]) << ','
                << csv::format_double(it->second.mean) << ','
                << csv::format_double(it->second.stddev) << '\n';
      }
    }
  }
  return md;
}

}  // namespace caf
