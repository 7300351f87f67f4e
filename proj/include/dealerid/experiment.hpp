#pragma once

// Experiment runner: protocol x strategy grids, the decision-level baseline,
// and negative/positive ratio sweeps, driven by an INI-style config file.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "dealerid/classify.hpp"
#include "dealerid/core.hpp"
#include "dealerid/embed.hpp"
#include "dealerid/fusion.hpp"
#include "dealerid/pipeline.hpp"
#include "dealerid/synth.hpp"

namespace dealerid {

struct EmbeddingConfig {
  std::string provider = "synthetic";  // synthetic | file_backed
  std::size_t text_dim = kDefaultTextDim;
  std::size_t image_dim = kDefaultImageDim;
  std::filesystem::path text_dir;
  std::filesystem::path image_dir;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out;
  std::filesystem::path dataset;  // empty: generate from `synth`
  SynthSpec synth;
  double train_frac = 0.7;
  EmbeddingConfig embedding;
  std::vector<Protocol> protocols{Protocol::post_level, Protocol::homepage_level, Protocol::quadruple};
  std::vector<Strategy> strategies{Strategy::concat};
  bool decision_level = true;
  FusionConfig fusion;
  TrainConfig train;
  std::vector<double> np_ratios{2, 4, 6, 8};

  /// Pushes the master seed into every seeded component.
  void apply_seed(std::uint64_t s) {
    seed = s;
    synth.seed = s;
    train.seed = s;
    fusion.sketch_seed = s;
    fusion.fbc.seed = s;
  }

  void validate() const {
    train.validate();
    if (!(train_frac > 0.0 && train_frac < 1.0)) throw ConfigError("train_frac must lie in (0, 1)");
    if (protocols.empty() && !decision_level) throw ConfigError("no protocols requested");
    if (strategies.empty()) throw ConfigError("no strategies requested");
    for (double r : np_ratios)
      if (!(r >= 1.0)) throw ConfigError("np ratios must be >= 1");
    if (embedding.provider != "synthetic" && embedding.provider != "file_backed")
      throw ConfigError("unknown embedding provider: " + embedding.provider);
    if (embedding.provider == "file_backed" && (embedding.text_dir.empty() || embedding.image_dir.empty()))
      throw ConfigError("file_backed embeddings need text_dir and image_dir");
    if (embedding.text_dim == 0 || embedding.image_dim == 0) throw ConfigError("embedding dims must be positive");
    if (!dataset.empty() && !std::filesystem::exists(dataset))
      throw ConfigError("dataset not found: " + dataset.string());
    if (fusion.sketch_dim == 0) throw ConfigError("sketch_dim must be positive");
    if (fusion.fbc.k == 0 || fusion.fbc.r == 0 || !(fusion.fbc.lambda >= 0.0))
      throw ConfigError("fbc_k, fbc_r must be positive and fbc_lambda non-negative");
  }
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s + ",") {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  return out;
}

template <typename T>
T convert(const std::string& key, const std::string& v) {
  std::istringstream ss(v);
  T out{};
  if constexpr (std::is_same_v<T, bool>) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key + ": expected a boolean, got '" + v + "'");
  } else {
    if (!(ss >> out) || !(ss >> std::ws).eof()) throw ConfigError(key + ": cannot parse '" + v + "'");
    if constexpr (std::is_unsigned_v<T>)
      if (v.find('-') != std::string::npos) throw ConfigError(key + ": must be non-negative");
    return out;
  }
}

inline std::string join(const std::vector<std::string>& xs) {
  std::string out;
  for (const auto& x : xs) out += (out.empty() ? "" : ",") + x;
  return out;
}

}  // namespace detail

/// Every accepted key, as section.key (top-level keys have no section).
inline const std::map<std::string, std::string>& config_keys() {
  static const std::map<std::string, std::string> keys{
      {"seed", "master seed for data, split, init, shuffles, sketches and dictionaries"},
      {"out", "output directory"},
      {"data.path", "dataset JSONL; empty generates synthetic data"},
      {"data.positives", "synthetic positives"},
      {"data.negatives", "synthetic negatives"},
      {"data.text_signal", "synthetic text class-word probability"},
      {"data.image_signal", "synthetic image class-tag probability"},
      {"data.train_frac", "train share of the split"},
      {"embedding.provider", "synthetic | file_backed"},
      {"embedding.text_dim", "text embedding dim"},
      {"embedding.image_dim", "image embedding dim"},
      {"embedding.text_dir", "file_backed text vector directory"},
      {"embedding.image_dir", "file_backed image vector directory"},
      {"fusion.protocols", "comma list of post_level, homepage_level, text_source, image_source, quadruple"},
      {"fusion.strategies", "comma list of concat, bilinear, compact_bilinear, fbc"},
      {"fusion.decision_level", "also run the decision-level baseline"},
      {"fusion.sketch_dim", "compact bilinear sketch dim"},
      {"fusion.normalize", "signed sqrt + L2 after bilinear-family fusion"},
      {"fusion.fbc_k", "FBC atoms"},
      {"fusion.fbc_r", "FBC atom rank"},
      {"fusion.fbc_lambda", "FBC sparsity weight"},
      {"train.lr", "Adam learning rate"},
      {"train.beta1", "Adam beta1"},
      {"train.beta2", "Adam beta2"},
      {"train.epsilon", "Adam epsilon"},
      {"train.batch_size", "mini-batch size"},
      {"train.epochs", "epochs"},
      {"train.threshold", "decision threshold"},
      {"train.loss", "bce | positive_only"},
      {"sweep.ratios", "comma list of N/P ratios"},
  };
  return keys;
}

[[nodiscard]] inline ExperimentConfig parse_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  std::map<std::string, std::string> kv;
  for (const auto& [k, v] : tree) {
    if (v.empty()) {
      kv[k] = v.data();
    } else {
      for (const auto& [k2, v2] : v) kv[k + "." + k2] = v2.data();
    }
  }
  for (const auto& [k, _] : kv)
    if (!config_keys().contains(k)) throw ConfigError("unknown config key: " + k);

  ExperimentConfig c;
  auto get = [&](const std::string& key) -> std::optional<std::string> {
    const auto it = kv.find(key);
    return it == kv.end() ? std::nullopt : std::optional(it->second);
  };
  auto set = [&]<typename T>(const std::string& key, T& field) {
    if (auto v = get(key)) field = detail::convert<T>(key, *v);
  };
  std::uint64_t seed = 0;
  set("seed", seed);
  c.apply_seed(seed);
  if (auto v = get("out")) c.out = *v;
  if (auto v = get("data.path")) c.dataset = *v;
  set("data.positives", c.synth.positives);
  set("data.negatives", c.synth.negatives);
  set("data.text_signal", c.synth.text_signal);
  set("data.image_signal", c.synth.image_signal);
  set("data.train_frac", c.train_frac);
  if (auto v = get("embedding.provider")) c.embedding.provider = *v;
  set("embedding.text_dim", c.embedding.text_dim);
  set("embedding.image_dim", c.embedding.image_dim);
  if (auto v = get("embedding.text_dir")) c.embedding.text_dir = *v;
  if (auto v = get("embedding.image_dir")) c.embedding.image_dir = *v;
  if (auto v = get("fusion.protocols")) {
    c.protocols.clear();
    for (const auto& p : detail::split_list(*v)) c.protocols.push_back(parse_protocol(p));
  }
  if (auto v = get("fusion.strategies")) {
    c.strategies.clear();
    for (const auto& s : detail::split_list(*v)) c.strategies.push_back(parse_strategy(s));
  }
  set("fusion.decision_level", c.decision_level);
  set("fusion.sketch_dim", c.fusion.sketch_dim);
  set("fusion.normalize", c.fusion.bilinear_normalize);
  set("fusion.fbc_k", c.fusion.fbc.k);
  set("fusion.fbc_r", c.fusion.fbc.r);
  set("fusion.fbc_lambda", c.fusion.fbc.lambda);
  set("train.lr", c.train.lr);
  set("train.beta1", c.train.beta1);
  set("train.beta2", c.train.beta2);
  set("train.epsilon", c.train.epsilon);
  set("train.batch_size", c.train.batch_size);
  set("train.epochs", c.train.epochs);
  set("train.threshold", c.train.threshold);
  if (auto v = get("train.loss")) {
    if (*v == "bce")
      c.train.loss = LossKind::binary_cross_entropy;
    else if (*v == "positive_only")
      c.train.loss = LossKind::positive_only;
    else
      throw ConfigError("train.loss: unknown loss '" + *v + "'");
  }
  if (auto v = get("sweep.ratios")) {
    c.np_ratios.clear();
    for (const auto& r : detail::split_list(*v)) c.np_ratios.push_back(detail::convert<double>("sweep.ratios", r));
  }
  return c;
}

[[nodiscard]] inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  return parse_config(in);
}

/// The fully resolved config, re-parseable by parse_config.
[[nodiscard]] inline std::string resolved_config(const ExperimentConfig& c) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "seed = " << c.seed << "\n";
  if (!c.out.empty()) os << "out = " << c.out.string() << "\n";
  os << "\n[data]\n";
  if (!c.dataset.empty()) os << "path = " << c.dataset.string() << "\n";
  os << "positives = " << c.synth.positives << "\nnegatives = " << c.synth.negatives
     << "\ntext_signal = " << c.synth.text_signal << "\nimage_signal = " << c.synth.image_signal
     << "\ntrain_frac = " << c.train_frac << "\n";
  os << "\n[embedding]\nprovider = " << c.embedding.provider << "\ntext_dim = " << c.embedding.text_dim
     << "\nimage_dim = " << c.embedding.image_dim << "\n";
  if (!c.embedding.text_dir.empty()) os << "text_dir = " << c.embedding.text_dir.string() << "\n";
  if (!c.embedding.image_dir.empty()) os << "image_dir = " << c.embedding.image_dir.string() << "\n";
  std::vector<std::string> ps, ss, rs;
  for (auto p : c.protocols) ps.emplace_back(to_string(p));
  for (auto s : c.strategies) ss.emplace_back(to_string(s));
  for (double r : c.np_ratios) {
    std::ostringstream r_os;
    r_os << r;
    rs.push_back(r_os.str());
  }
  os << "\n[fusion]\nprotocols = " << detail::join(ps) << "\nstrategies = " << detail::join(ss)
     << "\ndecision_level = " << (c.decision_level ? "true" : "false") << "\nsketch_dim = " << c.fusion.sketch_dim
     << "\nnormalize = " << (c.fusion.bilinear_normalize ? "true" : "false") << "\nfbc_k = " << c.fusion.fbc.k
     << "\nfbc_r = " << c.fusion.fbc.r << "\nfbc_lambda = " << c.fusion.fbc.lambda << "\n";
  os << "\n[train]\nlr = " << c.train.lr << "\nbeta1 = " << c.train.beta1 << "\nbeta2 = " << c.train.beta2
     << "\nepsilon = " << c.train.epsilon << "\nbatch_size = " << c.train.batch_size << "\nepochs = " << c.train.epochs
     << "\nthreshold = " << c.train.threshold
     << "\nloss = " << (c.train.loss == LossKind::positive_only ? "positive_only" : "bce") << "\n";
  os << "\n[sweep]\nratios = " << detail::join(rs) << "\n";
  return os.str();
}

[[nodiscard]] inline Providers make_providers(const ExperimentConfig& c) {
  if (c.embedding.provider == "file_backed")
    return Providers{EmbeddingProvider::file_backed(c.embedding.text_dir, c.embedding.text_dim),
                     EmbeddingProvider::file_backed(c.embedding.image_dir, c.embedding.image_dim)};
  return Providers{EmbeddingProvider::synthetic_text(c.embedding.text_dim, c.seed),
                   EmbeddingProvider::synthetic_image(c.embedding.image_dim, c.seed)};
}

[[nodiscard]] inline Dataset load_data(const ExperimentConfig& c) {
  if (!c.dataset.empty()) return load_dataset(c.dataset);
  return generate_dataset(c.synth);
}

struct ResultRow {
  std::string name;
  Metrics metrics;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::size_t excluded = 0;  // records failing some requested protocol's mask rule

  [[nodiscard]] const ResultRow& row(const std::string& name) const {
    for (const auto& r : rows)
      if (r.name == name) return r;
    throw std::out_of_range("no result row " + name);
  }
};

[[nodiscard]] inline nlohmann::json result_to_json(const ExperimentResult& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    auto j = metrics_to_json(row.metrics);
    j["name"] = row.name;
    j["train_rows"] = row.train_rows;
    j["test_rows"] = row.test_rows;
    rows.push_back(j);
  }
  return {{"excluded", r.excluded}, {"rows", rows}};
}

[[nodiscard]] inline std::string result_table(const ExperimentResult& r) {
  std::vector<std::pair<std::string, Metrics>> rows;
  for (const auto& row : r.rows) rows.emplace_back(row.name, row.metrics);
  return metrics_table(rows);
}

namespace detail {

/// Keeps records that every requested protocol accepts; the decision-level
/// baseline alone needs only a valid mask.
inline Dataset common_subset(const Dataset& ds, const std::vector<Protocol>& protocols, std::size_t* excluded) {
  Dataset out;
  out.split_seed = ds.split_seed;
  for (const auto& r : ds.records) {
    const auto m = r.mask();
    const bool ok = validate_mask(m) && std::all_of(protocols.begin(), protocols.end(),
                                                    [&](Protocol p) { return protocol_accepts(p, m); });
    if (ok)
      out.records.push_back(r);
    else
      ++*excluded;
  }
  return out;
}

}  // namespace detail

/// One row per (protocol, strategy) cell plus the optional decision-level row.
[[nodiscard]] inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const Dataset& data,
                                                     std::ostream* log = nullptr) {
  cfg.validate();
  ExperimentResult res;
  const auto usable = detail::common_subset(data, cfg.protocols, &res.excluded);
  if (log && res.excluded) *log << "excluded " << res.excluded << " records with intolerable missing patterns\n";
  const auto [train_ds, test_ds] = split(usable, cfg.train_frac, cfg.seed);
  if (train_ds.empty() || test_ds.empty()) throw DataError("split left an empty train or test set");
  const auto providers = make_providers(cfg);
  const auto train_f = featurize_all(train_ds, providers);
  const auto test_f = featurize_all(test_ds, providers);
  const auto train_y = labels_of(train_ds);
  const auto test_y = labels_of(test_ds);

  for (auto protocol : cfg.protocols)
    for (auto strategy : cfg.strategies) {
      FusionConfig fc = cfg.fusion;
      fc.protocol = protocol;
      fc.strategy = strategy;
      const Fuser fuser(fc, providers.text.dim(), providers.image.dim());
      const auto x_train = build_matrix(train_f, train_y, fuser);
      const auto x_test = build_matrix(test_f, test_y, fuser);
      const auto params = train_head(x_train, cfg.train);
      ResultRow row{std::string(to_string(protocol)) + "/" + to_string(strategy),
                    evaluate(params, x_test, cfg.train.threshold), x_train.rows(), x_test.rows()};
      if (log) *log << row.name << " accuracy " << row.metrics.accuracy << "\n";
      res.rows.push_back(std::move(row));
    }
  if (cfg.decision_level) {
    const auto model = DecisionFusionModel::fit(train_f, train_y, cfg.train);
    ResultRow row{"decision_level", model.evaluate(test_f, test_y, cfg.train.threshold), train_f.size(),
                  test_f.size()};
    if (log) *log << row.name << " accuracy " << row.metrics.accuracy << "\n";
    res.rows.push_back(std::move(row));
  }
  return res;
}

struct SweepPoint {
  double ratio = 0.0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  Metrics metrics;
};

/// Per ratio: keep all positives, subsample ratio*P negatives (nested subsets
/// of one seeded permutation), split, retrain and evaluate. Uses the first
/// configured protocol and strategy.
[[nodiscard]] inline std::vector<SweepPoint> ratio_sweep(const ExperimentConfig& cfg, const Dataset& data,
                                                         std::ostream* log = nullptr) {
  cfg.validate();
  if (cfg.np_ratios.empty()) throw ConfigError("no ratios requested");
  FusionConfig fc = cfg.fusion;
  fc.protocol = cfg.protocols.empty() ? Protocol::quadruple : cfg.protocols.front();
  fc.strategy = cfg.strategies.front();
  std::size_t excluded = 0;
  const auto usable = detail::common_subset(data, {fc.protocol}, &excluded);
  if (log && excluded) *log << "excluded " << excluded << " records with intolerable missing patterns\n";
  std::vector<QuadrupleRecord> pos, neg;
  for (const auto& r : usable.records) (r.label == 1 ? pos : neg).push_back(r);
  if (pos.empty()) throw DataError("no positive records for the ratio sweep");
  const auto perm = seeded_permutation(neg.size(), cfg.seed);
  const auto providers = make_providers(cfg);
  const Fuser fuser(fc, providers.text.dim(), providers.image.dim());

  std::vector<SweepPoint> out;
  for (double ratio : cfg.np_ratios) {
    const auto need = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(pos.size())));
    if (need > neg.size())
      throw DataError("insufficient negatives for N/P " + std::to_string(ratio) + ": need " + std::to_string(need) +
                      ", have " + std::to_string(neg.size()));
    Dataset ds;
    ds.records = pos;
    for (std::size_t i = 0; i < need; ++i) ds.records.push_back(neg[perm[i]]);
    const auto [train_ds, test_ds] = split(ds, cfg.train_frac, cfg.seed);
    const auto train_f = featurize_all(train_ds, providers);
    const auto test_f = featurize_all(test_ds, providers);
    const auto params = train_head(build_matrix(train_f, labels_of(train_ds), fuser), cfg.train);
    SweepPoint p{ratio, pos.size(), need,
                 evaluate(params, build_matrix(test_f, labels_of(test_ds), fuser), cfg.train.threshold)};
    if (log) *log << "N/P " << ratio << " accuracy " << p.metrics.accuracy << "\n";
    out.push_back(p);
  }
  return out;
}

/// Tab-separated curve: ratio, counts, metrics.
inline void write_curve(const std::vector<SweepPoint>& pts, std::ostream& out) {
  out << "ratio\tpositives\tnegatives\taccuracy\tprecision\trecall\tf1\n";
  out << std::setprecision(6);
  for (const auto& p : pts)
    out << p.ratio << '\t' << p.positives << '\t' << p.negatives << '\t' << p.metrics.accuracy << '\t'
        << p.metrics.precision << '\t' << p.metrics.recall << '\t' << p.metrics.f1 << '\n';
}

/// Writes resolved config, results.json and results.txt under cfg.out.
inline void write_experiment_outputs(const ExperimentConfig& cfg, const ExperimentResult& res) {
  std::filesystem::create_directories(cfg.out);
  std::ofstream(cfg.out / "config.resolved.ini") << resolved_config(cfg);
  std::ofstream(cfg.out / "results.json") << result_to_json(res).dump(2) << '\n';
  std::ofstream(cfg.out / "results.txt") << result_table(res);
}

}  // namespace dealerid
