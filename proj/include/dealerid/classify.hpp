#pragma once

// Two-class softmax head trained with Adam on fused feature vectors,
// evaluation metrics, decision-level fusion and checkpoint I/O.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dealerid/core.hpp"
#include "dealerid/fusion.hpp"

namespace dealerid {

enum class LossKind {
  binary_cross_entropy,  // -[c log p + (1 - c) log(1 - p)]
  positive_only,         // -c log p, the single-term form
};

struct TrainConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 10;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;
  double threshold = 0.5;
  LossKind loss = LossKind::binary_cross_entropy;

  void validate() const {
    if (!(lr > 0.0)) throw ConfigError("lr must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must lie in [0, 1)");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  }
};

/// Softmax head: logits = W^T f + b with W stored row-major as dim_in x 2.
struct ClassifierParams {
  std::size_t dim_in = 0;
  std::vector<double> w;  // dim_in * 2
  std::array<double, 2> b{0.0, 0.0};
  // Adam moments mirror (w, b).
  std::vector<double> m_w, v_w;
  std::array<double, 2> m_b{0.0, 0.0}, v_b{0.0, 0.0};
  std::uint64_t step = 0;

  static ClassifierParams zeros(std::size_t dim_in) {
    ClassifierParams p;
    p.dim_in = dim_in;
    p.w.assign(dim_in * 2, 0.0);
    p.m_w.assign(dim_in * 2, 0.0);
    p.v_w.assign(dim_in * 2, 0.0);
    return p;
  }

  friend bool operator==(const ClassifierParams&, const ClassifierParams&) = default;
};

struct Gradients {
  std::vector<double> w;
  std::array<double, 2> b{0.0, 0.0};
};

[[nodiscard]] inline std::array<double, 2> logits(const ClassifierParams& params, std::span<const double> f) {
  if (f.size() != params.dim_in)
    throw DataError("feature dim " + std::to_string(f.size()) + " does not match classifier dim " +
                    std::to_string(params.dim_in));
  std::array<double, 2> z = params.b;
  for (std::size_t i = 0; i < f.size(); ++i) {
    z[0] += params.w[2 * i] * f[i];
    z[1] += params.w[2 * i + 1] * f[i];
  }
  return z;
}

/// Class-1 softmax probability with max-subtraction, kept strictly inside (0, 1)
/// even when the logit gap saturates double precision.
[[nodiscard]] inline double softmax_positive(const std::array<double, 2>& z) {
  const double m = std::max(z[0], z[1]);
  const double e0 = std::exp(z[0] - m);
  const double e1 = std::exp(z[1] - m);
  return std::clamp(e1 / (e0 + e1), std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

[[nodiscard]] inline double forward(const ClassifierParams& params, std::span<const double> f) {
  return softmax_positive(logits(params, f));
}

inline constexpr double kProbClamp = 1e-12;

/// Mean loss over the batch; probabilities are clamped to [1e-12, 1 - 1e-12].
[[nodiscard]] inline double loss(std::span<const double> probs, std::span<const int> labels,
                                 LossKind kind = LossKind::binary_cross_entropy) {
  if (probs.size() != labels.size()) throw DataError("loss: probabilities and labels differ in length");
  if (probs.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], kProbClamp, 1.0 - kProbClamp);
    const double c = labels[i];
    total -= c * std::log(p);
    if (kind == LossKind::binary_cross_entropy) total -= (1.0 - c) * std::log(1.0 - p);
  }
  return total / static_cast<double>(probs.size());
}

/// Row-major feature matrix with labels.
struct FeatureMatrix {
  std::size_t dim = 0;
  std::vector<double> data;
  std::vector<int> labels;

  [[nodiscard]] std::size_t rows() const { return labels.size(); }
  [[nodiscard]] std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data).subspan(i * dim, dim);
  }
  void push(std::span<const double> f, int label) {
    if (rows() == 0 && dim == 0) dim = f.size();
    if (f.size() != dim) throw DataError("feature matrix rows must share one dim");
    data.insert(data.end(), f.begin(), f.end());
    labels.push_back(label);
  }
};

/// Mean gradient of the loss over the given rows, w.r.t. (W, b).
[[nodiscard]] inline Gradients gradients(const ClassifierParams& params, const FeatureMatrix& x,
                                         std::span<const std::size_t> rows,
                                         LossKind kind = LossKind::binary_cross_entropy) {
  Gradients g;
  g.w.assign(params.w.size(), 0.0);
  if (rows.empty()) return g;
  const double scale = 1.0 / static_cast<double>(rows.size());
  for (auto r : rows) {
    const auto f = x.row(r);
    const double p = forward(params, f);
    const double c = x.labels[r];
    // d loss / d logits = softmax - onehot (full) or c * (softmax - e_1) (positive-only)
    double d0, d1;
    if (kind == LossKind::binary_cross_entropy) {
      d1 = p - c;
      d0 = -d1;
    } else {
      d1 = c * (p - 1.0);
      d0 = c * (1.0 - p);
    }
    d0 *= scale;
    d1 *= scale;
    for (std::size_t i = 0; i < f.size(); ++i) {
      g.w[2 * i] += d0 * f[i];
      g.w[2 * i + 1] += d1 * f[i];
    }
    g.b[0] += d0;
    g.b[1] += d1;
  }
  return g;
}

/// Adam with bias correction; increments the step counter.
inline void adam_step(ClassifierParams& params, const Gradients& grads, const TrainConfig& cfg) {
  if (grads.w.size() != params.w.size()) throw DataError("gradient shape does not match parameters");
  ++params.step;
  const double t = static_cast<double>(params.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  auto update = [&](double& theta, double& m, double& v, double g) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
    const double m_hat = m / c1;
    const double v_hat = v / c2;
    theta -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  };
  for (std::size_t i = 0; i < params.w.size(); ++i) update(params.w[i], params.m_w[i], params.v_w[i], grads.w[i]);
  for (std::size_t i = 0; i < 2; ++i) update(params.b[i], params.m_b[i], params.v_b[i], grads.b[i]);
}

/// W ~ uniform[-0.01, 0.01] from the seed, b = 0.
[[nodiscard]] inline ClassifierParams init_params(std::size_t dim_in, std::uint64_t seed) {
  auto p = ClassifierParams::zeros(dim_in);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-0.01, 0.01);
  for (double& w : p.w) w = dist(rng);
  return p;
}

[[nodiscard]] inline double mean_loss(const ClassifierParams& params, const FeatureMatrix& x,
                                      LossKind kind = LossKind::binary_cross_entropy) {
  std::vector<double> probs(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) probs[i] = forward(params, x.row(i));
  return loss(probs, x.labels, kind);
}

/// Called after each epoch with (epoch index, params).
using EpochCallback = std::function<void(std::size_t, const ClassifierParams&)>;

/// Mini-batch Adam over a seeded per-epoch shuffle.
[[nodiscard]] inline ClassifierParams train_head(const FeatureMatrix& x, const TrainConfig& cfg,
                                                 const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (x.rows() == 0) throw DataError("empty training set");
  auto params = init_params(x.dim, cfg.seed);
  std::mt19937_64 shuffle_seeds(cfg.seed ^ 0x5eedf00dULL);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = seeded_permutation(x.rows(), shuffle_seeds());
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const auto end = std::min(order.size(), start + cfg.batch_size);
      const auto batch = std::span<const std::size_t>(order).subspan(start, end - start);
      adam_step(params, gradients(params, x, batch, cfg.loss), cfg);
    }
    if (on_epoch) on_epoch(epoch, params);
  }
  return params;
}

// ---------------------------------------------------------------------------
// Metrics

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  Confusion confusion;
  friend bool operator==(const Metrics&, const Metrics&) = default;
};

/// Undefined ratios are reported as 0.
[[nodiscard]] inline Metrics metrics_from_confusion(const Confusion& c) {
  Metrics m;
  m.confusion = c;
  const auto total = c.tp + c.fp + c.fn + c.tn;
  m.accuracy = total ? static_cast<double>(c.tp + c.tn) / static_cast<double>(total) : 0.0;
  m.precision = (c.tp + c.fp) ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  m.recall = (c.tp + c.fn) ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

[[nodiscard]] inline Metrics metrics_from_predictions(std::span<const double> probs, std::span<const int> labels,
                                                      double threshold) {
  Confusion c;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const bool pred = probs[i] >= threshold;
    const bool truth = labels[i] == 1;
    if (pred && truth) ++c.tp;
    else if (pred && !truth) ++c.fp;
    else if (!pred && truth) ++c.fn;
    else ++c.tn;
  }
  return metrics_from_confusion(c);
}

[[nodiscard]] inline Metrics evaluate(const ClassifierParams& params, const FeatureMatrix& x,
                                      double threshold = 0.5) {
  std::vector<double> probs(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) probs[i] = forward(params, x.row(i));
  return metrics_from_predictions(probs, x.labels, threshold);
}

[[nodiscard]] inline nlohmann::json metrics_to_json(const Metrics& m) {
  return nlohmann::json{{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall},
                        {"f1", m.f1},             {"tp", m.confusion.tp},     {"fp", m.confusion.fp},
                        {"fn", m.confusion.fn},   {"tn", m.confusion.tn}};
}

/// Aligned plain-text table, one row per labelled Metrics.
[[nodiscard]] inline std::string metrics_table(const std::vector<std::pair<std::string, Metrics>>& rows) {
  std::size_t w = 6;
  for (const auto& [name, _] : rows) w = std::max(w, name.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(w)) << "config" << std::right;
  for (const char* h : {"accuracy", "precision", "recall", "f1"}) os << std::setw(11) << h;
  os << '\n';
  os << std::fixed << std::setprecision(4);
  for (const auto& [name, m] : rows) {
    os << std::left << std::setw(static_cast<int>(w)) << name << std::right;
    for (double v : {m.accuracy, m.precision, m.recall, m.f1}) os << std::setw(11) << v;
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Decision-level fusion

inline constexpr std::array<double, 4> kDefaultDecisionWeights{0.25, 0.25, 0.25, 0.25};
inline constexpr double kNeutralProbability = 0.5;

/// Linear weighting of per-modality probabilities (PI, PC, HB, HI order);
/// a missing modality contributes 0.5 with its weight kept.
[[nodiscard]] inline double decision_fuse(std::span<const double, 4> probs, std::span<const bool, 4> present,
                                          std::span<const double, 4> weights = kDefaultDecisionWeights) {
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ConfigError("decision weights must be nonnegative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("decision weights must sum to 1");
  double out = 0.0;
  for (std::size_t i = 0; i < 4; ++i) out += weights[i] * (present[i] ? probs[i] : kNeutralProbability);
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint: magic "DDCK", u32 version, u32 dim_in, u32 strategy, u32 protocol,
// u64 seed, then (dim_in * 2 + 2) little-endian float32 values (W row-major, b).

struct CheckpointHeader {
  std::uint32_t dim_in = 0;
  Strategy strategy = Strategy::concat;
  Protocol protocol = Protocol::quadruple;
  std::uint64_t seed = 0;
};

namespace detail {

inline void put_le(std::ostream& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint64_t get_le(std::istream& in, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = in.get();
    if (c == EOF) throw DataError("checkpoint truncated");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& path, const ClassifierParams& params,
                            const CheckpointHeader& header) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint: " + path.string());
  out.write("DDCK", 4);
  detail::put_le(out, 1, 4);
  detail::put_le(out, params.dim_in, 4);
  detail::put_le(out, static_cast<std::uint32_t>(header.strategy), 4);
  detail::put_le(out, static_cast<std::uint32_t>(header.protocol), 4);
  detail::put_le(out, header.seed, 8);
  auto put_f32 = [&](double v) {
    const auto f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof bits);
    detail::put_le(out, bits, 4);
  };
  for (double w : params.w) put_f32(w);
  for (double b : params.b) put_f32(b);
  if (!out) throw DataError("checkpoint write failed: " + path.string());
}

/// Loaded parameters carry float32 precision and a fresh optimizer state.
[[nodiscard]] inline std::pair<ClassifierParams, CheckpointHeader> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "DDCK", 4) != 0) throw DataError("not a checkpoint file");
  if (detail::get_le(in, 4) != 1) throw DataError("unsupported checkpoint version");
  CheckpointHeader h;
  h.dim_in = static_cast<std::uint32_t>(detail::get_le(in, 4));
  const auto strategy = detail::get_le(in, 4);
  const auto protocol = detail::get_le(in, 4);
  if (strategy > 3 || protocol > 4) throw DataError("checkpoint has unknown strategy/protocol id");
  h.strategy = static_cast<Strategy>(strategy);
  h.protocol = static_cast<Protocol>(protocol);
  h.seed = detail::get_le(in, 8);
  auto params = ClassifierParams::zeros(h.dim_in);
  auto get_f32 = [&] {
    const auto bits = static_cast<std::uint32_t>(detail::get_le(in, 4));
    float f;
    std::memcpy(&f, &bits, sizeof f);
    return static_cast<double>(f);
  };
  for (double& w : params.w) w = get_f32();
  for (double& b : params.b) b = get_f32();
  return {std::move(params), h};
}

}  // namespace dealerid
