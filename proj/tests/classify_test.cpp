#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "dealerid/classify.hpp"

namespace dealerid {
namespace {

FeatureMatrix gaussian_blobs(std::size_t n, std::size_t dim, double separation, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  FeatureMatrix x;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    std::vector<double> f(dim);
    for (std::size_t d = 0; d < dim; ++d) f[d] = g(rng) + (label ? separation : -separation);
    x.push(f, label);
  }
  return x;
}

TEST(Forward, ZeroParamsGiveHalf) {
  const auto p = ClassifierParams::zeros(3);
  EXPECT_DOUBLE_EQ(forward(p, std::vector<double>{1, -2, 7}), 0.5);
}

TEST(Forward, SoftmaxArithmetic) {
  EXPECT_NEAR(softmax_positive({0.0, std::log(3.0)}), 0.75, 1e-15);
}

TEST(Forward, StrictlyInsideUnitInterval) {
  auto p = ClassifierParams::zeros(1);
  p.w = {-20.0, 20.0};
  for (double f : {-10.0, -1.0, 0.0, 1.0, 10.0}) {
    const double c = forward(p, std::vector<double>{f});
    EXPECT_GT(c, 0.0);
    EXPECT_LT(c, 1.0);
  }
}

TEST(Forward, DimMismatch) {
  EXPECT_THROW((void)forward(ClassifierParams::zeros(2), std::vector<double>{1.0}), DataError);
}

TEST(Loss, HalfProbability) {
  EXPECT_NEAR(loss(std::vector<double>{0.5}, std::vector<int>{1}), 0.6931, 1e-4);
  EXPECT_NEAR(loss(std::vector<double>{0.5}, std::vector<int>{0}), 0.6931, 1e-4);
}

TEST(Loss, PerfectPredictionIsZero) {
  EXPECT_NEAR(loss(std::vector<double>{1.0, 0.0}, std::vector<int>{1, 0}), 0.0, 1e-11);
}

TEST(Loss, NonNegative) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    const double p = u(rng);
    const int c = t % 2;
    EXPECT_GE(loss(std::vector<double>{p}, std::vector<int>{c}), 0.0);
    EXPECT_GE(loss(std::vector<double>{p}, std::vector<int>{c}, LossKind::positive_only), 0.0);
  }
}

TEST(Gradient, MatchesCentralDifferences) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  for (auto kind : {LossKind::binary_cross_entropy, LossKind::positive_only}) {
    for (int t = 0; t < 10; ++t) {
      FeatureMatrix x;
      for (int i = 0; i < 4; ++i) {
        std::vector<double> f(5);
        for (double& v : f) v = g(rng);
        x.push(f, i % 2);
      }
      auto params = ClassifierParams::zeros(5);
      for (double& w : params.w) w = 0.5 * g(rng);
      params.b = {0.3 * g(rng), 0.3 * g(rng)};
      std::vector<std::size_t> rows{0, 1, 2, 3};
      const auto grad = gradients(params, x, rows, kind);
      const double h = 1e-5;
      for (std::size_t i = 0; i < params.w.size(); ++i) {
        auto plus = params, minus = params;
        plus.w[i] += h;
        minus.w[i] -= h;
        const double numeric = (mean_loss(plus, x, kind) - mean_loss(minus, x, kind)) / (2 * h);
        EXPECT_NEAR(grad.w[i], numeric, 1e-4 * std::max(1.0, std::abs(numeric)));
      }
    }
  }
}

TEST(Adam, FirstStep) {
  auto p = ClassifierParams::zeros(1);
  Gradients g{{1.0, 0.0}, {0.0, 0.0}};
  adam_step(p, g, TrainConfig{});
  EXPECT_NEAR(p.w[0], -0.001 / (1.0 + 1e-8), 1e-15);
  EXPECT_NEAR(p.w[0], -0.001, 1e-9);
  EXPECT_EQ(p.step, 1u);
}

TEST(Adam, ZeroGradientLeavesParams) {
  auto p = ClassifierParams::zeros(3);
  p.w = {0.1, -0.2, 0.3, 0.4, -0.5, 0.6};
  const auto before = p.w;
  const Gradients g{std::vector<double>(6, 0.0), {0.0, 0.0}};
  for (int i = 0; i < 10; ++i) adam_step(p, g, TrainConfig{});
  EXPECT_EQ(p.w, before);
}

TEST(Adam, OppositeGradientsSymmetric) {
  auto p = ClassifierParams::zeros(1);
  adam_step(p, Gradients{{1.0, -1.0}, {0.0, 0.0}}, TrainConfig{});
  EXPECT_DOUBLE_EQ(p.w[0], -p.w[1]);
  EXPECT_LT(p.w[0], 0.0);
}

TEST(Train, SeparableBlobs) {
  const auto x = gaussian_blobs(200, 4, 2.0, 3);
  // Independent check that the blobs are linearly separable: a perceptron converges.
  std::vector<double> w(5, 0.0);
  bool converged = false;
  for (int epoch = 0; epoch < 1000 && !converged; ++epoch) {
    converged = true;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const auto f = x.row(i);
      double s = w[4];
      for (int d = 0; d < 4; ++d) s += w[d] * f[d];
      const int y = x.labels[i] ? 1 : -1;
      if (y * s <= 0) {
        for (int d = 0; d < 4; ++d) w[d] += y * f[d];
        w[4] += y;
        converged = false;
      }
    }
  }
  ASSERT_TRUE(converged);
  const auto params = train_head(x, TrainConfig{});
  EXPECT_GE(evaluate(params, x).accuracy, 0.95);
}

TEST(Train, Deterministic) {
  const auto x = gaussian_blobs(60, 3, 1.0, 4);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 9;
  EXPECT_EQ(train_head(x, cfg), train_head(x, cfg));
}

TEST(Train, SingleRecordLossDecreases) {
  FeatureMatrix x;
  x.push(std::vector<double>{0.4, -1.2, 0.7}, 1);
  std::vector<double> losses;
  TrainConfig cfg;
  cfg.epochs = 5;
  (void)train_head(x, cfg, [&](std::size_t, const ClassifierParams& p) { losses.push_back(mean_loss(p, x)); });
  ASSERT_EQ(losses.size(), 5u);
  const double initial = mean_loss(init_params(3, cfg.seed), x);
  EXPECT_LT(losses[0], initial);
  for (std::size_t i = 1; i < losses.size(); ++i) EXPECT_LT(losses[i], losses[i - 1]);
}

TEST(Train, EmptyFails) { EXPECT_THROW((void)train_head(FeatureMatrix{}, TrainConfig{}), DataError); }

TEST(Train, RejectsBadConfig) {
  FeatureMatrix x;
  x.push(std::vector<double>{1.0}, 1);
  TrainConfig cfg;
  cfg.batch_size = 0;
  EXPECT_THROW((void)train_head(x, cfg), ConfigError);
}

TEST(Metrics, DefinitionArithmetic) {
  const auto m = metrics_from_confusion({90, 10, 5, 95});
  EXPECT_NEAR(m.precision, 0.9000, 5e-5);
  EXPECT_NEAR(m.recall, 0.9474, 5e-5);
  EXPECT_NEAR(m.f1, 0.9231, 5e-5);
  EXPECT_NEAR(m.accuracy, 0.9250, 5e-5);
}

TEST(Metrics, AllCorrect) {
  const auto m = metrics_from_predictions(std::vector<double>{0.9, 0.1, 0.8}, std::vector<int>{1, 0, 1}, 0.5);
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.precision, 1.0);
  EXPECT_EQ(m.recall, 1.0);
  EXPECT_EQ(m.f1, 1.0);
}

TEST(Metrics, NoPositivePredictions) {
  const auto m = metrics_from_predictions(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 0}, 0.5);
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_EQ(m.recall, 0.0);
  EXPECT_EQ(m.f1, 0.0);
}

TEST(Metrics, ThresholdMonotonicity) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u;
  std::vector<double> probs(300);
  std::vector<int> labels(300);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    labels[i] = static_cast<int>(i % 3 == 0);
    probs[i] = u(rng);
  }
  Metrics prev = metrics_from_predictions(probs, labels, 0.0);
  for (double t = 0.01; t <= 1.0; t += 0.01) {
    const auto m = metrics_from_predictions(probs, labels, t);
    EXPECT_LE(m.recall, prev.recall);
    if (m.confusion.tp + m.confusion.fp == 0) {
      EXPECT_EQ(m.precision, 0.0);
    }
    prev = m;
  }
}

TEST(Metrics, PrecisionMonotoneWhenScoresRankPerfectly) {
  // Every positive outscores every negative.
  std::vector<double> probs;
  std::vector<int> labels;
  for (int i = 0; i < 40; ++i) {
    probs.push_back(0.5 + i * 0.01);
    labels.push_back(1);
    probs.push_back(i * 0.012);
    labels.push_back(0);
  }
  Metrics prev = metrics_from_predictions(probs, labels, 0.0);
  for (double t = 0.01; t <= 1.0; t += 0.01) {
    const auto m = metrics_from_predictions(probs, labels, t);
    if (m.confusion.tp + m.confusion.fp > 0 && prev.confusion.tp + prev.confusion.fp > 0) {
      EXPECT_GE(m.precision, prev.precision);
    } else if (m.confusion.tp + m.confusion.fp == 0) {
      EXPECT_EQ(m.precision, 0.0);
    }
    prev = m;
  }
}

TEST(DecisionFuse, EqualWeightsMean) {
  const std::array<double, 4> probs{0.9, 0.9, 0.1, 0.1};
  const std::array<bool, 4> present{true, true, true, true};
  EXPECT_DOUBLE_EQ(decision_fuse(probs, present), 0.5);
}

TEST(DecisionFuse, DegenerateWeights) {
  const std::array<double, 4> probs{0.83, 0.1, 0.2, 0.3};
  const std::array<bool, 4> present{true, true, true, true};
  const std::array<double, 4> w{1, 0, 0, 0};
  EXPECT_DOUBLE_EQ(decision_fuse(probs, present, w), 0.83);
}

TEST(DecisionFuse, DefaultsAndMissing) {
  EXPECT_EQ(kDefaultDecisionWeights, (std::array<double, 4>{0.25, 0.25, 0.25, 0.25}));
  const std::array<double, 4> probs{1.0, 1.0, 1.0, 1.0};
  const std::array<bool, 4> present{true, true, false, false};
  EXPECT_DOUBLE_EQ(decision_fuse(probs, present), 0.75);
}

TEST(DecisionFuse, BadWeights) {
  const std::array<double, 4> probs{0.5, 0.5, 0.5, 0.5};
  const std::array<bool, 4> present{true, true, true, true};
  EXPECT_THROW((void)decision_fuse(probs, present, std::array<double, 4>{0.5, 0.5, 0.5, 0.5}), ConfigError);
  EXPECT_THROW((void)decision_fuse(probs, present, std::array<double, 4>{1.5, -0.5, 0, 0}), ConfigError);
}

TEST(Checkpoint, RoundTrip) {
  auto p = init_params(7, 3);
  p.b = {0.25, -0.5};
  const auto path = std::filesystem::temp_directory_path() / "dealerid_ckpt.bin";
  save_checkpoint(path, p, {7, Strategy::fbc, Protocol::post_level, 99});
  const auto [loaded, header] = load_checkpoint(path);
  EXPECT_EQ(header.dim_in, 7u);
  EXPECT_EQ(header.strategy, Strategy::fbc);
  EXPECT_EQ(header.protocol, Protocol::post_level);
  EXPECT_EQ(header.seed, 99u);
  for (std::size_t i = 0; i < p.w.size(); ++i) EXPECT_EQ(loaded.w[i], static_cast<double>(static_cast<float>(p.w[i])));
  EXPECT_EQ(loaded.b, p.b);
  EXPECT_EQ(std::filesystem::file_size(path), 4u + 4 * 4 + 8 + 4 * (14 + 2));
  std::filesystem::remove(path);
}

TEST(MetricsOutput, JsonAndTable) {
  const auto m = metrics_from_confusion({90, 10, 5, 95});
  const auto j = metrics_to_json(m);
  EXPECT_EQ(j["tp"], 90);
  EXPECT_NEAR(j["accuracy"].get<double>(), 0.925, 1e-12);
  const auto table = metrics_table({{"quadruple/concat", m}});
  EXPECT_NE(table.find("0.9250"), std::string::npos);
  EXPECT_NE(table.find("quadruple/concat"), std::string::npos);
}

}  // namespace
}  // namespace dealerid
