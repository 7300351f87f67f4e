#pragma once

// End-to-end path: featurize records, fuse under a protocol/strategy, train
// the softmax head, evaluate. Also the decision-level fusion baseline.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "dealerid/classify.hpp"
#include "dealerid/core.hpp"
#include "dealerid/embed.hpp"
#include "dealerid/fusion.hpp"

namespace dealerid {

[[nodiscard]] inline std::vector<RecordFeatures> featurize_all(const Dataset& ds, const Providers& providers) {
  std::vector<RecordFeatures> out;
  out.reserve(ds.size());
  for (const auto& r : ds.records) out.push_back(featurize(r, providers));
  return out;
}

/// Fused feature matrix for the records the protocol accepts; `skipped`
/// receives the number of rejected records.
[[nodiscard]] inline FeatureMatrix build_matrix(std::span<const RecordFeatures> features, std::span<const int> labels,
                                                const Fuser& fuser, std::size_t* skipped = nullptr) {
  FeatureMatrix m;
  m.dim = fuser.dim();
  std::size_t rejected = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (!protocol_accepts(fuser.config().protocol, features[i].mask)) {
      ++rejected;
      continue;
    }
    m.push(fuser.fixed_feature(features[i]), labels[i]);
  }
  if (skipped) *skipped = rejected;
  return m;
}

[[nodiscard]] inline std::vector<int> labels_of(const Dataset& ds) {
  std::vector<int> out;
  out.reserve(ds.size());
  for (const auto& r : ds.records) out.push_back(r.label);
  return out;
}

struct TrainedModel {
  ClassifierParams params;
  FusionConfig fusion;
  std::size_t text_dim = kDefaultTextDim;
  std::size_t image_dim = kDefaultImageDim;
};

/// Requires every training record to pass the protocol's mask rule.
[[nodiscard]] inline TrainedModel train(const Dataset& train_ds, const TrainConfig& cfg, const FusionConfig& fusion,
                                        const Providers& providers) {
  if (train_ds.empty()) throw DataError("empty training set");
  for (const auto& r : train_ds.records)
    if (!protocol_accepts(fusion.protocol, r.mask()))
      throw DataError("intolerable missing pattern in training record " + r.user_id + "/" + r.post_id);
  const Fuser fuser(fusion, providers.text.dim(), providers.image.dim());
  const auto feats = featurize_all(train_ds, providers);
  const auto labels = labels_of(train_ds);
  const auto x = build_matrix(feats, labels, fuser);
  return TrainedModel{train_head(x, cfg), fusion, providers.text.dim(), providers.image.dim()};
}

/// Evaluates on the records the model's protocol accepts.
[[nodiscard]] inline Metrics evaluate(const TrainedModel& model, const Dataset& test_ds, const Providers& providers,
                                      double threshold = 0.5) {
  const Fuser fuser(model.fusion, model.text_dim, model.image_dim);
  const auto feats = featurize_all(test_ds, providers);
  const auto labels = labels_of(test_ds);
  return evaluate(model.params, build_matrix(feats, labels, fuser), threshold);
}

// ---------------------------------------------------------------------------
// Decision-level fusion baseline

/// One softmax head per modality, in PI, PC, HB, HI order.
struct DecisionFusionModel {
  std::array<ClassifierParams, 4> heads;
  std::array<bool, 4> trained{false, false, false, false};
  std::array<double, 4> weights = kDefaultDecisionWeights;

  static constexpr std::array<Source, 4> kOrder{Source::post_image, Source::post_comment, Source::homepage_bio,
                                                Source::homepage_image};

  /// Each head trains on the records where its modality is present.
  static DecisionFusionModel fit(std::span<const RecordFeatures> features, std::span<const int> labels,
                                 const TrainConfig& cfg) {
    DecisionFusionModel model;
    for (std::size_t k = 0; k < 4; ++k) {
      FeatureMatrix x;
      for (std::size_t i = 0; i < features.size(); ++i)
        if (present(features[i].mask, kOrder[k])) x.push(select(features[i], kOrder[k]).values, labels[i]);
      if (x.rows() == 0) continue;
      TrainConfig c = cfg;
      c.seed = cfg.seed + k + 1;
      model.heads[k] = train_head(x, c);
      model.trained[k] = true;
    }
    return model;
  }

  [[nodiscard]] double predict(const RecordFeatures& f) const {
    std::array<double, 4> probs{};
    std::array<bool, 4> avail{};
    for (std::size_t k = 0; k < 4; ++k) {
      avail[k] = trained[k] && present(f.mask, kOrder[k]);
      probs[k] = avail[k] ? forward(heads[k], select(f, kOrder[k]).values) : kNeutralProbability;
    }
    return decision_fuse(probs, avail, weights);
  }

  [[nodiscard]] Metrics evaluate(std::span<const RecordFeatures> features, std::span<const int> labels,
                                 double threshold = 0.5) const {
    std::vector<double> probs;
    probs.reserve(features.size());
    for (const auto& f : features) probs.push_back(predict(f));
    return metrics_from_predictions(probs, labels, threshold);
  }
};

}  // namespace dealerid
