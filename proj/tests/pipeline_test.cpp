#include <gtest/gtest.h>

#include "dealerid/pipeline.hpp"
#include "dealerid/synth.hpp"

namespace dealerid {
namespace {

Providers small_providers() {
  return Providers{EmbeddingProvider::synthetic_text(32, 1), EmbeddingProvider::synthetic_image(64, 1)};
}

Dataset small_data(std::uint64_t seed) {
  SynthSpec spec;
  spec.positives = 120;
  spec.negatives = 120;
  spec.seed = seed;
  return generate_dataset(spec);
}

TEST(Synth, DeterministicAndValid) {
  const auto a = small_data(3), b = small_data(3);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, small_data(4));
  std::size_t pos = 0;
  for (const auto& r : a.records) {
    EXPECT_NO_THROW(r.validate());
    pos += r.label;
  }
  EXPECT_EQ(pos, 120u);
}

TEST(Synth, MissingRatesRoughlyHonoured) {
  SynthSpec spec;
  spec.positives = 4000;
  spec.negatives = 0;
  spec.seed = 9;
  const auto ds = generate_dataset(spec);
  std::size_t no_bio = 0;
  for (const auto& r : ds.records) no_bio += r.hb_text ? 0 : 1;
  EXPECT_NEAR(static_cast<double>(no_bio) / 4000.0, 0.5598, 0.03);
}

TEST(BuildMatrix, SkipsRejectedRecords) {
  const auto ds = small_data(1);
  const auto p = small_providers();
  const auto feats = featurize_all(ds, p);
  const auto labels = labels_of(ds);
  FusionConfig fc;
  fc.protocol = Protocol::homepage_level;
  const Fuser fuser(fc, 32, 64);
  std::size_t skipped = 0;
  const auto m = build_matrix(feats, labels, fuser, &skipped);
  std::size_t expect_skipped = 0;
  for (const auto& r : ds.records) expect_skipped += protocol_accepts(Protocol::homepage_level, r.mask()) ? 0 : 1;
  EXPECT_EQ(skipped, expect_skipped);
  EXPECT_EQ(m.rows() + skipped, ds.size());
  EXPECT_EQ(m.dim, fuser.dim());
}

TEST(Train, RejectsIntolerableRecords) {
  Dataset ds;
  QuadrupleRecord r{.user_id = "u", .post_id = "p", .label = 1, .pc_text = "dm", .pi_ref = "a.jpg",
                    .hb_text = std::nullopt, .hi_refs = {}, .hashtags = {}};
  ds.records.push_back(r);
  EXPECT_THROW((void)train(ds, TrainConfig{}, FusionConfig{}, small_providers()), DataError);
  FusionConfig post;
  post.protocol = Protocol::post_level;
  EXPECT_NO_THROW((void)train(ds, TrainConfig{}, post, small_providers()));
}

TEST(Train, LearnsAndIsDeterministic) {
  Dataset usable;
  for (const auto& r : small_data(2).records)
    if (validate_mask(r.mask())) usable.records.push_back(r);
  const auto [tr, te] = split(usable, 0.7, 2);
  TrainConfig cfg;
  cfg.seed = 2;
  for (auto s : {Strategy::concat, Strategy::bilinear, Strategy::compact_bilinear, Strategy::fbc}) {
    FusionConfig fc;
    fc.strategy = s;
    fc.sketch_dim = 256;
    fc.fbc.k = 16;
    const auto m1 = train(tr, cfg, fc, small_providers());
    const auto m2 = train(tr, cfg, fc, small_providers());
    EXPECT_EQ(m1.params, m2.params) << to_string(s);
    const auto met = evaluate(m1, te, small_providers());
    for (double v : {met.accuracy, met.precision, met.recall, met.f1}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_GE(met.accuracy, 0.75) << to_string(s);
  }
}

TEST(DecisionFusion, MissingModalityIsNeutral) {
  const auto ds = small_data(5);
  const auto p = small_providers();
  const auto feats = featurize_all(ds, p);
  const auto labels = labels_of(ds);
  const auto model = DecisionFusionModel::fit(feats, labels, TrainConfig{});
  for (bool t : model.trained) EXPECT_TRUE(t);
  auto f = feats.front();
  f.mask = PresenceMask{.pc_present = false, .pi_present = true, .hb_present = false, .hi_present = false};
  const double p_pi = forward(model.heads[0], f.pi.values);
  // Three neutral 0.5 votes plus one real one.
  EXPECT_NEAR(model.predict(f), 0.25 * p_pi + 0.75 * 0.5, 1e-12);
  const auto met = model.evaluate(feats, labels);
  EXPECT_GE(met.accuracy, 0.75);
}

}  // namespace
}  // namespace dealerid
