#pragma once

// Seeded synthetic quadruple datasets. Dealer and non-dealer accounts draw
// comment/bio words and image tags from partially overlapping vocabularies,
// which makes the classes separable through the hashed n-gram providers.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dealerid/core.hpp"

namespace dealerid {

struct MissingRates {
  double pc = 0.0;
  double pi = 0.0;
  double hb = 0.0;
  double hi = 0.0;
};

struct SynthSpec {
  std::size_t positives = 500;
  std::size_t negatives = 500;
  std::uint64_t seed = 0;
  // Per-class modality missing rates; defaults follow the IDDIG collection table.
  MissingRates positive_missing{0.0330, 0.0, 0.5598, 0.5715};
  MissingRates negative_missing{0.0, 0.0, 0.1690, 0.2239};
  // Probability that a drawn word/tag comes from the class vocabulary rather than the shared one.
  double text_signal = 0.6;
  double image_signal = 0.4;
  std::size_t words_per_text = 8;
  std::size_t tags_per_image = 3;
};

namespace synth_vocab {

inline const std::vector<std::string> kDealerWords{
    "plug", "dm", "menu", "delivery", "shipping", "prices", "order", "stealth", "wickr", "snapchat",
    "telegram", "bulk", "discreet", "available", "hmu", "legit", "vendor", "restock", "quality", "tested"};
inline const std::vector<std::string> kUserWords{
    "lol", "vibes", "weekend", "friends", "tired", "haha", "party", "love", "music", "chill",
    "happy", "family", "movie", "coffee", "gym", "sunset", "pizza", "bored", "school", "birthday"};
inline const std::vector<std::string> kSharedWords{
    "the", "and", "this", "so", "good", "night", "fire", "high", "smoke", "today",
    "420", "wow", "new", "yes", "real", "crazy", "best", "time", "life", "now"};
inline const std::vector<std::string> kDealerTags{"pills", "powder", "bags", "scale", "cash", "packs", "bottles", "bricks"};
inline const std::vector<std::string> kUserTags{"selfie", "beach", "food", "dog", "car", "concert", "city", "sky"};
inline const std::vector<std::string> kSharedTags{"smoke", "weed", "party", "blunt", "night", "lights", "room", "table"};
inline const std::vector<std::string> kDealerHashtags{"plugnation", "xanax", "lean", "mdma", "lsd", "percs", "shrooms", "molly"};
inline const std::vector<std::string> kUserHashtags{"weekend", "420", "love", "instagood", "friends", "music", "fun", "chill"};

}  // namespace synth_vocab

namespace detail {

inline std::string draw_text(std::mt19937_64& rng, const std::vector<std::string>& cls, double signal,
                             std::size_t words) {
  std::bernoulli_distribution from_class(signal);
  std::string out;
  for (std::size_t i = 0; i < words; ++i) {
    const auto& vocab = from_class(rng) ? cls : synth_vocab::kSharedWords;
    std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
    if (!out.empty()) out += ' ';
    out += vocab[pick(rng)];
  }
  return out;
}

inline std::string draw_image(std::mt19937_64& rng, const std::vector<std::string>& cls, double signal,
                              std::size_t tags, const std::string& prefix, std::size_t id) {
  std::bernoulli_distribution from_class(signal);
  std::string out = prefix + "/";
  for (std::size_t i = 0; i < tags; ++i) {
    const auto& vocab = from_class(rng) ? cls : synth_vocab::kSharedTags;
    std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
    out += vocab[pick(rng)] + "_";
  }
  return out + std::to_string(id) + ".jpg";
}

}  // namespace detail

/// Deterministic dataset of spec.positives dealer and spec.negatives non-dealer records, interleaved by a seeded shuffle.
[[nodiscard]] inline Dataset generate_dataset(const SynthSpec& spec) {
  using namespace synth_vocab;
  std::mt19937_64 rng(spec.seed);
  Dataset ds;
  ds.split_seed = spec.seed;
  const auto n = spec.positives + spec.negatives;
  std::size_t image_id = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool dealer = i < spec.positives;
    const auto& miss = dealer ? spec.positive_missing : spec.negative_missing;
    const auto& words = dealer ? kDealerWords : kUserWords;
    const auto& tags = dealer ? kDealerTags : kUserTags;
    const auto& hashtags = dealer ? kDealerHashtags : kUserHashtags;
    QuadrupleRecord r;
    r.user_id = (dealer ? "d" : "u") + std::to_string(i);
    r.post_id = "p" + std::to_string(i / 2);
    r.label = dealer ? 1 : 0;
    std::bernoulli_distribution miss_pc(miss.pc), miss_pi(miss.pi), miss_hb(miss.hb), miss_hi(miss.hi);
    // Draw every random quantity regardless of missingness so rates do not shift the stream.
    auto pc = detail::draw_text(rng, words, spec.text_signal, spec.words_per_text);
    auto pi = detail::draw_image(rng, tags, spec.image_signal, spec.tags_per_image, "post", image_id++);
    auto hb = detail::draw_text(rng, words, spec.text_signal, spec.words_per_text);
    std::uniform_int_distribution<std::size_t> n_hi(1, kMaxHomepageImages);
    const auto count = n_hi(rng);
    std::vector<std::string> hi;
    for (std::size_t k = 0; k < count; ++k)
      hi.push_back(detail::draw_image(rng, tags, spec.image_signal, spec.tags_per_image, "home", image_id++));
    std::uniform_int_distribution<std::size_t> pick_tag(0, hashtags.size() - 1);
    for (int k = 0; k < 3; ++k) r.hashtags.insert(hashtags[pick_tag(rng)]);
    if (!miss_pc(rng)) r.pc_text = std::move(pc);
    if (!miss_pi(rng)) r.pi_ref = std::move(pi);
    if (!miss_hb(rng)) r.hb_text = std::move(hb);
    if (!miss_hi(rng)) r.hi_refs = std::move(hi);
    ds.records.push_back(std::move(r));
  }
  const auto perm = seeded_permutation(ds.records.size(), spec.seed ^ 0xabcdefULL);
  std::vector<QuadrupleRecord> shuffled;
  shuffled.reserve(ds.records.size());
  for (auto i : perm) shuffled.push_back(ds.records[i]);
  ds.records = std::move(shuffled);
  return ds;
}

}  // namespace dealerid
