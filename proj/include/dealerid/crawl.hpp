#pragma once

// Hashtag-driven crawl loop over a synthetic social corpus with ground truth.
// A thresholded per-post image score stands in for the drug-post detector.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "dealerid/core.hpp"

namespace dealerid {

struct SimPost {
  std::string post_id;
  std::set<std::string> hashtags;
  double image_drug_score = 0.0;
  std::vector<std::string> commenter_ids;
  std::string caption;

  friend bool operator==(const SimPost&, const SimPost&) = default;
};

struct SimHomepage {
  std::string user_id;
  std::string bio;
  std::vector<std::string> image_refs;

  friend bool operator==(const SimHomepage&, const SimHomepage&) = default;
};

struct SyntheticWorld {
  std::vector<SimPost> posts;
  std::map<std::string, SimHomepage> users;
  std::set<std::string> ground_truth_dealers;
  std::uint64_t seed = 0;

  friend bool operator==(const SyntheticWorld&, const SyntheticWorld&) = default;

  /// Throws DataError on out-of-range scores or commenters without a homepage.
  void validate() const {
    for (const auto& p : posts) {
      if (!(p.image_drug_score >= 0.0 && p.image_drug_score <= 1.0))
        throw DataError("post " + p.post_id + " has image_drug_score outside [0, 1]");
      for (const auto& c : p.commenter_ids)
        if (!users.contains(c)) throw DataError("commenter " + c + " of post " + p.post_id + " has no homepage");
    }
  }

  /// hashtag -> indices of posts carrying it.
  [[nodiscard]] std::unordered_map<std::string, std::vector<std::size_t>> hashtag_index() const {
    std::unordered_map<std::string, std::vector<std::size_t>> idx;
    for (std::size_t i = 0; i < posts.size(); ++i)
      for (const auto& h : posts[i].hashtags) idx[h].push_back(i);
    return idx;
  }

  [[nodiscard]] std::set<std::string> all_hashtags() const {
    std::set<std::string> out;
    for (const auto& p : posts) out.insert(p.hashtags.begin(), p.hashtags.end());
    return out;
  }
};

/// Lowercases and strips leading '#'.
[[nodiscard]] inline std::string normalize_hashtag(std::string_view raw) {
  while (!raw.empty() && raw.front() == '#') raw.remove_prefix(1);
  std::string out(raw);
  for (auto& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

inline constexpr std::size_t kDefaultDealerTarget = 50;

struct CrawlState {
  std::set<std::string> hashtag_pool;
  std::map<std::string, std::size_t> hashtag_freq;
  std::set<std::string> visited_hashtags;
  std::set<std::string> collected_posts;
  std::set<std::string> collected_accounts;
  std::size_t threshold = kDefaultDealerTarget;  // dealer accounts to collect before stopping
  std::vector<std::string> seed_order;           // seeds are consumed first, in input order
};

[[nodiscard]] inline CrawlState seed_hashtags(const std::vector<std::string>& seeds,
                                              std::size_t threshold = kDefaultDealerTarget) {
  if (seeds.empty()) throw ConfigError("seed hashtag list is empty");
  CrawlState st;
  st.threshold = threshold;
  for (const auto& raw : seeds) {
    auto tag = normalize_hashtag(raw);
    if (tag.empty()) continue;
    if (st.hashtag_pool.insert(tag).second) {
      st.hashtag_freq.emplace(tag, 0);
      st.seed_order.push_back(tag);
    }
  }
  if (st.hashtag_pool.empty()) throw ConfigError("seed hashtag list is empty");
  return st;
}

struct CrawlStep {
  std::string hashtag;
  std::size_t posts_matched = 0;   // posts carrying the hashtag
  std::size_t posts_detected = 0;  // newly collected above-threshold posts
  std::size_t accounts_added = 0;
};

/// Picks the next hashtag: unvisited seeds in input order, then the
/// unvisited pool hashtag with the highest frequency (ties lexicographic).
[[nodiscard]] inline std::optional<std::string> next_hashtag(const CrawlState& st) {
  for (const auto& s : st.seed_order)
    if (!st.visited_hashtags.contains(s)) return s;
  std::optional<std::string> best;
  std::size_t best_freq = 0;
  for (const auto& tag : st.hashtag_pool) {  // std::set iterates lexicographically
    if (st.visited_hashtags.contains(tag)) continue;
    const auto it = st.hashtag_freq.find(tag);
    const std::size_t f = it == st.hashtag_freq.end() ? 0 : it->second;
    if (!best || f > best_freq) {
      best = tag;
      best_freq = f;
    }
  }
  return best;
}

class Crawler {
 public:
  explicit Crawler(const SyntheticWorld& world) : world_(world), index_(world.hashtag_index()) {}

  /// One expansion step; std::nullopt once the frontier is exhausted.
  std::optional<CrawlStep> step(CrawlState& st, double detector_threshold) const {
    const auto tag = next_hashtag(st);
    if (!tag) return std::nullopt;
    st.visited_hashtags.insert(*tag);
    CrawlStep out;
    out.hashtag = *tag;
    const auto it = index_.find(*tag);
    if (it == index_.end()) return out;
    out.posts_matched = it->second.size();
    for (auto i : it->second) {
      const auto& post = world_.posts[i];
      if (post.image_drug_score < detector_threshold) continue;
      if (!st.collected_posts.insert(post.post_id).second) continue;
      ++out.posts_detected;
      for (const auto& c : post.commenter_ids)
        if (st.collected_accounts.insert(c).second) ++out.accounts_added;
      for (const auto& h : post.hashtags) {
        if (h == *tag) continue;
        ++st.hashtag_freq[h];
        st.hashtag_pool.insert(h);
      }
    }
    return out;
  }

 private:
  const SyntheticWorld& world_;
  std::unordered_map<std::string, std::vector<std::size_t>> index_;
};

/// Convenience wrapper over Crawler for a single step.
inline std::optional<CrawlStep> crawl_step(CrawlState& st, const SyntheticWorld& world, double detector_threshold) {
  return Crawler(world).step(st, detector_threshold);
}

struct CrawlReport {
  std::size_t steps = 0;
  std::size_t collected_accounts = 0;
  std::size_t collected_dealers = 0;
  double dealer_recall = 0.0;
  double hashtag_coverage = 0.0;
  std::vector<CrawlStep> trajectory;
};

[[nodiscard]] inline std::size_t dealers_collected(const CrawlState& st, const SyntheticWorld& world) {
  std::size_t n = 0;
  for (const auto& a : st.collected_accounts) n += world.ground_truth_dealers.contains(a) ? 1 : 0;
  return n;
}

/// Steps until the dealer target is met or the frontier is exhausted.
[[nodiscard]] inline CrawlReport run_crawl(CrawlState& st, const SyntheticWorld& world, double detector_threshold) {
  const Crawler crawler(world);
  CrawlReport rep;
  while (dealers_collected(st, world) < st.threshold) {
    auto s = crawler.step(st, detector_threshold);
    if (!s) break;
    rep.trajectory.push_back(std::move(*s));
  }
  rep.steps = rep.trajectory.size();
  rep.collected_accounts = st.collected_accounts.size();
  rep.collected_dealers = dealers_collected(st, world);
  rep.dealer_recall = world.ground_truth_dealers.empty()
                          ? 0.0
                          : static_cast<double>(rep.collected_dealers) /
                                static_cast<double>(world.ground_truth_dealers.size());
  const auto total_tags = world.all_hashtags().size();
  rep.hashtag_coverage =
      total_tags ? static_cast<double>(st.visited_hashtags.size()) / static_cast<double>(total_tags) : 0.0;
  return rep;
}

[[nodiscard]] inline nlohmann::json report_to_json(const CrawlReport& r) {
  nlohmann::json traj = nlohmann::json::array();
  for (std::size_t i = 0; i < r.trajectory.size(); ++i) {
    const auto& s = r.trajectory[i];
    traj.push_back({{"step", i + 1},
                    {"hashtag", s.hashtag},
                    {"posts_matched", s.posts_matched},
                    {"posts_detected", s.posts_detected},
                    {"accounts_added", s.accounts_added}});
  }
  return {{"steps", r.steps},
          {"collected_accounts", r.collected_accounts},
          {"collected_dealers", r.collected_dealers},
          {"dealer_recall", r.dealer_recall},
          {"hashtag_coverage", r.hashtag_coverage},
          {"trajectory", traj}};
}

// ---------------------------------------------------------------------------
// World generation

struct WorldSpec {
  std::size_t posts = 1000;
  double dealer_fraction = 0.1;   // share of posts that are dealer advertising posts
  std::size_t dealer_clusters = 3;  // disjoint dealer hashtag vocabularies
  std::size_t tags_per_cluster = 12;
  std::size_t general_tags = 60;
  double bridge_prob = 0.15;      // dealer post also carries a tag from the next cluster
  double noise_tag_prob = 0.05;   // ordinary post carries a dealer tag
  std::size_t users = 400;
  std::size_t dealers_per_cluster = 20;
  std::uint64_t seed = 0;
};

/// Deterministic world: dealer posts score higher and carry dealer-cluster hashtags.
[[nodiscard]] inline SyntheticWorld generate_world(const WorldSpec& spec) {
  if (spec.posts == 0 || spec.users == 0) throw ConfigError("world spec counts must be positive");
  if (spec.dealer_fraction > 0.0 && (spec.dealer_clusters == 0 || spec.dealers_per_cluster == 0 ||
                                     spec.tags_per_cluster == 0))
    throw ConfigError("dealer clusters need tags and dealers");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SyntheticWorld w;
  w.seed = spec.seed;
  auto dealer_tag = [](std::size_t c, std::size_t i) { return "drug" + std::to_string(c) + "_" + std::to_string(i); };
  auto general_tag = [](std::size_t i) { return "tag" + std::to_string(i); };
  auto dealer_id = [](std::size_t c, std::size_t i) { return "dealer" + std::to_string(c) + "_" + std::to_string(i); };
  auto user_id = [](std::size_t i) { return "user" + std::to_string(i); };

  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  std::set<std::string> commenters;
  for (std::size_t i = 0; i < spec.posts; ++i) {
    SimPost p;
    p.post_id = "post" + std::to_string(i);
    const bool dealer_post = spec.dealer_fraction > 0.0 && unit(rng) < spec.dealer_fraction;
    if (dealer_post) {
      const auto c = pick(spec.dealer_clusters);
      p.image_drug_score = 0.45 + 0.55 * unit(rng);
      const auto n_tags = 2 + pick(3);
      for (std::size_t k = 0; k < n_tags; ++k) p.hashtags.insert(dealer_tag(c, pick(spec.tags_per_cluster)));
      if (spec.general_tags) p.hashtags.insert(general_tag(pick(spec.general_tags)));
      if (spec.dealer_clusters > 1 && unit(rng) < spec.bridge_prob)
        p.hashtags.insert(dealer_tag((c + 1) % spec.dealer_clusters, pick(spec.tags_per_cluster)));
      const auto n_dealers = 1 + pick(2);
      for (std::size_t k = 0; k < n_dealers; ++k) p.commenter_ids.push_back(dealer_id(c, pick(spec.dealers_per_cluster)));
      p.caption = "dm for menu";
    } else {
      p.image_drug_score = 0.6 * unit(rng);
      const auto n_tags = 1 + pick(3);
      for (std::size_t k = 0; k < n_tags && spec.general_tags; ++k) p.hashtags.insert(general_tag(pick(spec.general_tags)));
      if (spec.dealer_fraction > 0.0 && unit(rng) < spec.noise_tag_prob)
        p.hashtags.insert(dealer_tag(pick(spec.dealer_clusters), pick(spec.tags_per_cluster)));
      p.caption = "good times";
    }
    const auto n_users = pick(4);
    for (std::size_t k = 0; k < n_users; ++k) p.commenter_ids.push_back(user_id(pick(spec.users)));
    // Order-preserving dedupe of commenters.
    std::vector<std::string> uniq;
    for (auto& c : p.commenter_ids)
      if (std::find(uniq.begin(), uniq.end(), c) == uniq.end()) uniq.push_back(c);
    p.commenter_ids = std::move(uniq);
    for (const auto& c : p.commenter_ids) commenters.insert(c);
    w.posts.push_back(std::move(p));
  }
  for (const auto& c : commenters) {
    const bool dealer = c.rfind("dealer", 0) == 0;
    SimHomepage h;
    h.user_id = c;
    h.bio = dealer ? "plug | snap & wickr | ship nationwide" : "just vibes";
    for (std::size_t k = 0; k < 3; ++k) h.image_refs.push_back("home/" + c + "/" + std::to_string(k) + ".jpg");
    w.users.emplace(c, std::move(h));
    if (dealer) w.ground_truth_dealers.insert(c);
  }
  return w;
}

// ---------------------------------------------------------------------------
// World files: line-delimited JSON with a "kind" discriminator.

inline void save_world(const SyntheticWorld& w, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write world file: " + path.string());
  out << nlohmann::json{{"kind", "meta"}, {"seed", w.seed}, {"ground_truth_dealers", w.ground_truth_dealers}}.dump()
      << '\n';
  for (const auto& p : w.posts)
    out << nlohmann::json{{"kind", "post"},
                          {"post_id", p.post_id},
                          {"hashtags", p.hashtags},
                          {"image_drug_score", p.image_drug_score},
                          {"commenter_ids", p.commenter_ids},
                          {"caption", p.caption}}
               .dump()
        << '\n';
  for (const auto& [id, h] : w.users)
    out << nlohmann::json{{"kind", "user"}, {"user_id", id}, {"bio", h.bio}, {"image_refs", h.image_refs}}.dump()
        << '\n';
}

[[nodiscard]] inline SyntheticWorld load_world(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open world file: " + path.string());
  SyntheticWorld w;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto kind = j.at("kind").get<std::string>();
      if (kind == "meta") {
        w.seed = j.value("seed", std::uint64_t{0});
        w.ground_truth_dealers = j.at("ground_truth_dealers").get<std::set<std::string>>();
      } else if (kind == "post") {
        w.posts.push_back(SimPost{j.at("post_id").get<std::string>(), j.at("hashtags").get<std::set<std::string>>(),
                                  j.at("image_drug_score").get<double>(),
                                  j.at("commenter_ids").get<std::vector<std::string>>(), j.value("caption", "")});
      } else if (kind == "user") {
        const auto id = j.at("user_id").get<std::string>();
        w.users[id] = SimHomepage{id, j.value("bio", ""), j.value("image_refs", std::vector<std::string>{})};
      } else {
        throw DataError("unknown kind '" + kind + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError("world line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("world line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  w.validate();
  return w;
}

}  // namespace dealerid
