#pragma once

// Annotation store: tasks over a post corpus, an append-only JSONL revision
// log, and conversion of finished tasks into quadruple records.

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dealerid/core.hpp"

namespace dealerid::annotation {

using nlohmann::json;

inline constexpr std::array kDrugForms{"powder", "pills", "liquid", "cannabis", "mushroom", "lsd", "none"};
inline constexpr std::array kContactApps{"snapchat", "wickr", "kik", "whatsapp", "telegram", "email", "none"};
inline constexpr std::array kCommentRoles{"dealer", "consumer", "neither"};

template <std::size_t N>
bool in_enum(const std::array<const char*, N>& values, const std::string& s) {
  return std::any_of(values.begin(), values.end(), [&](const char* v) { return s == v; });
}

/// Enum values shared with clients.
[[nodiscard]] inline json schema() {
  return {{"drug_form", kDrugForms}, {"contact_app", kContactApps}, {"comment_role", kCommentRoles}};
}

/// Error carrying an HTTP-style status and an optional offending field.
struct ApiError : std::runtime_error {
  int status;
  std::string code;
  std::optional<std::string> field;
  ApiError(int s, std::string c, const std::string& msg, std::optional<std::string> f = std::nullopt)
      : std::runtime_error(msg), status(s), code(std::move(c)), field(std::move(f)) {}

  [[nodiscard]] json body() const {
    json j{{"code", code}, {"message", what()}};
    if (field) j["field"] = *field;
    return j;
  }
};

inline ApiError validation_error(const std::string& field, const std::string& msg) {
  return {422, "validation_error", msg, field};
}

// ---------------------------------------------------------------------------
// Corpus

struct Comment {
  std::string comment_id;
  std::string user_id;
  std::string text;
};

struct Post {
  std::string post_id;
  std::vector<std::string> image_refs;
  std::string caption;
  std::vector<std::string> hashtags;
  std::vector<Comment> comments;

  [[nodiscard]] bool has_commenter(const std::string& user) const {
    return std::any_of(comments.begin(), comments.end(), [&](const Comment& c) { return c.user_id == user; });
  }
};

struct UserPost {
  std::string image_ref;
  std::int64_t timestamp = 0;
};

struct User {
  std::string user_id;
  std::optional<std::string> bio;
  std::vector<UserPost> posts;
};

struct Corpus {
  std::vector<Post> posts;  // task order = corpus order
  std::map<std::string, User> users;

  [[nodiscard]] const Post* find_post(const std::string& id) const {
    for (const auto& p : posts)
      if (p.post_id == id) return &p;
    return nullptr;
  }
};

inline constexpr std::size_t kHomepageImages = kMaxHomepageImages;

struct HomepageView {
  std::string user_id;
  std::optional<std::string> bio;
  std::vector<std::string> image_refs;  // newest first
};

/// Bio plus the latest posts' image refs (newest first, ties by ref).
[[nodiscard]] inline HomepageView homepage_view(const Corpus& corpus, const std::string& user_id) {
  const auto it = corpus.users.find(user_id);
  if (it == corpus.users.end()) throw ApiError(404, "not_found", "unknown user: " + user_id);
  auto posts = it->second.posts;
  std::stable_sort(posts.begin(), posts.end(), [](const UserPost& a, const UserPost& b) {
    return a.timestamp != b.timestamp ? a.timestamp > b.timestamp : a.image_ref < b.image_ref;
  });
  HomepageView v{user_id, it->second.bio, {}};
  for (std::size_t i = 0; i < posts.size() && i < kHomepageImages; ++i) v.image_refs.push_back(posts[i].image_ref);
  return v;
}

[[nodiscard]] inline json to_json(const Post& p) {
  json comments = json::array();
  for (const auto& c : p.comments) comments.push_back({{"comment_id", c.comment_id}, {"user_id", c.user_id}, {"text", c.text}});
  return {{"post_id", p.post_id}, {"image_refs", p.image_refs}, {"caption", p.caption}, {"hashtags", p.hashtags},
          {"comments", comments}};
}

inline void save_corpus(const Corpus& c, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write corpus: " + path.string());
  for (const auto& p : c.posts) {
    auto j = to_json(p);
    j["kind"] = "post";
    out << j.dump() << '\n';
  }
  for (const auto& [id, u] : c.users) {
    json posts = json::array();
    for (const auto& p : u.posts) posts.push_back({{"image_ref", p.image_ref}, {"timestamp", p.timestamp}});
    out << json{{"kind", "user"}, {"user_id", id}, {"bio", u.bio ? json(*u.bio) : json(nullptr)}, {"posts", posts}}.dump()
        << '\n';
  }
}

[[nodiscard]] inline Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus: " + path.string());
  Corpus c;
  std::set<std::string> post_ids, comment_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      const auto kind = j.at("kind").get<std::string>();
      if (kind == "post") {
        Post p;
        p.post_id = j.at("post_id").get<std::string>();
        if (!post_ids.insert(p.post_id).second) throw DataError("duplicate post_id " + p.post_id);
        p.image_refs = j.value("image_refs", std::vector<std::string>{});
        p.caption = j.value("caption", "");
        p.hashtags = j.value("hashtags", std::vector<std::string>{});
        for (const auto& cj : j.value("comments", json::array())) {
          Comment cm{cj.at("comment_id").get<std::string>(), cj.at("user_id").get<std::string>(), cj.value("text", "")};
          if (!comment_ids.insert(cm.comment_id).second) throw DataError("duplicate comment_id " + cm.comment_id);
          p.comments.push_back(std::move(cm));
        }
        c.posts.push_back(std::move(p));
      } else if (kind == "user") {
        User u;
        u.user_id = j.at("user_id").get<std::string>();
        if (j.contains("bio") && !j["bio"].is_null()) u.bio = j["bio"].get<std::string>();
        for (const auto& pj : j.value("posts", json::array()))
          u.posts.push_back({pj.at("image_ref").get<std::string>(), pj.value("timestamp", std::int64_t{0})});
        c.users[u.user_id] = std::move(u);
      } else {
        throw DataError("unknown kind '" + kind + "'");
      }
    } catch (const json::exception& e) {
      throw DataError("corpus line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return c;
}

struct CorpusSpec {
  std::size_t posts = 40;
  std::size_t dealers = 12;
  std::size_t users = 60;
  double dealer_post_fraction = 0.4;
  std::uint64_t seed = 0;
};

/// Small deterministic corpus for demos and tests. Dealer commenters leave
/// contact-style comments; user ids encode their role (dealer<i>, user<i>).
[[nodiscard]] inline Corpus generate_corpus(const CorpusSpec& spec) {
  if (spec.posts == 0 || spec.users == 0) throw ConfigError("corpus spec counts must be positive");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  const std::vector<std::string> dealer_lines{"hmu on snap for the menu", "wickr me, shipping today",
                                              "dm for prices, legit plug", "telegram only, bulk available"};
  const std::vector<std::string> user_lines{"where do i get this", "lol same", "that party was wild", "need this rn",
                                            "fire pic"};
  Corpus c;
  std::size_t cid = 0;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < spec.posts; ++i) {
    Post p;
    p.post_id = "p" + std::to_string(i);
    const bool dealer_post = spec.dealers > 0 && unit(rng) < spec.dealer_post_fraction;
    p.image_refs = {"posts/" + p.post_id + "/0.jpg"};
    p.caption = dealer_post ? "restocked, dm" : "weekend";
    p.hashtags = dealer_post ? std::vector<std::string>{"xanax", "plug"} : std::vector<std::string>{"party"};
    const auto n_dealers = dealer_post ? 1 + pick(2) : 0;
    std::set<std::string> who;
    for (std::size_t k = 0; k < n_dealers; ++k) who.insert("dealer" + std::to_string(pick(spec.dealers)));
    for (std::size_t k = 0, n = 1 + pick(3); k < n; ++k) who.insert("user" + std::to_string(pick(spec.users)));
    for (const auto& u : who) {
      const bool d = u.rfind("dealer", 0) == 0;
      const auto& lines = d ? dealer_lines : user_lines;
      p.comments.push_back({"c" + std::to_string(cid++), u, lines[pick(lines.size())]});
      seen.insert(u);
    }
    c.posts.push_back(std::move(p));
  }
  for (const auto& u : seen) {
    const bool d = u.rfind("dealer", 0) == 0;
    User user{u, std::nullopt, {}};
    if (unit(rng) < 0.8) user.bio = d ? "plug | snap & wickr | ship nationwide" : "living my best life";
    for (std::size_t k = 0, n = pick(15); k < n; ++k)
      user.posts.push_back({"home/" + u + "/" + std::to_string(k) + ".jpg", static_cast<std::int64_t>(1000 + k)});
    c.users.emplace(u, std::move(user));
  }
  return c;
}

// ---------------------------------------------------------------------------
// Annotations

struct ImageAnnotation {
  std::string image_ref;
  std::string drug_form;
  std::string contact_app;
};

struct CommentAnnotation {
  std::string comment_id;
  std::string role;
  bool has_contact_info = false;
};

struct PostVerdict {
  bool contains_dealer = false;
  std::set<std::string> dealer_user_ids;
};

struct Submission {
  std::vector<ImageAnnotation> images;
  std::vector<CommentAnnotation> comments;
  PostVerdict verdict;
};

[[nodiscard]] inline json to_json(const Submission& s) {
  json images = json::array(), comments = json::array();
  for (const auto& i : s.images)
    images.push_back({{"image_ref", i.image_ref}, {"drug_form", i.drug_form}, {"contact_app", i.contact_app}});
  for (const auto& c : s.comments)
    comments.push_back({{"comment_id", c.comment_id}, {"role", c.role}, {"has_contact_info", c.has_contact_info}});
  return {{"images", images},
          {"comments", comments},
          {"verdict", {{"contains_dealer", s.verdict.contains_dealer}, {"dealer_user_ids", s.verdict.dealer_user_ids}}}};
}

namespace detail {

inline const json& require(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) throw validation_error(path + key, std::string("missing field ") + key);
  return obj.at(key);
}

inline std::string require_string(const json& obj, const char* key, const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_string()) throw validation_error(path + key, std::string(key) + " must be a string");
  return v.get<std::string>();
}

}  // namespace detail

/// Parses and validates a submission against the post it annotates.
[[nodiscard]] inline Submission parse_submission(const json& body, const Post& post) {
  using detail::require;
  using detail::require_string;
  if (!body.is_object()) throw validation_error("body", "submission must be a JSON object");
  Submission s;
  const auto& images = body.contains("images") ? body["images"] : json::array();
  if (!images.is_array()) throw validation_error("images", "images must be an array");
  std::set<std::string> refs(post.image_refs.begin(), post.image_refs.end());
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto path = "images[" + std::to_string(i) + "].";
    ImageAnnotation a{require_string(images[i], "image_ref", path), require_string(images[i], "drug_form", path),
                      require_string(images[i], "contact_app", path)};
    if (!refs.contains(a.image_ref)) throw validation_error(path + "image_ref", "image not in post: " + a.image_ref);
    if (!in_enum(kDrugForms, a.drug_form)) throw validation_error(path + "drug_form", "invalid drug_form: " + a.drug_form);
    if (!in_enum(kContactApps, a.contact_app))
      throw validation_error(path + "contact_app", "invalid contact_app: " + a.contact_app);
    s.images.push_back(std::move(a));
  }
  const auto& comments = body.contains("comments") ? body["comments"] : json::array();
  if (!comments.is_array()) throw validation_error("comments", "comments must be an array");
  for (std::size_t i = 0; i < comments.size(); ++i) {
    const auto path = "comments[" + std::to_string(i) + "].";
    CommentAnnotation a{require_string(comments[i], "comment_id", path), require_string(comments[i], "role", path), false};
    if (comments[i].contains("has_contact_info")) {
      if (!comments[i]["has_contact_info"].is_boolean())
        throw validation_error(path + "has_contact_info", "has_contact_info must be a boolean");
      a.has_contact_info = comments[i]["has_contact_info"].get<bool>();
    }
    if (std::none_of(post.comments.begin(), post.comments.end(),
                     [&](const Comment& c) { return c.comment_id == a.comment_id; }))
      throw validation_error(path + "comment_id", "comment not in post: " + a.comment_id);
    if (!in_enum(kCommentRoles, a.role)) throw validation_error(path + "role", "invalid role: " + a.role);
    s.comments.push_back(std::move(a));
  }
  const auto& verdict = require(body, "verdict", "");
  const auto& cd = require(verdict, "contains_dealer", "verdict.");
  if (!cd.is_boolean()) throw validation_error("verdict.contains_dealer", "contains_dealer must be a boolean");
  s.verdict.contains_dealer = cd.get<bool>();
  if (verdict.contains("dealer_user_ids")) {
    const auto& ids = verdict["dealer_user_ids"];
    if (!ids.is_array()) throw validation_error("verdict.dealer_user_ids", "dealer_user_ids must be an array");
    for (const auto& id : ids) {
      if (!id.is_string()) throw validation_error("verdict.dealer_user_ids", "dealer ids must be strings");
      const auto u = id.get<std::string>();
      if (!post.has_commenter(u)) throw validation_error("verdict.dealer_user_ids", "not a commenter on this post: " + u);
      s.verdict.dealer_user_ids.insert(u);
    }
  }
  if (s.verdict.contains_dealer == s.verdict.dealer_user_ids.empty())
    throw validation_error("verdict.dealer_user_ids",
                           s.verdict.contains_dealer ? "contains_dealer requires dealer_user_ids"
                                                     : "dealer_user_ids must be empty when contains_dealer is false");
  return s;
}

// ---------------------------------------------------------------------------
// Store

enum class Status { unlabeled, in_progress, done };

[[nodiscard]] inline const char* to_string(Status s) {
  switch (s) {
    case Status::unlabeled: return "unlabeled";
    case Status::in_progress: return "in_progress";
    case Status::done: return "done";
  }
  return "?";
}

struct TaskState {
  Status status = Status::unlabeled;
  std::optional<std::string> assigned_to;
  std::vector<Submission> history;  // revision r is history[r-1]
};

struct ExportResult {
  std::size_t written = 0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t skipped = 0;  // commenters without a valid quadruple (e.g. no homepage data)
};

/// Fig. 4 style conversion: one record per (post, commenter); verdict-named
/// dealers are positives, other commenters negatives unless a comment of
/// theirs was marked dealer without a matching verdict (ambiguous, skipped).
[[nodiscard]] inline std::vector<QuadrupleRecord> convert_task(const Corpus& corpus, const Post& post,
                                                                const Submission& sub, std::size_t* skipped = nullptr) {
  std::vector<QuadrupleRecord> out;
  std::vector<std::string> order;
  std::map<std::string, std::string> text;
  for (const auto& c : post.comments) {
    if (!text.contains(c.user_id)) order.push_back(c.user_id);
    auto& t = text[c.user_id];
    if (!c.text.empty()) t += (t.empty() ? "" : " ") + c.text;
  }
  std::set<std::string> marked_dealer;
  for (const auto& a : sub.comments)
    if (a.role == "dealer")
      for (const auto& c : post.comments)
        if (c.comment_id == a.comment_id) marked_dealer.insert(c.user_id);
  for (const auto& u : order) {
    const bool positive = sub.verdict.dealer_user_ids.contains(u);
    if (!positive && marked_dealer.contains(u)) {
      if (skipped) ++*skipped;
      continue;
    }
    QuadrupleRecord r;
    r.user_id = u;
    r.post_id = post.post_id;
    r.label = positive ? 1 : 0;
    if (!text[u].empty()) r.pc_text = text[u];
    if (!post.image_refs.empty()) r.pi_ref = post.image_refs.front();
    const auto it = corpus.users.find(u);
    if (it != corpus.users.end()) {
      const auto view = homepage_view(corpus, u);
      if (view.bio && !view.bio->empty()) r.hb_text = view.bio;
      r.hi_refs = view.image_refs;
    }
    r.hashtags = {post.hashtags.begin(), post.hashtags.end()};
    if (!validate_mask(r.mask())) {
      if (skipped) ++*skipped;
      continue;
    }
    out.push_back(std::move(r));
  }
  return out;
}

class Store {
 public:
  /// Opens a store over a corpus, replaying any existing log at log_path.
  Store(Corpus corpus, std::filesystem::path log_path) : corpus_(std::move(corpus)), log_path_(std::move(log_path)) {
    for (const auto& p : corpus_.posts) tasks_[p.post_id];
    if (!log_path_.empty() && std::filesystem::exists(log_path_)) replay();
    if (!log_path_.empty()) {
      log_.open(log_path_, std::ios::app);
      if (!log_) throw DataError("cannot open revision log: " + log_path_.string());
    }
  }

  [[nodiscard]] const Corpus& corpus() const { return corpus_; }

  /// The caller's current task, or the oldest unlabeled one (now assigned).
  std::optional<json> next_task(const std::string& annotator) {
    std::lock_guard lk(mu_);
    for (const auto& p : corpus_.posts) {
      const auto& t = tasks_.at(p.post_id);
      if (t.status == Status::in_progress && t.assigned_to == annotator) return task_json(p);
    }
    for (const auto& p : corpus_.posts)
      if (tasks_.at(p.post_id).status == Status::unlabeled) {
        commit({{"op", "assign"}, {"task", p.post_id}, {"annotator", annotator}});
        return task_json(p);
      }
    return std::nullopt;
  }

  void release(const std::string& task_id, const std::string& annotator) {
    std::lock_guard lk(mu_);
    const auto& t = task(task_id);
    if (t.status != Status::in_progress || t.assigned_to != annotator)
      throw ApiError(409, "conflict", "task " + task_id + " is not in progress for " + annotator);
    commit({{"op", "release"}, {"task", task_id}, {"annotator", annotator}});
  }

  void reopen(const std::string& task_id, const std::string& annotator) {
    std::lock_guard lk(mu_);
    const auto& t = task(task_id);
    if (t.status != Status::done || t.assigned_to != annotator)
      throw ApiError(409, "conflict", "task " + task_id + " is not done by " + annotator);
    commit({{"op", "reopen"}, {"task", task_id}, {"annotator", annotator}});
  }

  /// Validates and stores a submission; returns the task's revision number.
  std::size_t submit(const std::string& task_id, const std::string& annotator, const json& body) {
    std::lock_guard lk(mu_);
    const auto& t = task(task_id);
    if (t.status == Status::unlabeled || t.assigned_to != annotator)
      throw ApiError(409, "conflict", "task " + task_id + " is not assigned to " + annotator);
    const auto sub = parse_submission(body, *corpus_.find_post(task_id));
    commit({{"op", "submit"}, {"task", task_id}, {"annotator", annotator}, {"payload", to_json(sub)}});
    return tasks_.at(task_id).history.size();
  }

  [[nodiscard]] HomepageView homepage(const std::string& user_id) const { return homepage_view(corpus_, user_id); }

  [[nodiscard]] json stats() const {
    std::lock_guard lk(mu_);
    std::map<std::string, std::size_t> counts{{"unlabeled", 0}, {"in_progress", 0}, {"done", 0}};
    for (const auto& [_, t] : tasks_) ++counts[to_string(t.status)];
    return {{"unlabeled", counts["unlabeled"]}, {"in_progress", counts["in_progress"]}, {"done", counts["done"]},
            {"revisions", revisions_}};
  }

  /// Canonical dump of all task state, for replay comparisons.
  [[nodiscard]] json state() const {
    std::lock_guard lk(mu_);
    json out = json::object();
    for (const auto& [id, t] : tasks_) {
      json hist = json::array();
      for (const auto& s : t.history) hist.push_back(to_json(s));
      out[id] = {{"status", to_string(t.status)},
                 {"assigned_to", t.assigned_to ? json(*t.assigned_to) : json(nullptr)},
                 {"history", hist}};
    }
    return out;
  }

  [[nodiscard]] std::optional<TaskState> task_state(const std::string& id) const {
    std::lock_guard lk(mu_);
    const auto it = tasks_.find(id);
    if (it == tasks_.end()) return std::nullopt;
    return it->second;
  }

  /// Records from every done task (latest revision), in corpus order.
  [[nodiscard]] std::vector<QuadrupleRecord> labeled_records(ExportResult* res = nullptr) const {
    std::lock_guard lk(mu_);
    std::vector<QuadrupleRecord> out;
    std::set<std::pair<std::string, std::string>> seen;
    std::size_t skipped = 0, done = 0;
    for (const auto& p : corpus_.posts) {
      const auto& t = tasks_.at(p.post_id);
      if (t.status != Status::done) continue;
      ++done;
      for (auto& r : convert_task(corpus_, p, t.history.back(), &skipped))
        if (seen.emplace(r.post_id, r.user_id).second) out.push_back(std::move(r));
    }
    if (done == 0) throw ApiError(409, "conflict", "no completed tasks to export");
    if (res) {
      res->written = out.size();
      res->skipped = skipped;
      res->positives = static_cast<std::size_t>(std::count_if(out.begin(), out.end(), [](const auto& r) { return r.label == 1; }));
      res->negatives = res->written - res->positives;
    }
    return out;
  }

  ExportResult export_labeled(const std::filesystem::path& out) const {
    ExportResult res;
    Dataset ds;
    ds.records = labeled_records(&res);
    try {
      save_dataset(ds, out);
    } catch (const std::exception& e) {
      throw ApiError(500, "write_failed", e.what());
    }
    return res;
  }

 private:
  TaskState& task(const std::string& id) {
    const auto it = tasks_.find(id);
    if (it == tasks_.end()) throw ApiError(404, "not_found", "unknown task: " + id);
    return it->second;
  }

  json task_json(const Post& p) const {
    auto j = to_json(p);
    const auto& t = tasks_.at(p.post_id);
    j["status"] = to_string(t.status);
    j["assigned_to"] = t.assigned_to ? json(*t.assigned_to) : json(nullptr);
    j["revision"] = t.history.size();
    return j;
  }

  // Appends a revision to the log, then folds it into memory.
  void commit(json entry) {
    entry["rev"] = revisions_ + 1;
    if (log_.is_open()) {
      log_ << entry.dump() << '\n';
      log_.flush();
      if (!log_) throw ApiError(500, "write_failed", "revision log write failed");
    }
    apply(entry);
  }

  void apply(const json& e) {
    const auto op = e.at("op").get<std::string>();
    auto& t = task(e.at("task").get<std::string>());
    const auto who = e.at("annotator").get<std::string>();
    if (op == "assign") {
      t.status = Status::in_progress;
      t.assigned_to = who;
    } else if (op == "release") {
      t.status = Status::unlabeled;
      t.assigned_to.reset();
    } else if (op == "reopen") {
      t.status = Status::in_progress;
    } else if (op == "submit") {
      t.history.push_back(parse_submission(e.at("payload"), *corpus_.find_post(e.at("task").get<std::string>())));
      t.status = Status::done;
      t.assigned_to = who;
    } else {
      throw DataError("unknown revision op '" + op + "'");
    }
    ++revisions_;
  }

  void replay() {
    std::ifstream in(log_path_);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        apply(json::parse(line));
      } catch (const std::exception& e) {
        throw DataError("revision log line " + std::to_string(line_no) + ": " + e.what());
      }
    }
  }

  Corpus corpus_;
  std::filesystem::path log_path_;
  std::ofstream log_;
  std::map<std::string, TaskState> tasks_;
  std::size_t revisions_ = 0;
  mutable std::mutex mu_;
};

/// "token annotator" pairs, one per line; '#' comments.
[[nodiscard]] inline std::map<std::string, std::string> load_tokens(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open token file: " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    std::string token, who;
    if (!(ss >> token >> who)) throw ConfigError("token file lines must be 'token annotator'");
    out[token] = who;
  }
  if (out.empty()) throw ConfigError("token file lists no annotators");
  return out;
}

}  // namespace dealerid::annotation
