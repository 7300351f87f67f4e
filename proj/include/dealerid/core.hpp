#pragma once

// Quadruple data model: one user's <PC, PI, HB, HI> evidence plus label,
// presence masks, the dataset container, splitting, and line-delimited JSON I/O.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace dealerid {

/// Raised for malformed or inconsistent input data (bad files, invariant violations).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for invalid configuration or arguments.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kMaxHomepageImages = 10;

struct PresenceMask {
  bool pc_present = false;
  bool pi_present = false;
  bool hb_present = false;
  bool hi_present = false;

  friend bool operator==(const PresenceMask&, const PresenceMask&) = default;

  /// Bit order: pc=1, pi=2, hb=4, hi=8.
  [[nodiscard]] constexpr unsigned bits() const {
    return (pc_present ? 1u : 0u) | (pi_present ? 2u : 0u) | (hb_present ? 4u : 0u) |
           (hi_present ? 8u : 0u);
  }

  static constexpr PresenceMask from_bits(unsigned b) {
    return PresenceMask{(b & 1u) != 0, (b & 2u) != 0, (b & 4u) != 0, (b & 8u) != 0};
  }

  static constexpr PresenceMask all() { return PresenceMask{true, true, true, true}; }
};

/// A mask is fusible when each stage-one pair, (PI, PC) and (HB, HI), keeps at
/// least one element. Three admissible states per pair gives 9 of the 16 masks.
[[nodiscard]] constexpr bool validate_mask(const PresenceMask& m) {
  return (m.pi_present || m.pc_present) && (m.hb_present || m.hi_present);
}

/// All 16 masks in bit order.
[[nodiscard]] inline std::array<PresenceMask, 16> all_masks() {
  std::array<PresenceMask, 16> out{};
  for (unsigned b = 0; b < 16; ++b) out[b] = PresenceMask::from_bits(b);
  return out;
}

struct QuadrupleRecord {
  std::string user_id;
  std::string post_id;
  int label = 0;  // 1 = dealer
  std::optional<std::string> pc_text;
  std::optional<std::string> pi_ref;
  std::optional<std::string> hb_text;
  std::vector<std::string> hi_refs;
  std::set<std::string> hashtags;

  friend bool operator==(const QuadrupleRecord&, const QuadrupleRecord&) = default;

  /// The mask implied by the fields; fields are authoritative.
  [[nodiscard]] PresenceMask mask() const {
    return PresenceMask{pc_text.has_value(), pi_ref.has_value(), hb_text.has_value(),
                        !hi_refs.empty()};
  }

  /// Throws DataError when the record breaks a structural invariant.
  void validate() const {
    if (label != 0 && label != 1)
      throw DataError("label must be 0 or 1 (got " + std::to_string(label) + ")");
    if (hi_refs.size() > kMaxHomepageImages)
      throw DataError("hi_refs holds " + std::to_string(hi_refs.size()) +
                      " images; at most 10 allowed");
  }
};

struct Dataset {
  std::vector<QuadrupleRecord> records;
  std::uint64_t split_seed = 0;

  friend bool operator==(const Dataset&, const Dataset&) = default;

  [[nodiscard]] std::size_t size() const { return records.size(); }
  [[nodiscard]] bool empty() const { return records.empty(); }
};

/// Seeded uniform permutation of [0, n).
[[nodiscard]] inline std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // Fisher-Yates with an explicit draw so the result does not depend on the
  // standard library's std::shuffle implementation.
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(idx[i - 1], idx[pick(rng)]);
  }
  return idx;
}

/// Partitions ds into (train, test) with |train| = round(train_fraction * |ds|).
[[nodiscard]] inline std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction,
                                                       std::uint64_t seed) {
  if (ds.empty()) throw DataError("empty dataset");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train_fraction must lie in (0, 1)");
  const auto n = ds.size();
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  const auto perm = seeded_permutation(n, seed);
  Dataset train{.records = {}, .split_seed = seed};
  Dataset test{.records = {}, .split_seed = seed};
  train.records.reserve(n_train);
  test.records.reserve(n - n_train);
  for (std::size_t i = 0; i < n; ++i)
    (i < n_train ? train : test).records.push_back(ds.records[perm[i]]);
  return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// JSON mapping

namespace detail {

inline std::optional<std::string> optional_string(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw DataError(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

}  // namespace detail

[[nodiscard]] inline nlohmann::json record_to_json(const QuadrupleRecord& r) {
  nlohmann::json j;
  j["user_id"] = r.user_id;
  j["post_id"] = r.post_id;
  j["label"] = r.label;
  if (r.pc_text) j["pc_text"] = *r.pc_text;
  if (r.pi_ref) j["pi_ref"] = *r.pi_ref;
  if (r.hb_text) j["hb_text"] = *r.hb_text;
  if (!r.hi_refs.empty()) j["hi_refs"] = r.hi_refs;
  j["hashtags"] = r.hashtags;
  const auto m = r.mask();
  j["mask"] = {{"pc_present", m.pc_present},
               {"pi_present", m.pi_present},
               {"hb_present", m.hb_present},
               {"hi_present", m.hi_present}};
  return j;
}

/// Parses one record. An explicit "mask" object, when present, must agree
/// with the mask implied by the fields.
[[nodiscard]] inline QuadrupleRecord record_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("record must be a JSON object");
  QuadrupleRecord r;
  if (!j.contains("user_id") || !j["user_id"].is_string()) throw DataError("missing user_id");
  if (!j.contains("post_id") || !j["post_id"].is_string()) throw DataError("missing post_id");
  r.user_id = j["user_id"].get<std::string>();
  r.post_id = j["post_id"].get<std::string>();
  if (!j.contains("label") || !j["label"].is_number_integer()) throw DataError("missing integer label");
  r.label = j["label"].get<int>();
  r.pc_text = detail::optional_string(j, "pc_text");
  r.pi_ref = detail::optional_string(j, "pi_ref");
  r.hb_text = detail::optional_string(j, "hb_text");
  if (auto it = j.find("hi_refs"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw DataError("hi_refs must be an array");
    for (const auto& e : *it) {
      if (!e.is_string()) throw DataError("hi_refs entries must be strings");
      r.hi_refs.push_back(e.get<std::string>());
    }
  }
  if (auto it = j.find("hashtags"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw DataError("hashtags must be an array");
    for (const auto& e : *it) {
      if (!e.is_string()) throw DataError("hashtags entries must be strings");
      r.hashtags.insert(e.get<std::string>());
    }
  }
  if (auto it = j.find("mask"); it != j.end() && !it->is_null()) {
    const auto& m = *it;
    const PresenceMask declared{m.value("pc_present", false), m.value("pi_present", false),
                                m.value("hb_present", false), m.value("hi_present", false)};
    const auto implied = r.mask();
    if (declared.pc_present != implied.pc_present)
      throw DataError("mask/field mismatch: pc_present disagrees with pc_text");
    if (declared.pi_present != implied.pi_present)
      throw DataError("mask/field mismatch: pi_present disagrees with pi_ref");
    if (declared.hb_present != implied.hb_present)
      throw DataError("mask/field mismatch: hb_present disagrees with hb_text");
    if (declared.hi_present != implied.hi_present)
      throw DataError("mask/field mismatch: hi_present disagrees with hi_refs");
  }
  r.validate();
  return r;
}

[[nodiscard]] inline Dataset parse_dataset(std::istream& in) {
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      ds.records.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return ds;
}

[[nodiscard]] inline Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path.string());
  return parse_dataset(in);
}

inline void write_dataset(std::ostream& out, const Dataset& ds) {
  for (const auto& r : ds.records) {
    r.validate();
    out << record_to_json(r).dump() << '\n';
  }
}

inline void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write dataset file: " + path.string());
  write_dataset(out, ds);
  if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace dealerid
