#pragma once

// Embedding providers turn record fields into fixed-dimension feature vectors.
// Synthetic providers hash character trigrams and project them with a seeded
// Rademacher projection; the file-backed provider reads externally computed
// vectors keyed by the SHA-256 of the input string.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <openssl/evp.h>

#include "dealerid/core.hpp"

namespace dealerid {

enum class Modality { text, image };
enum class Source { post_comment, post_image, homepage_bio, homepage_image };

inline constexpr std::size_t kDefaultTextDim = 768;
inline constexpr std::size_t kDefaultImageDim = 2048;

[[nodiscard]] constexpr Modality modality_of(Source s) {
  return (s == Source::post_comment || s == Source::homepage_bio) ? Modality::text : Modality::image;
}

[[nodiscard]] inline const char* to_string(Source s) {
  switch (s) {
    case Source::post_comment: return "post_comment";
    case Source::post_image: return "post_image";
    case Source::homepage_bio: return "homepage_bio";
    case Source::homepage_image: return "homepage_image";
  }
  return "?";
}

struct FeatureVector {
  std::vector<double> values;
  Modality modality = Modality::text;
  Source source = Source::post_comment;

  [[nodiscard]] std::size_t dim() const { return values.size(); }

  static FeatureVector zeros(std::size_t dim, Source src) {
    return FeatureVector{std::vector<double>(dim, 0.0), modality_of(src), src};
  }
};

// ---------------------------------------------------------------------------
// Hashing helpers

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Splits UTF-8 into code point byte slices. Invalid lead bytes are taken
/// as single-byte units so arbitrary input never throws.
inline std::vector<std::string_view> utf8_units(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if ((c & 0xE0) == 0xC0) len = 2;
    else if ((c & 0xF0) == 0xE0) len = 3;
    else if ((c & 0xF8) == 0xF0) len = 4;
    if (i + len > s.size()) len = 1;
    out.push_back(s.substr(i, len));
    i += len;
  }
  return out;
}

}  // namespace detail

/// Lowercase hex SHA-256 of the given bytes.
[[nodiscard]] inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

/// Bag of hashed character n-grams over code points, with boundary padding.
/// Text is ASCII-lowercased first.
[[nodiscard]] inline std::map<std::uint64_t, double> hashed_ngrams(std::string_view text,
                                                                   std::size_t n = 3) {
  std::string lowered(text);
  for (auto& c : lowered)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  auto units = detail::utf8_units(lowered);
  std::vector<std::string_view> padded;
  padded.reserve(units.size() + 2);
  padded.emplace_back("\x02");
  padded.insert(padded.end(), units.begin(), units.end());
  padded.emplace_back("\x03");
  std::map<std::uint64_t, double> bag;
  if (padded.size() < n) return bag;
  for (std::size_t i = 0; i + n <= padded.size(); ++i) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t k = 0; k < n; ++k) {
      h = detail::fnv1a64(padded[i + k], h);
      h = detail::fnv1a64("\x1f", h);
    }
    bag[h] += 1.0;
  }
  return bag;
}

// ---------------------------------------------------------------------------
// File-backed vector store

/// Directory of little-endian float32 vectors, one file per hex key, plus an
/// `index.tsv` mapping key to dimension.
class VectorStore {
 public:
  static constexpr const char* kIndexName = "index.tsv";

  VectorStore() = default;

  explicit VectorStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::ifstream in(dir_ / kIndexName);
    if (!in) return;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      std::istringstream ls(line);
      std::string key;
      std::size_t dim = 0;
      if (!(ls >> key >> dim))
        throw DataError("vector index line " + std::to_string(line_no) + " is malformed");
      index_[key] = dim;
    }
  }

  [[nodiscard]] const std::filesystem::path& dir() const { return dir_; }
  [[nodiscard]] const std::map<std::string, std::size_t>& index() const { return index_; }
  [[nodiscard]] bool contains(const std::string& key) const { return index_.contains(key); }

  [[nodiscard]] std::vector<double> read(const std::string& key) const {
    auto it = index_.find(key);
    if (it == index_.end()) throw DataError("embedding not found: " + key);
    std::ifstream in(dir_ / key, std::ios::binary);
    if (!in) throw DataError("embedding not found: " + key);
    std::vector<double> out(it->second);
    for (auto& v : out) {
      unsigned char b[4];
      if (!in.read(reinterpret_cast<char*>(b), 4))
        throw DataError("embedding file truncated: " + key);
      const std::uint32_t bits = std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) |
                                 (std::uint32_t{b[2]} << 16) | (std::uint32_t{b[3]} << 24);
      float f;
      std::memcpy(&f, &bits, sizeof f);
      v = f;
    }
    return out;
  }

  /// Writes (or overwrites) one vector and rewrites the index.
  void write(const std::string& key, std::span<const double> values) {
    std::filesystem::create_directories(dir_);
    {
      std::ofstream out(dir_ / key, std::ios::binary | std::ios::trunc);
      if (!out) throw DataError("cannot write embedding file for key " + key);
      for (double v : values) {
        const auto f = static_cast<float>(v);
        std::uint32_t bits;
        std::memcpy(&bits, &f, sizeof bits);
        const unsigned char b[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                                    static_cast<unsigned char>(bits >> 16),
                                    static_cast<unsigned char>(bits >> 24)};
        out.write(reinterpret_cast<const char*>(b), 4);
      }
    }
    index_[key] = values.size();
    std::ofstream idx(dir_ / kIndexName, std::ios::trunc);
    for (const auto& [k, d] : index_) idx << k << '\t' << d << '\n';
  }

 private:
  std::filesystem::path dir_;
  std::map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Providers

enum class ProviderKind { synthetic_text, synthetic_image, file_backed };

class EmbeddingProvider {
 public:
  static EmbeddingProvider synthetic_text(std::size_t dim = kDefaultTextDim, std::uint64_t seed = 0) {
    return EmbeddingProvider(ProviderKind::synthetic_text, dim, seed);
  }
  static EmbeddingProvider synthetic_image(std::size_t dim = kDefaultImageDim, std::uint64_t seed = 0) {
    return EmbeddingProvider(ProviderKind::synthetic_image, dim, seed);
  }
  static EmbeddingProvider file_backed(const std::filesystem::path& dir, std::size_t dim) {
    EmbeddingProvider p(ProviderKind::file_backed, dim, 0);
    p.store_ = VectorStore(dir);
    return p;
  }

  [[nodiscard]] ProviderKind kind() const { return kind_; }
  [[nodiscard]] std::size_t dim() const { return dim_; }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }

  /// Deterministic vector for an input string under this provider.
  [[nodiscard]] std::vector<double> encode(std::string_view input) const {
    if (kind_ == ProviderKind::file_backed) {
      const auto key = sha256_hex(input);
      auto v = store_.read(key);
      if (v.size() != dim_)
        throw DataError("embedding " + key + " has dim " + std::to_string(v.size()) + ", expected " +
                        std::to_string(dim_));
      return v;
    }
    std::vector<double> out(dim_, 0.0);
    if (input.empty()) return out;
    const std::uint64_t salt = detail::splitmix64(seed_ ^ (kind_ == ProviderKind::synthetic_text
                                                               ? 0x7465787400000000ULL
                                                               : 0x696d616700000000ULL));
    for (const auto& [h, count] : hashed_ngrams(input)) {
      const std::uint64_t base = detail::splitmix64(h ^ salt);
      // 64 random signs per splitmix draw.
      for (std::size_t j = 0; j < dim_; j += 64) {
        const std::uint64_t bits = detail::splitmix64(base + j);
        const std::size_t end = std::min(dim_, j + 64);
        for (std::size_t t = j; t < end; ++t) out[t] += ((bits >> (t - j)) & 1u) ? count : -count;
      }
    }
    double norm = 0.0;
    for (double v : out) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > 0.0)
      for (double& v : out) v /= norm;
    return out;
  }

 private:
  EmbeddingProvider(ProviderKind kind, std::size_t dim, std::uint64_t seed)
      : kind_(kind), dim_(dim), seed_(seed) {
    if (dim == 0) throw ConfigError("embedding dim must be positive");
  }

  ProviderKind kind_;
  std::size_t dim_;
  std::uint64_t seed_;
  VectorStore store_;
};

[[nodiscard]] inline FeatureVector embed_text(const EmbeddingProvider& p, std::string_view text,
                                              Source source = Source::post_comment) {
  if (p.kind() == ProviderKind::synthetic_image)
    throw ConfigError("embed_text requires a text or file-backed provider");
  return FeatureVector{p.encode(text), Modality::text, source};
}

[[nodiscard]] inline FeatureVector embed_image(const EmbeddingProvider& p,
                                               const std::optional<std::string>& ref,
                                               Source source = Source::post_image) {
  if (p.kind() == ProviderKind::synthetic_text)
    throw ConfigError("embed_image requires an image or file-backed provider");
  if (!ref) throw DataError("image reference is absent");
  return FeatureVector{p.encode(*ref), Modality::image, source};
}

/// Elementwise mean over the homepage image features; zeros when none exist.
[[nodiscard]] inline FeatureVector average_homepage(std::span<const FeatureVector> features,
                                                    std::size_t dim) {
  if (features.size() > kMaxHomepageImages)
    throw DataError("at most 10 homepage image features may be averaged");
  auto out = FeatureVector::zeros(dim, Source::homepage_image);
  if (features.empty()) return out;
  for (const auto& f : features) {
    if (f.dim() != dim)
      throw DataError("homepage features have mixed dims (" + std::to_string(f.dim()) + " vs " +
                      std::to_string(dim) + ")");
    for (std::size_t i = 0; i < dim; ++i) out.values[i] += f.values[i];
  }
  const double n = static_cast<double>(features.size());
  for (double& v : out.values) v /= n;
  return out;
}

struct Providers {
  EmbeddingProvider text = EmbeddingProvider::synthetic_text();
  EmbeddingProvider image = EmbeddingProvider::synthetic_image();
};

struct RecordFeatures {
  FeatureVector pc;
  FeatureVector pi;
  FeatureVector hb;
  FeatureVector hi;
  PresenceMask mask;
};

/// Embeds all four quadruple elements. Absent elements become zero vectors
/// with the mask bit cleared.
[[nodiscard]] inline RecordFeatures featurize(const QuadrupleRecord& rec, const Providers& providers) {
  const auto tdim = providers.text.dim();
  const auto idim = providers.image.dim();
  RecordFeatures out{
      rec.pc_text ? embed_text(providers.text, *rec.pc_text, Source::post_comment)
                  : FeatureVector::zeros(tdim, Source::post_comment),
      rec.pi_ref ? embed_image(providers.image, rec.pi_ref, Source::post_image)
                 : FeatureVector::zeros(idim, Source::post_image),
      rec.hb_text ? embed_text(providers.text, *rec.hb_text, Source::homepage_bio)
                  : FeatureVector::zeros(tdim, Source::homepage_bio),
      FeatureVector::zeros(idim, Source::homepage_image),
      rec.mask(),
  };
  std::vector<FeatureVector> hi;
  hi.reserve(rec.hi_refs.size());
  for (const auto& ref : rec.hi_refs) hi.push_back(embed_image(providers.image, ref, Source::homepage_image));
  out.hi = average_homepage(hi, idim);
  return out;
}

}  // namespace dealerid
