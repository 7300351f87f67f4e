#pragma once

// Hashtag co-occurrence graph, centrality measures, greedy modularity
// communities and sunburst documents.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "dealerid/core.hpp"
#include "dealerid/crawl.hpp"

namespace dealerid {

/// Undirected weighted graph over hashtags. Nodes are kept sorted so that
/// index order equals lexicographic order.
struct HashtagGraph {
  std::vector<std::string> nodes;
  std::vector<std::size_t> frequency;         // posts containing the tag
  std::vector<std::map<std::size_t, double>> adj;  // neighbour -> co-occurrence count

  [[nodiscard]] std::size_t size() const { return nodes.size(); }

  [[nodiscard]] std::optional<std::size_t> index_of(const std::string& tag) const {
    const auto it = std::lower_bound(nodes.begin(), nodes.end(), tag);
    if (it == nodes.end() || *it != tag) return std::nullopt;
    return static_cast<std::size_t>(it - nodes.begin());
  }

  [[nodiscard]] double weight(const std::string& a, const std::string& b) const {
    const auto i = index_of(a), j = index_of(b);
    if (!i || !j) return 0.0;
    const auto it = adj[*i].find(*j);
    return it == adj[*i].end() ? 0.0 : it->second;
  }

  [[nodiscard]] std::size_t edge_count() const {
    std::size_t e = 0;
    for (const auto& a : adj) e += a.size();
    return e / 2;
  }

  [[nodiscard]] double total_weight() const {
    double m = 0.0;
    for (const auto& a : adj)
      for (const auto& [_, w] : a) m += w;
    return m / 2.0;
  }
};

template <typename Posts>
[[nodiscard]] HashtagGraph build_graph(const Posts& posts) {
  std::map<std::string, std::size_t> freq;
  for (const auto& tags : posts)
    for (const auto& t : tags) ++freq[t];
  HashtagGraph g;
  for (const auto& [t, f] : freq) {
    g.nodes.push_back(t);
    g.frequency.push_back(f);
  }
  g.adj.resize(g.nodes.size());
  for (const auto& tags : posts) {
    std::vector<std::size_t> ids;
    for (const auto& t : tags) ids.push_back(*g.index_of(t));
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    for (std::size_t a = 0; a < ids.size(); ++a)
      for (std::size_t b = a + 1; b < ids.size(); ++b) {
        g.adj[ids[a]][ids[b]] += 1.0;
        g.adj[ids[b]][ids[a]] += 1.0;
      }
  }
  return g;
}

[[nodiscard]] inline HashtagGraph build_graph(const SyntheticWorld& world) {
  std::vector<std::set<std::string>> posts;
  posts.reserve(world.posts.size());
  for (const auto& p : world.posts) posts.push_back(p.hashtags);
  return build_graph(posts);
}

[[nodiscard]] inline HashtagGraph build_graph(const Dataset& ds) {
  std::vector<std::set<std::string>> posts;
  posts.reserve(ds.records.size());
  for (const auto& r : ds.records) posts.push_back(r.hashtags);
  return build_graph(posts);
}

/// Brandes accumulation over unweighted shortest paths.
[[nodiscard]] inline std::map<std::string, double> betweenness(const HashtagGraph& g) {
  const auto n = g.size();
  std::vector<double> bc(n, 0.0);
  std::vector<double> sigma(n), delta(n);
  std::vector<long> dist(n);
  std::vector<std::vector<std::size_t>> pred(n);
  std::vector<std::size_t> order;
  for (std::size_t s = 0; s < n; ++s) {
    std::fill(sigma.begin(), sigma.end(), 0.0);
    std::fill(delta.begin(), delta.end(), 0.0);
    std::fill(dist.begin(), dist.end(), -1L);
    for (auto& p : pred) p.clear();
    order.clear();
    sigma[s] = 1.0;
    dist[s] = 0;
    std::deque<std::size_t> q{s};
    while (!q.empty()) {
      const auto v = q.front();
      q.pop_front();
      order.push_back(v);
      for (const auto& [w, _] : g.adj[v]) {
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          q.push_back(w);
        }
        if (dist[w] == dist[v] + 1) {
          sigma[w] += sigma[v];
          pred[w].push_back(v);
        }
      }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const auto w = *it;
      for (auto v : pred[w]) delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
      if (w != s) bc[w] += delta[w];
    }
  }
  // Each unordered pair was counted from both endpoints.
  const double scale = n > 2 ? 1.0 / (static_cast<double>(n - 1) * static_cast<double>(n - 2)) : 0.0;
  std::map<std::string, double> out;
  for (std::size_t v = 0; v < n; ++v) out[g.nodes[v]] = bc[v] * scale;
  return out;
}

[[nodiscard]] inline std::map<std::string, double> clustering_coefficient(const HashtagGraph& g) {
  std::map<std::string, double> out;
  for (std::size_t v = 0; v < g.size(); ++v) {
    const auto deg = g.adj[v].size();
    if (deg < 2) {
      out[g.nodes[v]] = 0.0;
      continue;
    }
    std::size_t tri = 0;
    for (auto a = g.adj[v].begin(); a != g.adj[v].end(); ++a)
      for (auto b = std::next(a); b != g.adj[v].end(); ++b) tri += g.adj[a->first].contains(b->first) ? 1 : 0;
    out[g.nodes[v]] = 2.0 * static_cast<double>(tri) / (static_cast<double>(deg) * static_cast<double>(deg - 1));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Communities

struct CommunityPartition {
  std::vector<std::vector<std::string>> clusters;  // full membership, sorted
  std::vector<std::vector<std::string>> reported;  // most frequent members per cluster
  double modularity = 0.0;
};

/// Weighted Newman modularity of a node -> community labelling.
[[nodiscard]] inline double modularity(const HashtagGraph& g, const std::vector<std::size_t>& label) {
  const double m = g.total_weight();
  if (m == 0.0) return 0.0;
  std::map<std::size_t, double> internal, degree;
  for (std::size_t v = 0; v < g.size(); ++v)
    for (const auto& [u, w] : g.adj[v]) {
      degree[label[v]] += w;
      if (label[u] == label[v]) internal[label[v]] += w;  // both directions, halved below
    }
  double q = 0.0;
  for (const auto& [c, d] : degree) q += internal[c] / (2.0 * m) - (d / (2.0 * m)) * (d / (2.0 * m));
  return q;
}

[[nodiscard]] inline double modularity(const HashtagGraph& g, const std::vector<std::vector<std::string>>& clusters) {
  std::vector<std::size_t> label(g.size(), 0);
  for (std::size_t c = 0; c < clusters.size(); ++c)
    for (const auto& t : clusters[c]) label[*g.index_of(t)] = c;
  return modularity(g, label);
}

/// Top-k members by frequency, ties lexicographic.
[[nodiscard]] inline std::vector<std::string> most_frequent(const HashtagGraph& g,
                                                            const std::vector<std::string>& members, std::size_t k) {
  std::vector<std::string> out = members;
  std::sort(out.begin(), out.end(), [&](const std::string& a, const std::string& b) {
    const auto fa = g.frequency[*g.index_of(a)], fb = g.frequency[*g.index_of(b)];
    return fa != fb ? fa > fb : a < b;
  });
  if (out.size() > k) out.resize(k);
  return out;
}

/// Agglomerative greedy modularity: repeatedly merge the connected pair of
/// communities with the largest gain until no merge improves modularity.
[[nodiscard]] inline CommunityPartition detect_communities(const HashtagGraph& g, std::size_t max_nodes_per_cluster = 10) {
  const auto n = g.size();
  const double m = g.total_weight();
  std::vector<std::size_t> label(n);
  for (std::size_t v = 0; v < n; ++v) label[v] = v;

  if (m > 0.0) {
    // e[i][j]: edge-end fraction between communities i != j; a[i]: degree fraction.
    std::vector<std::map<std::size_t, double>> e(n);
    std::vector<double> a(n, 0.0);
    std::vector<bool> alive(n, true);
    for (std::size_t v = 0; v < n; ++v)
      for (const auto& [u, w] : g.adj[v]) {
        e[v][u] += w / (2.0 * m);
        a[v] += w / (2.0 * m);
      }
    constexpr double kMinGain = 1e-12;
    while (true) {
      double best = kMinGain;
      std::size_t bi = n, bj = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (!alive[i]) continue;
        for (const auto& [j, eij] : e[i]) {
          if (j <= i) continue;
          const double gain = 2.0 * (eij - a[i] * a[j]);
          if (gain > best) {
            best = gain;
            bi = i;
            bj = j;
          }
        }
      }
      if (bi == n) break;
      // Fold bj into bi.
      for (const auto& [k, w] : e[bj]) {
        if (k == bi) continue;
        e[bi][k] += w;
        e[k][bi] += w;
        e[k].erase(bj);
      }
      e[bi].erase(bj);
      e[bj].clear();
      a[bi] += a[bj];
      alive[bj] = false;
      for (auto& l : label)
        if (l == bj) l = bi;
    }
  }

  std::map<std::size_t, std::vector<std::string>> groups;
  for (std::size_t v = 0; v < n; ++v) groups[label[v]].push_back(g.nodes[v]);
  CommunityPartition part;
  for (auto& [_, members] : groups) part.clusters.push_back(std::move(members));
  std::sort(part.clusters.begin(), part.clusters.end(), [](const auto& x, const auto& y) {
    return x.size() != y.size() ? x.size() > y.size() : x.front() < y.front();
  });
  for (const auto& c : part.clusters) part.reported.push_back(most_frequent(g, c, max_nodes_per_cluster));
  part.modularity = modularity(g, label);
  return part;
}

[[nodiscard]] inline nlohmann::json partition_to_json(const CommunityPartition& p) {
  nlohmann::json clusters = nlohmann::json::array();
  for (std::size_t c = 0; c < p.clusters.size(); ++c)
    clusters.push_back({{"id", c}, {"size", p.clusters[c].size()}, {"top", p.reported[c]}});
  return {{"modularity", p.modularity}, {"clusters", clusters}};
}

/// Edge list, one "tag<TAB>tag<TAB>weight" line per undirected edge.
inline void write_edge_list(const HashtagGraph& g, std::ostream& out) {
  for (std::size_t v = 0; v < g.size(); ++v)
    for (const auto& [u, w] : g.adj[v])
      if (u > v) out << g.nodes[v] << '\t' << g.nodes[u] << '\t' << w << '\n';
}

// ---------------------------------------------------------------------------
// Sunburst

enum class Grouping { drug_type, geography };

[[nodiscard]] inline Grouping parse_grouping(std::string_view s) {
  if (s == "drug_type") return Grouping::drug_type;
  if (s == "geography") return Grouping::geography;
  throw ConfigError("unknown grouping '" + std::string(s) + "'");
}

/// Two-column lexicon: "hashtag label", '#' starts a comment line.
[[nodiscard]] inline std::map<std::string, std::string> load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open lexicon: " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    std::string tag, label;
    if (!(ss >> tag >> label)) throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected 'tag label'");
    out[normalize_hashtag(tag)] = label;
  }
  return out;
}

/// group -> tag -> count
using GroupedCounts = std::map<std::string, std::map<std::string, double>>;

/// {name, value, children} tree; values are fractions of the parent.
[[nodiscard]] inline nlohmann::json sunburst_document(const GroupedCounts& groups, const std::string& root = "hashtags") {
  double total = 0.0;
  for (const auto& [_, tags] : groups)
    for (const auto& [__, c] : tags) total += c;
  if (total <= 0.0) throw DataError("empty corpus: nothing to plot");
  nlohmann::json children = nlohmann::json::array();
  for (const auto& [group, tags] : groups) {
    double sub = 0.0;
    for (const auto& [_, c] : tags) sub += c;
    if (sub <= 0.0) continue;
    nlohmann::json leaves = nlohmann::json::array();
    for (const auto& [tag, c] : tags)
      if (c > 0.0) leaves.push_back({{"name", tag}, {"value", c / sub}, {"count", c}});
    children.push_back({{"name", group}, {"value", sub / total}, {"count", sub}, {"children", leaves}});
  }
  return {{"name", root}, {"value", 1.0}, {"count", total}, {"children", children}};
}

inline const std::string kUnmappedGroup = "other";

/// Hashtag counts grouped by lexicon label. Drug-type mode files unmapped tags
/// under "other"; geography mode keeps only place tags on posts with seed_tag.
template <typename Posts>
[[nodiscard]] GroupedCounts group_counts(const Posts& posts, Grouping grouping,
                                         const std::map<std::string, std::string>& lexicon,
                                         const std::optional<std::string>& seed_tag = std::nullopt) {
  std::optional<std::string> seed;
  if (grouping == Grouping::geography) {
    if (!seed_tag || normalize_hashtag(*seed_tag).empty()) throw ConfigError("geography grouping requires a seed tag");
    seed = normalize_hashtag(*seed_tag);
  }
  GroupedCounts out;
  for (const auto& tags : posts) {
    std::set<std::string> norm;
    for (const auto& t : tags) norm.insert(normalize_hashtag(t));
    if (seed && !norm.contains(*seed)) continue;
    for (const auto& t : norm) {
      if (seed && t == *seed) continue;
      const auto it = lexicon.find(t);
      if (it != lexicon.end())
        out[it->second][t] += 1.0;
      else if (grouping == Grouping::drug_type)
        out[kUnmappedGroup][t] += 1.0;
    }
  }
  return out;
}

/// Sunburst over detected communities, sized by hashtag frequency.
[[nodiscard]] inline nlohmann::json sunburst_document(const HashtagGraph& g, const CommunityPartition& p) {
  GroupedCounts groups;
  for (std::size_t c = 0; c < p.reported.size(); ++c)
    for (const auto& t : p.reported[c])
      groups["cluster_" + std::to_string(c)][t] = static_cast<double>(g.frequency[*g.index_of(t)]);
  return sunburst_document(groups, "communities");
}

}  // namespace dealerid
