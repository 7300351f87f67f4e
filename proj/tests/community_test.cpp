#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "dealerid/community.hpp"
#include "oracles.hpp"

namespace dealerid {
namespace {

using Posts = std::vector<std::set<std::string>>;

std::string v(int i) { return "v" + std::to_string(i); }

// Random graph on n <= 10 nodes as a post list (one post per edge, one per node).
Posts random_graph(int n, double p, std::mt19937_64& rng, oracle::Adjacency* adj = nullptr) {
  std::bernoulli_distribution edge(p);
  Posts posts;
  if (adj) adj->assign(n, {});
  for (int i = 0; i < n; ++i) posts.push_back({v(i)});
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (edge(rng)) {
        posts.push_back({v(i), v(j)});
        if (adj) {
          (*adj)[i].insert(j);
          (*adj)[j].insert(i);
        }
      }
  return posts;
}

TEST(BuildGraph, Triangle) {
  const auto g = build_graph(Posts{{"a", "b", "c"}});
  EXPECT_EQ(g.edge_count(), 3u);
  EXPECT_EQ(g.weight("a", "b"), 1.0);
  EXPECT_EQ(g.weight("b", "c"), 1.0);
  EXPECT_EQ(g.weight("a", "c"), 1.0);
}

TEST(BuildGraph, CountsAndNoSelfLoop) {
  const auto g = build_graph(Posts{{"a", "b"}, {"a", "b"}, {"z"}});
  EXPECT_EQ(g.weight("a", "b"), 2.0);
  EXPECT_EQ(g.weight("b", "a"), 2.0);
  EXPECT_EQ(g.frequency[*g.index_of("a")], 2u);
  EXPECT_TRUE(g.adj[*g.index_of("z")].empty());
  EXPECT_EQ(g.size(), 3u);
}

TEST(BuildGraph, OrderInvariant) {
  std::mt19937_64 rng(4);
  auto posts = random_graph(9, 0.4, rng);
  posts.push_back({"v1", "v2", "v3"});
  const auto g = build_graph(posts);
  for (int t = 0; t < 10; ++t) {
    std::shuffle(posts.begin(), posts.end(), rng);
    const auto h = build_graph(posts);
    EXPECT_EQ(h.nodes, g.nodes);
    EXPECT_EQ(h.adj, g.adj);
    EXPECT_EQ(h.frequency, g.frequency);
  }
}

TEST(Betweenness, PathAndStar) {
  auto bc = betweenness(build_graph(Posts{{"a", "b"}, {"b", "c"}}));
  EXPECT_DOUBLE_EQ(bc["b"], 1.0);
  EXPECT_DOUBLE_EQ(bc["a"], 0.0);
  bc = betweenness(build_graph(Posts{{"s", "l1"}, {"s", "l2"}, {"s", "l3"}, {"s", "l4"}}));
  EXPECT_DOUBLE_EQ(bc["s"], 1.0);
  for (const auto* l : {"l1", "l2", "l3", "l4"}) EXPECT_DOUBLE_EQ(bc[l], 0.0);
}

TEST(Betweenness, MatchesBruteForce) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 3 + trial % 6;
    oracle::Adjacency adj;
    const auto g = build_graph(random_graph(n, 0.45, rng, &adj));
    const auto bc = betweenness(g);
    const auto ref = oracle::brute_force_betweenness(adj);
    for (int i = 0; i < n; ++i) ASSERT_NEAR(bc.at(v(i)), ref[i], 1e-9) << "trial " << trial;
  }
}

TEST(Clustering, TriangleAndStar) {
  auto cc = clustering_coefficient(build_graph(Posts{{"a", "b", "c"}}));
  for (const auto* x : {"a", "b", "c"}) EXPECT_DOUBLE_EQ(cc[x], 1.0);
  cc = clustering_coefficient(build_graph(Posts{{"s", "l1"}, {"s", "l2"}, {"s", "l3"}}));
  EXPECT_DOUBLE_EQ(cc["s"], 0.0);
  EXPECT_DOUBLE_EQ(cc["l1"], 0.0);
}

TEST(Clustering, MatchesBruteForce) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 3 + trial % 6;
    oracle::Adjacency adj;
    const auto g = build_graph(random_graph(n, 0.55, rng, &adj));
    const auto cc = clustering_coefficient(g);
    const auto ref = oracle::brute_force_clustering(adj);
    for (int i = 0; i < n; ++i) ASSERT_NEAR(cc.at(v(i)), ref[i], 1e-9) << "trial " << trial;
  }
}

TEST(Communities, DisjointTriangles) {
  const auto g = build_graph(Posts{{"a", "b", "c"}, {"x", "y", "z"}});
  const auto p = detect_communities(g);
  ASSERT_EQ(p.clusters.size(), 2u);
  EXPECT_EQ(p.clusters[0], (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(p.clusters[1], (std::vector<std::string>{"x", "y", "z"}));
  EXPECT_NEAR(p.modularity, 0.5, 1e-12);
}

TEST(Communities, TruePartitionAndIndependentModularity) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    Posts posts = random_graph(10, 0.3, rng);
    posts.push_back({"v0", "v1"});  // a repeated edge for non-unit weights
    const auto g = build_graph(posts);
    const auto p = detect_communities(g);
    std::set<std::string> seen;
    std::size_t total = 0;
    for (const auto& c : p.clusters) {
      total += c.size();
      seen.insert(c.begin(), c.end());
    }
    ASSERT_EQ(total, g.size());
    ASSERT_EQ(seen.size(), g.size());
    std::vector<int> label(g.size());
    for (std::size_t c = 0; c < p.clusters.size(); ++c)
      for (const auto& t : p.clusters[c]) label[*g.index_of(t)] = static_cast<int>(c);
    std::vector<std::tuple<int, int, double>> edges;
    for (std::size_t a = 0; a < g.size(); ++a)
      for (const auto& [b, w] : g.adj[a])
        if (b > a) edges.emplace_back(static_cast<int>(a), static_cast<int>(b), w);
    EXPECT_NEAR(p.modularity, oracle::modularity(edges, label), 1e-12);
    EXPECT_GE(p.modularity, -0.5);
    EXPECT_LE(p.modularity, 1.0);
  }
}

TEST(Communities, PlantedPartition) {
  for (std::uint64_t seed : {21u, 22u, 23u}) {
    const auto p = detect_communities(build_graph(oracle::planted_partition(12, 0.9, 0.05, seed)));
    EXPECT_GE(oracle::planted_agreement(p.clusters), 0.9) << seed;
  }
}

TEST(Oracle, PlantedAgreementMatching) {
  EXPECT_DOUBLE_EQ(oracle::planted_agreement({{"a1", "a2"}, {"b1", "b2"}}), 1.0);
  EXPECT_DOUBLE_EQ(oracle::planted_agreement({{"a1", "b2"}, {"b1", "a2"}}), 0.5);
  EXPECT_DOUBLE_EQ(oracle::planted_agreement({{"a1", "a2", "b1", "b2"}}), 0.5);
}

TEST(Communities, ReportedCapped) {
  Posts posts;
  for (int i = 0; i < 15; ++i)
    for (int j = i + 1; j < 15; ++j) posts.push_back({"t" + std::to_string(i), "t" + std::to_string(j)});
  posts.push_back({"t3"});
  const auto p = detect_communities(build_graph(posts));
  ASSERT_EQ(p.clusters.size(), 1u);
  EXPECT_EQ(p.clusters[0].size(), 15u);
  ASSERT_EQ(p.reported[0].size(), 10u);
  EXPECT_EQ(p.reported[0][0], "t3");  // highest frequency
  EXPECT_EQ(p.reported[0][1], "t0");  // then lexicographic
  EXPECT_EQ(detect_communities(build_graph(posts), 4).reported[0].size(), 4u);
}

TEST(EdgeList, Format) {
  std::ostringstream ss;
  write_edge_list(build_graph(Posts{{"a", "b"}, {"a", "b"}, {"b", "c"}}), ss);
  EXPECT_EQ(ss.str(), "a\tb\t2\nb\tc\t1\n");
}

void expect_levels_sum_to_one(const nlohmann::json& doc) {
  double top = 0.0;
  for (const auto& g : doc["children"]) {
    top += g["value"].get<double>();
    double sub = 0.0;
    for (const auto& l : g["children"]) sub += l["value"].get<double>();
    EXPECT_NEAR(sub, 1.0, 1e-9);
  }
  EXPECT_NEAR(top, 1.0, 1e-9);
}

TEST(Sunburst, Fractions) {
  const auto doc = sunburst_document(GroupedCounts{{"lsd", {{"lsd", 25}}}, {"other", {{"other", 75}}}});
  ASSERT_EQ(doc["children"].size(), 2u);
  EXPECT_DOUBLE_EQ(doc["children"][0]["value"].get<double>(), 0.25);
  expect_levels_sum_to_one(doc);
  const auto single = sunburst_document(GroupedCounts{{"g", {{"a", 3}, {"b", 1}}}});
  EXPECT_DOUBLE_EQ(single["children"][0]["value"].get<double>(), 1.0);
  expect_levels_sum_to_one(single);
}

TEST(Sunburst, EmptyCorpusFails) {
  EXPECT_THROW((void)sunburst_document(GroupedCounts{}), DataError);
}

TEST(Sunburst, DrugTypeGrouping) {
  const std::map<std::string, std::string> lex{{"xanax", "benzo"}, {"lsd", "psychedelic"}};
  const Posts posts{{"#Xanax", "party"}, {"xanax", "lsd"}};
  const auto g = group_counts(posts, Grouping::drug_type, lex);
  EXPECT_EQ(g.at("benzo").at("xanax"), 2.0);
  EXPECT_EQ(g.at("psychedelic").at("lsd"), 1.0);
  EXPECT_EQ(g.at("other").at("party"), 1.0);
  expect_levels_sum_to_one(sunburst_document(g));
}

TEST(Sunburst, GeographyFiltersBySeed) {
  const std::map<std::string, std::string> places{{"miami", "florida"}, {"tampa", "florida"}, {"nyc", "new_york"}};
  const Posts posts{{"xanax", "miami"}, {"xanax", "nyc", "party"}, {"lean", "tampa"}, {"xanax", "tampa"}};
  EXPECT_THROW((void)group_counts(posts, Grouping::geography, places), ConfigError);
  const auto g = group_counts(posts, Grouping::geography, places, std::string("#Xanax"));
  EXPECT_EQ(g.at("florida").size(), 2u);
  EXPECT_EQ(g.at("florida").at("tampa"), 1.0);
  EXPECT_EQ(g.at("new_york").at("nyc"), 1.0);
  EXPECT_FALSE(g.contains("other"));
  const auto doc = sunburst_document(g);
  EXPECT_NEAR(doc["children"][0]["value"].get<double>(), 2.0 / 3.0, 1e-12);
  expect_levels_sum_to_one(doc);
}

TEST(Lexicon, ShippedFilesLoad) {
  const auto drugs = load_lexicon(std::string(DEALERID_DATA_DIR) + "/drug_taxonomy.txt");
  EXPECT_EQ(drugs.at("xanax"), "benzodiazepine");
  const auto places = load_lexicon(std::string(DEALERID_DATA_DIR) + "/place_lexicon.txt");
  EXPECT_EQ(places.at("miami"), "florida");
}

TEST(Sunburst, FromPartition) {
  const auto g = build_graph(Posts{{"a", "b", "c"}, {"a", "b"}, {"x", "y", "z"}});
  const auto doc = sunburst_document(g, detect_communities(g));
  EXPECT_EQ(doc["children"].size(), 2u);
  expect_levels_sum_to_one(doc);
}

}  // namespace
}  // namespace dealerid
