// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "dealerid/annotation_server.hpp"
#include "dealerid/classify.hpp"
#include "dealerid/community.hpp"
#include "dealerid/core.hpp"
#include "dealerid/crawl.hpp"
#include "dealerid/experiment.hpp"
#include "dealerid/fusion.hpp"
#include "oracles.hpp"

using namespace dealerid;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void check(const std::string& name, double time_limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs > time_limit_s) {
    o.pass = false;
    o.detail += " [over time limit " + std::to_string(time_limit_s) + " s]";
  }
  if (!o.pass) ++failures;
  std::printf("%s  %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<double> gaussian(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g;
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

std::vector<double> unit(std::vector<double> v) {
  double s = 0;
  for (double x : v) s += x * x;
  for (double& x : v) x /= std::sqrt(s);
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// ---------------------------------------------------------------------------

Outcome mask_rule() {
  int valid = 0;
  for (unsigned bits = 0; bits < 16; ++bits) valid += validate_mask(PresenceMask::from_bits(bits)) ? 1 : 0;
  return {valid == 9 && all_masks().size() == 16, fmt("%d of 16 masks valid", valid)};
}

Outcome dimensions() {
  const auto img = FeatureVector::zeros(2048, Source::post_image);
  const auto txt = FeatureVector::zeros(768, Source::post_comment);
  const auto pair = fuse_concat(std::vector<FeatureVector>{img, txt}).dim();
  const auto quad = fuse_concat(std::vector<FeatureVector>{img, txt, txt, img}).dim();
  const auto bil = bilinear_raw(img.values, txt.values).size();
  return {pair == 2816 && quad == 5632 && bil == 1572864,
          fmt("concat pair %zu, quadruple %zu, raw bilinear %zu", pair, quad, bil)};
}

FbcDictionary orthonormal_dictionary(std::mt19937_64& rng, double lambda) {
  const std::vector<std::vector<int>> rows{{0, 1}, {2}, {3}};
  std::normal_distribution<double> g;
  std::vector<Eigen::MatrixXd> us, vs;
  for (const auto& support : rows) {
    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(4, 1), v(4, 1);
    for (int r : support) u(r, 0) = g(rng);
    for (int r = 0; r < 4; ++r) v(r, 0) = g(rng);
    us.push_back(u / u.norm());
    vs.push_back(v / v.norm());
  }
  return FbcDictionary(us, vs, lambda);
}

Outcome fbc_oracles() {
  std::mt19937_64 rng(101);
  double worst_closed = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto dict = orthonormal_dictionary(rng, 0.02 * (t % 25));
    const auto x = as_eigen(gaussian(rng, 4)), y = as_eigen(gaussian(rng, 4));
    const Eigen::MatrixXd z = x * y.transpose();
    const auto c = dict.encode(x, y);
    for (std::size_t l = 0; l < 3; ++l) {
      const double corr = (z.array() * (dict.u(l) * dict.v(l).transpose()).array()).sum();
      worst_closed = std::max(worst_closed,
                              std::abs(c[static_cast<Eigen::Index>(l)] - oracle::soft(corr, dict.lambda() / 2)));
    }
  }
  double worst_ratio = 0.0;
  int within = 0;
  for (int t = 0; t < 100; ++t) {
    const auto dict = FbcDictionary::random(4, 4, 3, 2, 0.1, 5000 + t);
    const auto x = as_eigen(gaussian(rng, 4)), y = as_eigen(gaussian(rng, 4));
    const Eigen::MatrixXd z = x * y.transpose();
    const Eigen::VectorXd zv = Eigen::Map<const Eigen::VectorXd>(z.data(), z.size());
    const double best = dict.objective(x, y, oracle::lasso_cd(oracle::vectorized_atoms(dict), zv, 0.1));
    const double ours = dict.objective(x, y, dict.encode(x, y));
    const double ratio = ours / best;
    worst_ratio = std::max(worst_ratio, ratio);
    within += ratio <= 1.10 ? 1 : 0;
  }
  return {worst_closed <= 1e-8 && within == 100,
          fmt("orthonormal max |diff| %.2e; general within 10%% on %d/100 (worst ratio %.4f)", worst_closed, within,
              worst_ratio)};
}

Outcome tensor_sketch() {
  // Correlated pairs keep the target well away from zero, where relative error is meaningful.
  std::mt19937_64 rng(202);
  const std::size_t d = 64, big_d = 1024;
  auto partner = [&](const std::vector<double>& a) {
    auto n = unit(gaussian(rng, d));
    std::vector<double> out(d);
    for (std::size_t i = 0; i < d; ++i) out[i] = 0.7 * a[i] + 0.5 * n[i];
    return unit(out);
  };
  const auto x = unit(gaussian(rng, d)), y = unit(gaussian(rng, d));
  const auto x2 = partner(x), y2 = partner(y);
  const double truth = dot(x, x2) * dot(y, y2);
  double acc = 0.0;
  const int seeds = 2000;
  for (int s = 0; s < seeds; ++s) {
    const TensorSketch ts(d, big_d, static_cast<std::uint64_t>(s));
    acc += dot(ts.sketch(x, y), ts.sketch(x2, y2));
  }
  const double est = acc / seeds;
  const double rel = std::abs(est - truth) / std::abs(truth);
  return {rel <= 0.05, fmt("estimate %.5f vs truth %.5f, relative error %.3f%%", est, truth, 100 * rel)};
}

Outcome gradient_check() {
  std::mt19937_64 rng(303);
  std::normal_distribution<double> g;
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t dim = 3 + t % 6;
    FeatureMatrix x;
    for (int i = 0; i < 6; ++i) x.push(gaussian(rng, dim), (i + t) % 2);
    auto params = ClassifierParams::zeros(dim);
    for (double& w : params.w) w = 0.5 * g(rng);
    params.b = {0.3 * g(rng), 0.3 * g(rng)};
    std::vector<std::size_t> rows{0, 1, 2, 3, 4, 5};
    const auto kind = t % 5 == 4 ? LossKind::positive_only : LossKind::binary_cross_entropy;
    const auto grad = gradients(params, x, rows, kind);
    const double h = 1e-5;
    double diff = 0.0, na = 0.0, nn = 0.0;
    auto probe = [&](double analytic, auto nudge) {
      auto plus = params, minus = params;
      nudge(plus, h);
      nudge(minus, -h);
      const double numeric = (mean_loss(plus, x, kind) - mean_loss(minus, x, kind)) / (2 * h);
      diff += (analytic - numeric) * (analytic - numeric);
      na += analytic * analytic;
      nn += numeric * numeric;
    };
    for (std::size_t i = 0; i < params.w.size(); ++i)
      probe(grad.w[i], [i](ClassifierParams& p, double d) { p.w[i] += d; });
    for (std::size_t j = 0; j < params.b.size(); ++j)
      probe(grad.b[j], [j](ClassifierParams& p, double d) { p.b[j] += d; });
    worst = std::max(worst, std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-12}));
  }
  return {worst < 1e-4, fmt("worst relative error %.2e over 50 instances", worst)};
}

Outcome adam_first_step() {
  auto p = ClassifierParams::zeros(1);
  adam_step(p, Gradients{{1.0, 0.0}, {0.0, 0.0}}, TrainConfig{});
  // Bias-corrected moments equal g and g^2 after one step.
  const double reference = -0.001 * 1.0 / (std::sqrt(1.0) + 1e-8);
  return {std::abs(p.w[0] - reference) <= 1e-9, fmt("theta %.12f, reference %.12f", p.w[0], reference)};
}

Outcome end_to_end() {
  ExperimentConfig cfg;
  cfg.apply_seed(11);
  cfg.synth.positives = 1000;
  cfg.synth.negatives = 1000;
  const auto ds = load_data(cfg);
  const auto a = run_experiment(cfg, ds);
  const auto b = run_experiment(cfg, ds);
  const double post = a.row("post_level/concat").metrics.accuracy;
  const double home = a.row("homepage_level/concat").metrics.accuracy;
  const double quad = a.row("quadruple/concat").metrics.accuracy;
  const double dec = a.row("decision_level").metrics.accuracy;
  const bool deterministic = result_to_json(a) == result_to_json(b);
  return {quad >= post - 0.02 && quad >= home - 0.02 && quad >= dec - 0.02 && deterministic,
          fmt("quadruple %.4f, post %.4f, homepage %.4f, decision %.4f, deterministic %s (%zu excluded)", quad, post,
              home, dec, deterministic ? "yes" : "no", a.excluded)};
}

Outcome ratio_sweep_check() {
  ExperimentConfig cfg;
  cfg.apply_seed(12);
  cfg.synth.positives = 250;
  cfg.synth.negatives = 2200;
  cfg.protocols = {Protocol::quadruple};
  const auto pts = ratio_sweep(cfg, load_data(cfg));
  bool ok = pts.size() == 4;
  std::string detail;
  for (const auto& p : pts) {
    ok = ok && p.metrics.accuracy >= 0.8;
    detail += fmt("N/P %.0f acc %.4f; ", p.ratio, p.metrics.accuracy);
  }
  return {ok, detail};
}

Outcome crawl_check() {
  int exact = 0, partial_worlds = 0;
  bool revisit = false;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    WorldSpec spec;
    spec.seed = seed;
    spec.posts = 200 + 15 * seed;
    spec.bridge_prob = seed % 3 == 0 ? 0.0 : 0.1;
    const auto w = generate_world(spec);
    const std::vector<std::string> seeds{"#drug0_0", "#drug0_1"};
    auto st = seed_hashtags(seeds, w.ground_truth_dealers.size());
    const auto r = run_crawl(st, w, 0.5);
    std::set<std::string> seen;
    for (const auto& s : r.trajectory) revisit = revisit || !seen.insert(s.hashtag).second;
    const double ref = oracle::bfs_reachable_recall(w, seeds, 0.5);
    exact += r.dealer_recall == ref ? 1 : 0;
    partial_worlds += ref < 1.0 ? 1 : 0;
  }
  return {exact == 20 && !revisit, fmt("recall equals BFS oracle on %d/20 worlds (%d not fully reachable), revisits: %s",
                                       exact, partial_worlds, revisit ? "yes" : "none")};
}

Outcome graph_check() {
  std::mt19937_64 rng(404);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int n = 2 + t % 7;
    std::bernoulli_distribution edge(0.2 + 0.06 * (t % 10));
    oracle::Adjacency adj(n);
    std::vector<std::set<std::string>> posts;
    for (int i = 0; i < n; ++i) posts.push_back({"v" + std::to_string(i)});
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (edge(rng)) {
          posts.push_back({"v" + std::to_string(i), "v" + std::to_string(j)});
          adj[i].insert(j);
          adj[j].insert(i);
        }
    const auto g = build_graph(posts);
    const auto bc = betweenness(g);
    const auto cc = clustering_coefficient(g);
    const auto rbc = oracle::brute_force_betweenness(adj);
    const auto rcc = oracle::brute_force_clustering(adj);
    for (int i = 0; i < n; ++i) {
      const auto key = "v" + std::to_string(i);
      worst = std::max({worst, std::abs(bc.at(key) - rbc[i]), std::abs(cc.at(key) - rcc[i])});
    }
  }
  double min_agree = 1.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto p = detect_communities(build_graph(oracle::planted_partition(12, 0.9, 0.05, seed)));
    min_agree = std::min(min_agree, oracle::planted_agreement(p.clusters));
  }
  return {worst <= 1e-9 && min_agree >= 0.9,
          fmt("max centrality diff %.2e over 100 graphs; planted agreement min %.3f over 5 seeds", worst, min_agree)};
}

Outcome annotation_check() {
  using namespace annotation;
  const auto dir = fs::temp_directory_path() / "dealerid_acceptance_anno";
  fs::remove_all(dir);
  fs::create_directories(dir);
  Corpus corpus;
  corpus.posts.push_back(Post{"p1", {"p1/0.jpg"}, "restocked", {"xanax"},
                              {{"c1", "dealer_a", "snap me"}, {"c2", "dealer_b", "wickr"}, {"c3", "buyer", "how much"}}});
  corpus.posts.push_back(Post{"p2", {"p2/0.jpg"}, "sunset", {"beach"}, {{"c4", "buyer", "nice"}}});
  for (const auto* u : {"dealer_a", "dealer_b", "buyer"})
    corpus.users[u] = User{u, std::string("bio ") + u, {{std::string("home/") + u + ".jpg", 1}}};

  json live;
  std::size_t positives = 0;
  {
    Store store(corpus, dir / "log.jsonl");
    Server server(store, {{"t1", "ann1"}, {"t2", "ann2"}}, dir / "exports");
    const int port = server.bind_any();
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    httplib::Client c("127.0.0.1", port);
    const httplib::Headers h1{{"Authorization", "Bearer t1"}}, h2{{"Authorization", "Bearer t2"}};
    (void)c.Get("/api/v1/tasks/next", h1);
    (void)c.Get("/api/v1/tasks/next", h2);
    const json dealer_sub{{"images", {{{"image_ref", "p1/0.jpg"}, {"drug_form", "pills"}, {"contact_app", "wickr"}}}},
                          {"comments", {{{"comment_id", "c3"}, {"role", "consumer"}, {"has_contact_info", false}}}},
                          {"verdict", {{"contains_dealer", true}, {"dealer_user_ids", {"dealer_a", "dealer_b"}}}}};
    (void)c.Post("/api/v1/tasks/p1/submit", h1, dealer_sub.dump(), "application/json");
    (void)c.Post("/api/v1/tasks/p2/submit", h2,
                 json{{"verdict", {{"contains_dealer", false}, {"dealer_user_ids", json::array()}}}}.dump(),
                 "application/json");
    (void)c.Post("/api/v1/tasks/p1/reopen", h1, "", "application/json");
    (void)c.Post("/api/v1/tasks/p1/submit", h1, dealer_sub.dump(), "application/json");
    const auto res = c.Post("/api/v1/export", h1, json{{"name", "out.jsonl"}}.dump(), "application/json");
    if (res && res->status == 200) {
      const auto ds = load_dataset(json::parse(res->body)["path"].get<std::string>());
      for (const auto& r : ds.records) positives += (r.post_id == "p1" && r.label == 1) ? 1 : 0;
    }
    live = store.state();
    server.stop();
    th.join();
  }
  Store replayed(corpus, dir / "log.jsonl");
  const bool replay_ok = replayed.state() == live;
  fs::remove_all(dir);
  return {replay_ok && positives == 2,
          fmt("replayed state %s live state; 2 dealer commenters gave %zu positive records",
              replay_ok ? "equals" : "DIFFERS from", positives)};
}

}  // namespace

int main() {
  check("Mask rule", 1.0, mask_rule);
  check("Dimensions", 60.0, dimensions);
  check("FBC oracles", 30.0, fbc_oracles);
  check("Tensor-sketch unbiasedness", 60.0, tensor_sketch);
  check("Gradient check", 60.0, gradient_check);
  check("Adam first step", 1.0, adam_first_step);
  check("End-to-end ordering", 300.0, end_to_end);
  check("Ratio sweep", 600.0, ratio_sweep_check);
  check("Crawl simulator", 30.0, crawl_check);
  check("Graph oracles", 60.0, graph_check);
  check("Annotation service", 60.0, annotation_check);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
