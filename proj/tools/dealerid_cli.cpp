// dealerid command-line front end.
// Exit codes: 0 ok, 2 config/usage error, 3 data error, 1 anything else.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dealerid/annotation.hpp"
#include "dealerid/annotation_server.hpp"
#include "dealerid/community.hpp"
#include "dealerid/crawl.hpp"
#include "dealerid/experiment.hpp"

#ifndef DEALERID_DATA_DIR
#define DEALERID_DATA_DIR "data"
#endif

namespace fs = std::filesystem;
using namespace dealerid;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* app, Common& c, bool out_required = false) {
  app->add_option("--config", c.config, "INI config file")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "master seed (overrides config)");
  auto* out = app->add_option("--out", c.out, "output path");
  if (out_required) out->required();
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
  if (c.seed) cfg.apply_seed(*c.seed);
  if (!c.out.empty()) cfg.out = c.out;
  cfg.validate();
  return cfg;
}

Dataset data_for(const ExperimentConfig& cfg, const std::string& data_path) {
  return data_path.empty() ? load_data(cfg) : load_dataset(data_path);
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

/// Hashtag sets from either a world file (lines with "kind") or a dataset.
std::vector<std::set<std::string>> hashtag_posts(const fs::path& input) {
  std::ifstream in(input);
  if (!in) throw DataError("cannot open input: " + input.string());
  std::string first;
  while (std::getline(in, first) && first.empty()) {
  }
  in.close();
  std::vector<std::set<std::string>> posts;
  bool is_world = false;
  try {
    is_world = json::parse(first).contains("kind");
  } catch (const json::exception& e) {
    throw DataError("input line 1: " + std::string(e.what()));
  }
  if (is_world) {
    for (const auto& p : load_world(input).posts) posts.push_back(p.hashtags);
  } else {
    for (const auto& r : load_dataset(input).records) posts.push_back(r.hashtags);
  }
  return posts;
}

std::string config_help() {
  std::string s = "Config keys ([section] key = value):\n";
  for (const auto& [k, doc] : config_keys()) s += "  " + k + std::string(k.size() < 22 ? 22 - k.size() : 1, ' ') + doc + "\n";
  return s;
}

annotation::Server* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dealer account identification workbench"};
  app.footer(config_help());
  app.require_subcommand(1);

  // gen-synth
  Common gs_c;
  std::string gs_kind = "dataset";
  std::size_t gs_posts = 0;
  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic dataset, crawl world or annotation corpus");
  add_common(gen, gs_c, true);
  gen->add_option("--kind", gs_kind, "dataset | world | corpus")->check(CLI::IsMember({"dataset", "world", "corpus"}));
  gen->add_option("--posts", gs_posts, "posts for world/corpus kinds");

  // embed
  Common em_c;
  std::string em_data;
  auto* embed = app.add_subcommand("embed", "Write synthetic embeddings of a dataset to a file-backed vector store");
  add_common(embed, em_c, true);
  embed->add_option("--data", em_data, "dataset JSONL (default: config data)");

  // train
  Common tr_c;
  std::string tr_data;
  auto* trn = app.add_subcommand("train", "Train the head for the first configured protocol/strategy");
  add_common(trn, tr_c, true);
  trn->add_option("--data", tr_data, "dataset JSONL (default: config data)");

  // eval
  Common ev_c;
  std::string ev_data, ev_model;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  add_common(ev, ev_c);
  ev->add_option("--model", ev_model, "checkpoint written by train")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", ev_data, "dataset JSONL (default: config data)");

  // experiment
  Common ex_c;
  std::string ex_data;
  auto* exp = app.add_subcommand("experiment", "Run the protocol x strategy grid and decision-level baseline");
  add_common(exp, ex_c);
  exp->add_option("--data", ex_data, "dataset JSONL (default: config data)");

  // ratio-sweep
  Common rs_c;
  std::string rs_data;
  auto* rs = app.add_subcommand("ratio-sweep", "Accuracy vs negative/positive ratio");
  add_common(rs, rs_c);
  rs->add_option("--data", rs_data, "dataset JSONL (default: config data)");

  // crawl-sim
  Common cr_c;
  std::string cr_world, cr_seeds;
  std::size_t cr_target = kDefaultDealerTarget, cr_posts = 500;
  double cr_thr = 0.5;
  auto* crawl = app.add_subcommand("crawl-sim", "Run the hashtag crawl loop on a synthetic world");
  add_common(crawl, cr_c, true);
  crawl->add_option("--world", cr_world, "world JSONL (default: generate one)");
  crawl->add_option("--posts", cr_posts, "posts when generating a world");
  crawl->add_option("--hashtags", cr_seeds, "comma-separated seed hashtags")->required();
  crawl->add_option("--target", cr_target, "dealer accounts to collect before stopping");
  crawl->add_option("--detector-threshold", cr_thr, "image score threshold")->check(CLI::Range(0.0, 1.0));

  // community
  Common cm_c;
  std::string cm_input;
  std::size_t cm_max = 10;
  auto* com = app.add_subcommand("community", "Hashtag graph communities and centralities");
  add_common(com, cm_c, true);
  com->add_option("--input", cm_input, "world or dataset JSONL")->required()->check(CLI::ExistingFile);
  com->add_option("--max-nodes", cm_max, "reported hashtags per cluster");

  // sunburst
  Common sb_c;
  std::string sb_input, sb_grouping = "drug_type", sb_seed_tag, sb_lexicon;
  bool sb_communities = false;
  auto* sun = app.add_subcommand("sunburst", "Sunburst JSON by drug type, geography or community");
  add_common(sun, sb_c, true);
  sun->add_option("--input", sb_input, "world or dataset JSONL")->required()->check(CLI::ExistingFile);
  sun->add_option("--grouping", sb_grouping, "drug_type | geography");
  sun->add_option("--seed-tag", sb_seed_tag, "hashtag filter for geography grouping");
  sun->add_option("--lexicon", sb_lexicon, "tag->group lexicon (default: shipped file for the grouping)");
  sun->add_flag("--communities", sb_communities, "group by detected communities instead of a lexicon");

  // serve-annotation
  Common sv_c;
  std::string sv_corpus, sv_log, sv_tokens, sv_host = "127.0.0.1";
  int sv_port = 8080;
  auto* serve = app.add_subcommand("serve-annotation", "Serve the annotation API under /api/v1");
  add_common(serve, sv_c);
  serve->add_option("--corpus", sv_corpus, "corpus JSONL")->required()->check(CLI::ExistingFile);
  serve->add_option("--log", sv_log, "revision log (appended, replayed at start)")->required();
  serve->add_option("--tokens", sv_tokens, "'token annotator' lines")->required()->check(CLI::ExistingFile);
  serve->add_option("--host", sv_host, "bind address");
  serve->add_option("--port", sv_port, "port");

  // export-dataset
  Common xd_c;
  std::string xd_corpus, xd_log;
  auto* exd = app.add_subcommand("export-dataset", "Replay an annotation log and export labeled quadruples");
  add_common(exd, xd_c, true);
  exd->add_option("--corpus", xd_corpus, "corpus JSONL")->required()->check(CLI::ExistingFile);
  exd->add_option("--log", xd_log, "revision log")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen) {
      const auto cfg = resolve(gs_c);
      const fs::path out = gs_c.out;
      ensure_parent(out);
      if (gs_kind == "dataset") {
        const auto ds = generate_dataset(cfg.synth);
        save_dataset(ds, out);
        std::cout << "wrote " << ds.size() << " records to " << out.string() << "\n";
      } else if (gs_kind == "world") {
        WorldSpec spec;
        spec.seed = cfg.seed;
        if (gs_posts) spec.posts = gs_posts;
        const auto w = generate_world(spec);
        save_world(w, out);
        std::cout << "wrote world with " << w.posts.size() << " posts, " << w.ground_truth_dealers.size()
                  << " dealers to " << out.string() << "\n";
      } else {
        annotation::CorpusSpec spec;
        spec.seed = cfg.seed;
        if (gs_posts) spec.posts = gs_posts;
        const auto c = annotation::generate_corpus(spec);
        annotation::save_corpus(c, out);
        std::cout << "wrote corpus with " << c.posts.size() << " posts, " << c.users.size() << " users to "
                  << out.string() << "\n";
      }
    } else if (*embed) {
      const auto cfg = resolve(em_c);
      if (cfg.embedding.provider != "synthetic") throw ConfigError("embed writes synthetic embeddings only");
      const auto ds = data_for(cfg, em_data);
      const auto p = make_providers(cfg);
      VectorStore text(fs::path(em_c.out) / "text"), image(fs::path(em_c.out) / "image");
      std::size_t nt = 0, ni = 0;
      auto put_text = [&](const std::string& s) {
        const auto key = sha256_hex(s);
        if (!text.contains(key)) {
          text.write(key, p.text.encode(s));
          ++nt;
        }
      };
      auto put_image = [&](const std::string& s) {
        const auto key = sha256_hex(s);
        if (!image.contains(key)) {
          image.write(key, p.image.encode(s));
          ++ni;
        }
      };
      for (const auto& r : ds.records) {
        if (r.pc_text) put_text(*r.pc_text);
        if (r.hb_text) put_text(*r.hb_text);
        if (r.pi_ref) put_image(*r.pi_ref);
        for (const auto& h : r.hi_refs) put_image(h);
      }
      std::cout << "wrote " << nt << " text and " << ni << " image vectors under " << em_c.out << "\n";
    } else if (*trn) {
      auto cfg = resolve(tr_c);
      const auto ds = data_for(cfg, tr_data);
      FusionConfig fc = cfg.fusion;
      fc.protocol = cfg.protocols.empty() ? Protocol::quadruple : cfg.protocols.front();
      fc.strategy = cfg.strategies.front();
      std::size_t excluded = 0;
      Dataset usable;
      for (const auto& r : ds.records)
        if (protocol_accepts(fc.protocol, r.mask()))
          usable.records.push_back(r);
        else
          ++excluded;
      if (excluded) std::cerr << "excluded " << excluded << " records with intolerable missing patterns\n";
      const auto [train_ds, test_ds] = split(usable, cfg.train_frac, cfg.seed);
      const auto providers = make_providers(cfg);
      const auto model = train(train_ds, cfg.train, fc, providers);
      fs::create_directories(cfg.out);
      save_checkpoint(cfg.out / "model.ddck", model.params,
                      CheckpointHeader{static_cast<std::uint32_t>(model.params.dim_in), fc.strategy, fc.protocol,
                                       cfg.seed});
      std::ofstream(cfg.out / "config.resolved.ini") << resolved_config(cfg);
      const auto m = evaluate(model, train_ds, providers, cfg.train.threshold);
      std::cout << "trained " << to_string(fc.protocol) << "/" << to_string(fc.strategy) << " on "
                << train_ds.size() << " records, train accuracy " << m.accuracy << "\n";
    } else if (*ev) {
      auto cfg = resolve(ev_c);
      const auto ds = data_for(cfg, ev_data);
      const auto [params, header] = load_checkpoint(ev_model);
      FusionConfig fc = cfg.fusion;
      fc.protocol = header.protocol;
      fc.strategy = header.strategy;
      const auto providers = make_providers(cfg);
      const Fuser fuser(fc, providers.text.dim(), providers.image.dim());
      if (fuser.dim() != params.dim_in)
        throw ConfigError("checkpoint expects input dim " + std::to_string(params.dim_in) + ", config gives " +
                          std::to_string(fuser.dim()));
      Dataset usable;
      for (const auto& r : ds.records)
        if (protocol_accepts(fc.protocol, r.mask())) usable.records.push_back(r);
      const auto [train_ds, test_ds] = split(usable, cfg.train_frac, cfg.seed);
      const TrainedModel model{params, fc, providers.text.dim(), providers.image.dim()};
      const auto m = evaluate(model, test_ds, providers, cfg.train.threshold);
      std::cout << metrics_table({{std::string(to_string(fc.protocol)) + "/" + to_string(fc.strategy), m}});
      if (!cfg.out.empty()) {
        ensure_parent(cfg.out);
        std::ofstream(cfg.out) << metrics_to_json(m).dump(2) << "\n";
      }
    } else if (*exp) {
      auto cfg = resolve(ex_c);
      if (cfg.out.empty()) cfg.out = "runs/experiment";
      const auto res = run_experiment(cfg, data_for(cfg, ex_data), &std::cerr);
      write_experiment_outputs(cfg, res);
      std::cout << result_table(res);
    } else if (*rs) {
      auto cfg = resolve(rs_c);
      if (cfg.out.empty()) cfg.out = "runs/ratio_sweep";
      const auto pts = ratio_sweep(cfg, data_for(cfg, rs_data), &std::cerr);
      fs::create_directories(cfg.out);
      std::ofstream(cfg.out / "config.resolved.ini") << resolved_config(cfg);
      std::ofstream curve(cfg.out / "curve.tsv");
      write_curve(pts, curve);
      write_curve(pts, std::cout);
    } else if (*crawl) {
      const auto cfg = resolve(cr_c);
      SyntheticWorld w;
      if (!cr_world.empty()) {
        w = load_world(cr_world);
      } else {
        WorldSpec spec;
        spec.seed = cfg.seed;
        spec.posts = cr_posts;
        w = generate_world(spec);
      }
      auto st = seed_hashtags(detail::split_list(cr_seeds), cr_target);
      const auto report = run_crawl(st, w, cr_thr);
      const fs::path out = cr_c.out;
      fs::create_directories(out);
      const auto doc = report_to_json(report);
      std::ofstream(out / "report.json") << doc.dump(2) << "\n";
      std::ofstream traj(out / "trajectory.jsonl");
      for (const auto& step : doc.at("trajectory")) traj << step.dump() << "\n";
      std::cout << "steps " << report.steps << ", accounts " << report.collected_accounts << ", dealer_recall "
                << report.dealer_recall << ", hashtag_coverage " << report.hashtag_coverage << "\n";
    } else if (*com) {
      const auto g = build_graph(hashtag_posts(cm_input));
      const auto part = detect_communities(g, cm_max);
      const fs::path out = cm_c.out;
      fs::create_directories(out);
      std::ofstream(out / "communities.json") << partition_to_json(part).dump(2) << "\n";
      std::ofstream edges(out / "edges.tsv");
      write_edge_list(g, edges);
      const auto bc = betweenness(g);
      const auto cc = clustering_coefficient(g);
      std::ofstream cent(out / "centrality.tsv");
      cent << "hashtag\tfrequency\tbetweenness\tclustering\n";
      for (std::size_t i = 0; i < g.size(); ++i)
        cent << g.nodes[i] << '\t' << g.frequency[i] << '\t' << bc.at(g.nodes[i]) << '\t' << cc.at(g.nodes[i]) << '\n';
      std::cout << g.size() << " hashtags, " << g.edge_count() << " edges, " << part.clusters.size()
                << " communities, modularity " << part.modularity << "\n";
    } else if (*sun) {
      const auto posts = hashtag_posts(sb_input);
      json doc;
      if (sb_communities) {
        const auto g = build_graph(posts);
        doc = sunburst_document(g, detect_communities(g));
      } else {
        const auto grouping = parse_grouping(sb_grouping);
        const fs::path lex = !sb_lexicon.empty() ? fs::path(sb_lexicon)
                             : grouping == Grouping::drug_type
                                 ? fs::path(DEALERID_DATA_DIR) / "drug_taxonomy.txt"
                                 : fs::path(DEALERID_DATA_DIR) / "place_lexicon.txt";
        const auto seed_tag = sb_seed_tag.empty() ? std::nullopt : std::optional(sb_seed_tag);
        doc = sunburst_document(group_counts(posts, grouping, load_lexicon(lex), seed_tag));
      }
      ensure_parent(sb_c.out);
      std::ofstream(sb_c.out) << doc.dump(2) << "\n";
      std::cout << "wrote sunburst with " << doc["children"].size() << " groups to " << sb_c.out << "\n";
    } else if (*serve) {
      annotation::Store store(annotation::load_corpus(sv_corpus), sv_log);
      const fs::path export_dir = sv_c.out.empty() ? fs::path("exports") : fs::path(sv_c.out);
      annotation::Server server(store, annotation::load_tokens(sv_tokens), export_dir);
      g_server = &server;
      std::signal(SIGINT, [](int) { g_server->stop(); });
      std::signal(SIGTERM, [](int) { g_server->stop(); });
      std::cerr << "serving /api/v1 on " << sv_host << ":" << sv_port << "\n";
      if (!server.listen(sv_host, sv_port)) throw ConfigError("cannot bind " + sv_host + ":" + std::to_string(sv_port));
    } else if (*exd) {
      annotation::Store replayed(annotation::load_corpus(xd_corpus), xd_log);
      ensure_parent(xd_c.out);
      const auto r = replayed.export_labeled(xd_c.out);
      std::cout << "wrote " << r.written << " records (" << r.positives << " positive, " << r.negatives
                << " negative, " << r.skipped << " skipped) to " << xd_c.out << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const annotation::ApiError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
