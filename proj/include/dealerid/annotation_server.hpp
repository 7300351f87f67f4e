#pragma once

// JSON-over-HTTP front end for the annotation store, rooted at /api/v1.

#include <filesystem>
#include <map>
#include <string>

#include <httplib.h>
#include <json.hpp>

// <resolv.h>, pulled in by httplib, defines _res; Eigen uses it as a parameter name.
#ifdef _res
#undef _res
#endif

#include "dealerid/annotation.hpp"

namespace dealerid::annotation {

class Server {
 public:
  Server(Store& store, std::map<std::string, std::string> tokens, std::filesystem::path export_dir)
      : store_(store), tokens_(std::move(tokens)), export_dir_(std::move(export_dir)) {
    routes();
  }

  /// Binds and serves until stop(); returns false if the bind failed.
  bool listen(const std::string& host, int port) { return http_.listen(host, port); }

  /// Binds to an ephemeral port; returns it (or -1).
  int bind_any(const std::string& host = "127.0.0.1") { return http_.bind_to_any_port(host); }
  bool listen_after_bind() { return http_.listen_after_bind(); }
  void wait_until_ready() const { http_.wait_until_ready(); }
  void stop() { http_.stop(); }

 private:
  using Handler = std::function<json(const httplib::Request&, const std::string& annotator)>;

  static void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json; charset=utf-8");
  }

  // Wraps a handler with bearer auth and error mapping.
  httplib::Server::Handler guarded(Handler h) {
    return [this, h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
      try {
        const auto auth = req.get_header_value("Authorization");
        constexpr std::string_view prefix = "Bearer ";
        if (auth.rfind(prefix, 0) != 0) throw ApiError(401, "unauthorized", "missing bearer token");
        const auto it = tokens_.find(auth.substr(prefix.size()));
        if (it == tokens_.end()) throw ApiError(401, "unauthorized", "unknown token");
        reply(res, 200, h(req, it->second));
      } catch (const ApiError& e) {
        reply(res, e.status, e.body());
      } catch (const std::exception& e) {
        reply(res, 500, json{{"code", "internal"}, {"message", e.what()}});
      }
    };
  }

  static json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    try {
      return json::parse(req.body);
    } catch (const json::exception& e) {
      throw ApiError(400, "bad_request", std::string("malformed JSON: ") + e.what());
    }
  }

  void routes() {
    http_.Get("/api/v1/tasks/next", guarded([this](const auto&, const std::string& who) {
                auto t = store_.next_task(who);
                if (!t) return json{{"status", "none_remaining"}};
                return json{{"status", "assigned"}, {"task", std::move(*t)}};
              }));
    http_.Post("/api/v1/tasks/:id/submit", guarded([this](const httplib::Request& req, const std::string& who) {
                 const auto& id = req.path_params.at("id");
                 const auto rev = store_.submit(id, who, parse_body(req));
                 return json{{"task_id", id}, {"revision", rev}};
               }));
    http_.Post("/api/v1/tasks/:id/release", guarded([this](const httplib::Request& req, const std::string& who) {
                 store_.release(req.path_params.at("id"), who);
                 return json{{"task_id", req.path_params.at("id")}, {"status", "unlabeled"}};
               }));
    http_.Post("/api/v1/tasks/:id/reopen", guarded([this](const httplib::Request& req, const std::string& who) {
                 store_.reopen(req.path_params.at("id"), who);
                 return json{{"task_id", req.path_params.at("id")}, {"status", "in_progress"}};
               }));
    http_.Get("/api/v1/users/:id/homepage", guarded([this](const httplib::Request& req, const std::string&) {
                const auto v = store_.homepage(req.path_params.at("id"));
                return json{{"user_id", v.user_id},
                            {"bio", v.bio ? json(*v.bio) : json(nullptr)},
                            {"image_refs", v.image_refs}};
              }));
    http_.Post("/api/v1/export", guarded([this](const httplib::Request& req, const std::string&) {
                 const auto body = parse_body(req);
                 const auto name = body.value("name", std::string("labeled.jsonl"));
                 if (name.empty() || name.find('/') != std::string::npos || name.find('\\') != std::string::npos ||
                     name.front() == '.')
                   throw validation_error("name", "export name must be a plain file name");
                 std::filesystem::create_directories(export_dir_);
                 const auto path = export_dir_ / name;
                 const auto r = store_.export_labeled(path);
                 return json{{"path", path.string()},
                             {"written", r.written},
                             {"positives", r.positives},
                             {"negatives", r.negatives},
                             {"skipped", r.skipped}};
               }));
    http_.Get("/api/v1/stats", guarded([this](const auto&, const std::string&) { return store_.stats(); }));
    http_.Get("/api/v1/schema", guarded([](const auto&, const std::string&) { return schema(); }));
  }

  Store& store_;
  std::map<std::string, std::string> tokens_;
  std::filesystem::path export_dir_;
  httplib::Server http_;
};

}  // namespace dealerid::annotation
