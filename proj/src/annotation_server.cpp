#include "normalign/annotation_server.hpp"

#include "normalign/errors.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace normalign {

namespace {

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(dump_line(body), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& kind,
                const std::string& message) {
  send_json(res, status, Json{{"error", kind}, {"message", message}});
}

}  // namespace

struct AnnotationServer::Impl {
  std::shared_ptr<AnnotationStore> store;
  httplib::Server server;
};

AnnotationServer::AnnotationServer(std::shared_ptr<AnnotationStore> store,
                                   std::optional<std::filesystem::path> static_dir)
    : impl_(std::make_unique<Impl>()) {
  if (!store) throw std::invalid_argument("AnnotationServer needs a store");
  impl_->store = std::move(store);
  auto& server = impl_->server;
  auto* st = impl_->store.get();

  server.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, Json{{"status", "ok"}});
  });

  server.Get("/api/tasks/next", [st](const httplib::Request& req, httplib::Response& res) {
    const auto annotator = req.get_param_value("annotator");
    if (annotator.empty()) return send_error(res, 400, "SchemaViolation", "annotator is required");
    std::optional<TargetKind> kind;
    if (req.has_param("kind")) {
      try {
        kind = target_kind_from_string(req.get_param_value("kind"));
      } catch (const std::exception& e) {
        return send_error(res, 400, "SchemaViolation", e.what());
      }
    }
    const auto task = st->next_task(annotator, kind);
    if (!task) {
      res.status = 204;
      return;
    }
    send_json(res, 200, encode(*task));
  });

  server.Post("/api/labels", [st](const httplib::Request& req, httplib::Response& res) {
    Json body;
    try {
      body = Json::parse(req.body);
    } catch (const nlohmann::json::parse_error& e) {
      return send_error(res, 400, "SchemaViolation", std::string("body is not JSON: ") + e.what());
    }
    std::string task_id, annotator, label;
    std::vector<std::string> issues;
    try {
      task_id = body.at("task_id").get<std::string>();
      annotator = body.at("annotator_id").get<std::string>();
      label = body.at("label").get<std::string>();
      issues = body.value("issues", std::vector<std::string>{});
    } catch (const nlohmann::json::exception& e) {
      return send_error(res, 400, "SchemaViolation", e.what());
    }
    try {
      send_json(res, 201, encode(st->record_label(task_id, annotator, label, issues)));
    } catch (const UnknownTask& e) {
      send_error(res, 404, "UnknownTask", e.what());
    } catch (const SchemaViolation& e) {
      send_error(res, 400, "SchemaViolation", e.what());
    }
  });

  server.Get("/api/stats", [st](const httplib::Request& req, httplib::Response& res) {
    try {
      const auto kind = target_kind_from_string(
          req.has_param("kind") ? req.get_param_value("kind") : std::string("MatchPair"));
      send_json(res, 200, st->stats(kind));
    } catch (const std::exception& e) {
      send_error(res, 400, "SchemaViolation", e.what());
    }
  });

  server.Get("/api/progress", [st](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, st->progress());
  });

  server.set_exception_handler(
      [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
          std::rethrow_exception(ep);
        } catch (const std::exception& e) {
          spdlog::error("annotation server: {}", e.what());
          send_error(res, 500, "InternalError", e.what());
        }
      });

  if (static_dir) {
    if (!server.set_mount_point("/", static_dir->string())) {
      spdlog::warn("static directory {} not found; serving the API only", static_dir->string());
    }
  }
}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw IoError("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw IoError("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void AnnotationServer::run() { impl_->server.listen_after_bind(); }

void AnnotationServer::stop() {
  if (impl_) impl_->server.stop();
}

bool AnnotationServer::running() const { return impl_->server.is_running(); }

}  // namespace normalign
