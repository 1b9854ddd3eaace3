#include "rafiq/server.hpp"

#include <mutex>
#include <sys/socket.h>

#include "httplib.h"
#include "json.hpp"

namespace rafiq::server {

using nlohmann::json;

struct Server::Impl {
  ServerOptions options;
  httplib::Server http;
  mutable std::mutex engine_mutex;
  std::shared_ptr<engine::Engine> engine;

  std::shared_ptr<engine::Engine> current() const {
    std::lock_guard lock(engine_mutex);
    return engine;
  }
};

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json; charset=utf-8");
}

void error(httplib::Response& res, int status, const std::string& message) {
  reply(res, status, json{{"error", message}});
}

json payloads_json(const std::vector<ResponsePayload>& payloads) {
  json list = json::array();
  for (const auto& p : payloads) list.push_back(to_json(p));
  return list;
}

// Parses a request body as a JSON object, answering 400 when it is not one.
std::optional<json> object_body(const httplib::Request& req, httplib::Response& res) {
  json body;
  try {
    body = req.body.empty() ? json::object() : json::parse(req.body);
  } catch (const json::parse_error&) {
    error(res, 400, "request body is not valid JSON");
    return std::nullopt;
  }
  if (!body.is_object()) {
    error(res, 400, "request body must be a JSON object");
    return std::nullopt;
  }
  return body;
}

}  // namespace

Server::Server(ServerOptions options) : impl_(std::make_unique<Impl>()) {
  impl_->options = std::move(options);
  auto& http = impl_->http;
  Impl* self = impl_.get();

  // Plain SO_REUSEADDR only, so a port held by another listener fails to bind.
  http.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof yes);
  });

  http.set_pre_routing_handler([self](const httplib::Request& req, httplib::Response& res) {
    if (req.path.starts_with("/api/") && req.method != "OPTIONS" && !self->current()) {
      error(res, 503, "the engine is still loading");
      return httplib::Server::HandlerResponse::Handled;
    }
    return httplib::Server::HandlerResponse::Unhandled;
  });
  http.set_post_routing_handler([self](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", self->options.cors_origin);
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
  });
  http.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      error(res, 500, e.what());
    } catch (...) {
      error(res, 500, "internal error");
    }
  });

  http.Post("/api/sessions", [self](const httplib::Request& req, httplib::Response& res) {
    const auto body = object_body(req, res);
    if (!body) return;
    std::optional<Lang> lang;
    for (const auto& [key, _] : body->items()) {
      if (key != "language") return error(res, 400, "unknown field '" + key + "'");
    }
    if (auto it = body->find("language"); it != body->end() && !it->is_null()) {
      if (!it->is_string() || !(lang = parse_lang(it->get<std::string>()))) {
        return error(res, 400, "language must be \"en\", \"ar\" or null");
      }
    }
    const auto start = self->current()->start_session(lang);
    reply(res, 201, json{{"session_id", start.session_id}, {"greeting", to_json(start.greeting)}});
  });

  http.Post(R"(/api/sessions/([^/]+)/messages)", [self](const httplib::Request& req, httplib::Response& res) {
    const auto body = object_body(req, res);
    if (!body) return;
    auto it = body->find("text");
    if (it == body->end() || !it->is_string()) return error(res, 400, "body must carry a string 'text'");
    const std::string text = it->get<std::string>();
    if (text.find_first_not_of(" \t\r\n\f\v") == std::string::npos) return error(res, 400, "text is empty");
    try {
      const auto responses = self->current()->handle_message(req.matches[1], text);
      reply(res, 200, json{{"responses", payloads_json(responses)}});
    } catch (const Error& e) {
      if (e.code() == ErrorCode::UnknownSession) return error(res, 404, e.what());
      throw;
    }
  });

  http.Get(R"(/api/sessions/([^/]+))", [self](const httplib::Request& req, httplib::Response& res) {
    const auto state = self->current()->session(req.matches[1]);
    if (!state) return error(res, 404, "no session '" + std::string(req.matches[1]) + "'");
    reply(res, 200, dialog::to_json(*state));
  });

  http.Get("/api/health", [self](const httplib::Request&, httplib::Response& res) {
    const auto snap = self->current()->snapshot();
    reply(res, 200, json{{"status", "ok"}, {"kb_entries", snap->kb.size()}, {"flows", snap->flows.size()}});
  });

  http.Post("/api/kb/reindex", [self](const httplib::Request&, httplib::Response& res) {
    auto engine = self->current();
    try {
      engine->reindex();
    } catch (const Error& e) {
      return error(res, 422, e.what());
    }
    reply(res, 202, json{{"status", "reindexed"}, {"kb_entries", engine->snapshot()->kb.size()}});
  });

  http.Get("/api/kb/stale", [self](const httplib::Request& req, httplib::Response& res) {
    auto engine = self->current();
    long window = engine->snapshot()->config.stale_window_days;
    if (req.has_param("window_days")) {
      try {
        std::size_t used = 0;
        const std::string raw = req.get_param_value("window_days");
        window = std::stol(raw, &used);
        if (used != raw.size() || window < 0) throw std::invalid_argument(raw);
      } catch (const std::exception&) {
        return error(res, 400, "window_days must be a non-negative integer");
      }
    }
    json entries = json::array();
    for (const auto& s : engine->stale(window)) entries.push_back(json{{"id", s.id}, {"age_days", s.age_days}});
    reply(res, 200, json{{"window_days", window}, {"entries", entries}});
  });

  if (impl_->options.static_dir) http.set_mount_point("/docs", impl_->options.static_dir->string());
}

Server::~Server() { stop(); }

void Server::set_engine(std::shared_ptr<engine::Engine> engine) {
  std::lock_guard lock(impl_->engine_mutex);
  impl_->engine = std::move(engine);
}

bool Server::bind(const std::string& host, int port) { return impl_->http.bind_to_port(host, port); }

int Server::bind_any(const std::string& host) { return impl_->http.bind_to_any_port(host); }

bool Server::listen() { return impl_->http.listen_after_bind(); }

void Server::stop() {
  if (impl_) impl_->http.stop();
}

bool Server::running() const { return impl_->http.is_running(); }

void Server::wait_until_ready() const { impl_->http.wait_until_ready(); }

}  // namespace rafiq::server
