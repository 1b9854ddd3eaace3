#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "rafiq/engine.hpp"

namespace rafiq::server {

struct ServerOptions {
  std::string cors_origin = "*";
  std::optional<std::filesystem::path> static_dir;  // served under /docs
};

/// JSON chat API over an Engine:
///   POST /api/sessions                  {"language": "en"|"ar"|null} -> 201
///   POST /api/sessions/{id}/messages    {"text": "..."}              -> 200
///   GET  /api/sessions/{id}                                          -> 200
///   GET  /api/health, POST /api/kb/reindex (202), GET /api/kb/stale
/// Every /api route answers 503 until an engine is attached.
class Server {
 public:
  explicit Server(ServerOptions options = {});
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  void set_engine(std::shared_ptr<engine::Engine> engine);

  // False when the address cannot be bound (for example, the port is in use).
  bool bind(const std::string& host, int port);
  // Binds an ephemeral port and returns it, or -1.
  int bind_any(const std::string& host);
  // Blocks serving requests until stop().
  bool listen();
  /// Stops accepting connections; requests already running complete first.
  void stop();
  bool running() const;
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace rafiq::server
