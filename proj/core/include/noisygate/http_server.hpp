#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "noisygate/service.hpp"

namespace noisygate::service {

struct HttpOptions {
  std::string host = "127.0.0.1";
  /// 0 binds an ephemeral port.
  int port = 8080;
  /// Served at "/" when set (built tutor client).
  std::optional<std::filesystem::path> static_dir;
};

/// JSON endpoints over a SessionService:
///
///   GET  /models                  model summaries
///   GET  /models/{id}             model document
///   POST /sessions                {"model_id": ...}
///   GET  /sessions/{id}           session state
///   POST /sessions/{id}/answers   {"gate_id": ..., "answer": "yes"|"no"}
///
/// Errors are {"error": {"code", "message"[, "gates"]}} with 400, 404, 409
/// or 422.
class HttpServer {
 public:
  HttpServer(SessionService& service, HttpOptions options);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds the socket and returns the bound port. Throws IoError.
  int bind();
  /// Serves until stop(); call bind() first.
  void listen();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace noisygate::service
