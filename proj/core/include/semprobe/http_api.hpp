#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "semprobe/session_store.hpp"

namespace semprobe::service {

struct HttpOptions {
  /// Root for GET /v1/stimuli/{image_ref}. Requests resolving outside it are
  /// rejected.
  std::filesystem::path stimuli_dir;
};

/// JSON-over-HTTP front end of a SessionStore, all routes under /v1:
///
///   POST /v1/sessions                  {"observer_id","manifest_id","rng_seed"}
///   GET  /v1/sessions/{id}/next
///   POST /v1/sessions/{id}/responses   {"trial_index","response","reaction_time_ms",
///                                       "client_presented_at","client_responded_at"}
///   GET  /v1/export?manifest=..[&observer=..][&state=complete]
///   GET  /v1/manifest/{id}
///   GET  /v1/stimuli/{image_ref}
///
/// Errors are {"error": kind, "message": text} with 400/404/409/422 status.
class HttpService {
 public:
  HttpService(SessionStore& store, HttpOptions options);
  ~HttpService();

  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  /// Binds to an ephemeral port and returns it (-1 on failure).
  int bind_any_port(const std::string& host);
  bool bind(const std::string& host, int port);
  /// Blocks until stop().
  bool listen_after_bind();
  void stop();
  bool running() const;
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace semprobe::service
