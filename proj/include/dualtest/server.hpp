#pragma once

#include <memory>
#include <optional>
#include <string>

#include "dualtest/config.hpp"
#include "dualtest/error.hpp"
#include "dualtest/session.hpp"

namespace httplib {
class Server;
}

namespace dualtest {

/// --port wins, then DUALTEST_PORT, then 8080.
int resolve_port(std::optional<int> flag);

int http_status(Errc code);

/// HTTP front for SessionService:
///   POST /sessions               body {} | {"seed": n} | {"config": {...}}
///   GET  /sessions/{id}/next
///   POST /sessions/{id}/verdict  body {"round": i, "verdict": 1|2}
///   POST /sessions/{id}/abandon
///   GET  /sessions/{id}/report
/// Errors are answered as {code, message}.
class SessionServer {
 public:
  SessionServer(SessionService& service, ExperimentConfig defaults);
  ~SessionServer();

  SessionServer(const SessionServer&) = delete;
  SessionServer& operator=(const SessionServer&) = delete;

  /// Binds; port 0 picks a free one. Returns the bound port or -1.
  int bind(const std::string& host, int port);
  /// Blocks serving requests until stop().
  bool listen();
  void stop();

 private:
  ExperimentConfig config_for(const std::string& body) const;

  SessionService& service_;
  ExperimentConfig defaults_;
  std::unique_ptr<httplib::Server> http_;
};

}  // namespace dualtest
