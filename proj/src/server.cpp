#include "dualtest/server.hpp"

#include <cstdlib>

#include <httplib.h>

namespace dualtest {

int resolve_port(std::optional<int> flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("DUALTEST_PORT"); env && *env) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 0 || v > 65535) throw Error(Errc::configuration, "DUALTEST_PORT is not a port number");
    return static_cast<int>(v);
  }
  return 8080;
}

int http_status(Errc code) {
  switch (code) {
    case Errc::not_found: return 404;
    case Errc::sequencing:
    case Errc::not_ready:
    case Errc::session_complete: return 409;
    case Errc::configuration:
    case Errc::parse:
    case Errc::domain:
    case Errc::dimension: return 400;
    default: return 500;
  }
}

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, Errc code, const std::string& message) {
  send_json(res, http_status(code), {{"code", errc_name(code)}, {"message", message}});
}

template <class F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_error(res, e.code(), e.what());
    } catch (const nlohmann::json::exception& e) {
      send_error(res, Errc::parse, e.what());
    } catch (const std::exception& e) {
      send_json(res, 500, {{"code", "internal_error"}, {"message", e.what()}});
    }
  };
}

nlohmann::json parse_body(const std::string& body) {
  if (body.empty()) return nlohmann::json::object();
  auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(Errc::parse, "request body must be a JSON object");
  return j;
}

}  // namespace

SessionServer::SessionServer(SessionService& service, ExperimentConfig defaults)
    : service_(service), defaults_(std::move(defaults)), http_(std::make_unique<httplib::Server>()) {
  auto& http = *http_;
  http.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto cfg = config_for(req.body);
    const auto id = service_.create_session(cfg);
    send_json(res, 201, {{"id", id}, {"config_digest", cfg.digest}});
  }));
  http.Get(R"(/sessions/([0-9a-f]+)/next)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, service_.next_pair(req.matches[1]));
  }));
  http.Post(R"(/sessions/([0-9a-f]+)/verdict)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req.body);
    if (!body.contains("round") || !body["round"].is_number_integer() || !body.contains("verdict") ||
        !body["verdict"].is_number_integer())
      throw Error(Errc::parse, "verdict body needs integer fields round and verdict");
    send_json(res, 200, service_.submit_verdict(req.matches[1], body["round"].get<int>(), body["verdict"].get<int>()));
  }));
  http.Post(R"(/sessions/([0-9a-f]+)/abandon)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    service_.abandon(req.matches[1]);
    send_json(res, 200, {{"status", "abandoned"}});
  }));
  http.Get(R"(/sessions/([0-9a-f]+)/report)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, service_.session_report(req.matches[1]));
  }));
  http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) send_json(res, res.status, {{"code", "not_found"}, {"message", "no such endpoint"}});
  });
}

SessionServer::~SessionServer() { stop(); }

ExperimentConfig SessionServer::config_for(const std::string& body) const {
  const auto j = parse_body(body);
  if (j.contains("config")) return parse_config(j["config"], defaults_.base_dir);
  if (j.contains("seed")) {
    auto doc = defaults_.document;
    doc["seed"] = j["seed"].get<std::uint64_t>();
    return parse_config(doc, defaults_.base_dir);
  }
  return defaults_;
}

int SessionServer::bind(const std::string& host, int port) {
  if (port == 0) return http_->bind_to_any_port(host);
  return http_->bind_to_port(host, port) ? port : -1;
}

bool SessionServer::listen() { return http_->listen_after_bind(); }

void SessionServer::stop() {
  if (http_ && http_->is_running()) http_->stop();
}

}  // namespace dualtest
