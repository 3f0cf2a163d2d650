#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "client.hpp"
#include "dualtest/config.hpp"
#include "dualtest/error.hpp"
#include "dualtest/report.hpp"
#include "dualtest/server.hpp"
#include "dualtest/session.hpp"

using namespace dualtest;
namespace fs = std::filesystem;

namespace {

const fs::path kToy = fs::path(DUALTEST_DATA_DIR) / "toy";

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Errc::io;
}

ExperimentConfig session_config() { return load_config(kToy / "session.json"); }

// Answers every round correctly; returns the number answered.
int play_correctly(SessionService& svc, const std::string& id, const ExperimentConfig& cfg) {
  int n = 0;
  while (svc.status(id) == SessionStatus::active) {
    const auto p = svc.next_pair(id);
    svc.submit_verdict(id, p["round"].get<int>(), client::human_position(p, cfg.pool));
    ++n;
  }
  return n;
}

}  // namespace

TEST_CASE("sha256") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("config") {
  const auto cfg = load_config(kToy / "config.json");
  CHECK(cfg.seed == 7);
  CHECK(cfg.digest == config_digest(cfg.document));
  CHECK(cfg.digest == sha256_hex(cfg.document.dump()));
  CHECK(scheduled_rounds(cfg.schedule) == 30);
  CHECK(cfg.pool.size() == 30);
  CHECK(cfg.alpha == 0.7);
  CHECK(load_game(cfg).judges.size() >= 1);

  SUBCASE("key order does not change the digest") {
    const auto a = nlohmann::json::parse(R"({"seed": 1, "alpha": 0.7})");
    const auto b = nlohmann::json::parse(R"({"alpha": 0.7, "seed": 1})");
    CHECK(config_digest(a) == config_digest(b));
    CHECK(config_digest(a) != config_digest(nlohmann::json::parse(R"({"seed": 2, "alpha": 0.7})")));
  }
  SUBCASE("errors") {
    auto doc = cfg.document;
    doc["pool"] = "no_such_pool.jsonl";
    CHECK(code_of([&] { parse_config(doc, kToy); }) == Errc::configuration);
    doc = cfg.document;
    doc["constraints"]["tau"] = 1.5;
    CHECK(code_of([&] { parse_config(doc, kToy); }) == Errc::configuration);
    doc = cfg.document;
    doc["judge"] = {{"kind", "psychic"}};
    CHECK(code_of([&] { parse_config(doc, kToy); }) == Errc::configuration);
    CHECK(code_of([&] { load_config(kToy / "missing.json"); }) == Errc::configuration);
  }
  SUBCASE("simulated transcript carries the digest") {
    auto pc = protocol_config(cfg);
    const auto t = run_protocol(pc);
    CHECK(t.config_digest == cfg.digest);
    CHECK(t.seed == 7);
  }
}

TEST_CASE("sessions") {
  TempDir dir("dualtest_sessions_test");
  const auto cfg = session_config();
  SessionService svc(dir.path);

  SUBCASE("ids are distinct and digests match") {
    const auto a = svc.create_session(cfg), b = svc.create_session(cfg);
    CHECK(a != b);
    CHECK(a.size() == 32);
    CHECK(svc.digest(a) == cfg.digest);
    CHECK(svc.size() == 2);
  }
  SUBCASE("automatic judges are refused") {
    auto doc = cfg.document;
    doc["judge"] = {{"kind", "linear"}, {"weights", {1, 0, 0, 0, 0, 0}}};
    const auto auto_cfg = parse_config(doc, kToy);
    CHECK(code_of([&] { svc.create_session(auto_cfg); }) == Errc::configuration);
  }
  SUBCASE("payload is blind") {
    const auto id = svc.create_session(cfg);
    const auto p = svc.next_pair(id);
    std::set<std::string> keys;
    for (auto& [k, v] : p.items()) keys.insert(k);
    CHECK(keys == std::set<std::string>{"round", "phase", "total", "pair"});
    CHECK(p["total"] == 6);
    for (const auto& view : p["pair"])
      for (auto& [k, v] : view.items()) CHECK((k == "id" || k == "subscores" || k == "text"));
    const auto text = p.dump();
    for (const char* leak : {"stealth", "hidden", "human", "machine", "-h\"", "-m"}) CHECK(text.find(leak) == std::string::npos);
  }
  SUBCASE("sequencing") {
    const auto id = svc.create_session(cfg);
    CHECK(code_of([&] { svc.submit_verdict(id, 1, 1); }) == Errc::sequencing);
    const auto p = svc.next_pair(id);
    CHECK(code_of([&] { svc.next_pair(id); }) == Errc::sequencing);
    CHECK(code_of([&] { svc.submit_verdict(id, 2, 1); }) == Errc::sequencing);
    CHECK(code_of([&] { svc.submit_verdict(id, 1, 3); }) == Errc::domain);
    const auto ack = svc.submit_verdict(id, p["round"].get<int>(), 1);
    CHECK_FALSE(ack.duplicate);
    CHECK(ack.answered == 1);
    const auto dup = svc.submit_verdict(id, 1, 1);
    CHECK(dup.duplicate);
    CHECK(dup.answered == 1);
    CHECK(code_of([&] { svc.submit_verdict(id, 1, 2); }) == Errc::sequencing);
    CHECK(code_of([&] { svc.session_report(id); }) == Errc::not_ready);
    CHECK(code_of([&] { svc.next_pair("0123"); }) == Errc::not_found);
  }
  SUBCASE("abandoned sessions stop") {
    const auto id = svc.create_session(cfg);
    svc.next_pair(id);
    svc.abandon(id);
    CHECK(svc.status(id) == SessionStatus::abandoned);
    CHECK(code_of([&] { svc.next_pair(id); }) == Errc::sequencing);
    CHECK(code_of([&] { svc.submit_verdict(id, 1, 1); }) == Errc::sequencing);
  }
  SUBCASE("a correct judge scores 1.0 and the report matches the offline one") {
    const auto id = svc.create_session(cfg);
    CHECK(play_correctly(svc, id, cfg) == 6);
    CHECK(svc.status(id) == SessionStatus::complete);
    const auto report = svc.session_report(id);
    CHECK(report["overall"]["accuracy"] == 1.0);
    CHECK(code_of([&] { svc.next_pair(id); }) == Errc::session_complete);

    const auto saved = read_json(dir.path / (id + ".transcript.json")).get<Transcript>();
    CHECK(saved.config_digest == cfg.digest);
    CHECK(full_report(saved, report_extras(cfg)).dump() == report.dump());
  }
}

TEST_CASE("sessions survive a restart") {
  TempDir dir("dualtest_restart_test");
  const auto cfg = session_config();
  std::string interrupted, straight;
  {
    SessionService svc(dir.path);
    interrupted = svc.create_session(cfg);
    straight = svc.create_session(cfg);
    for (int i = 0; i < 3; ++i) {
      const auto p = svc.next_pair(interrupted);
      svc.submit_verdict(interrupted, p["round"].get<int>(), client::scripted_verdict(p["round"].get<int>()));
    }
    svc.next_pair(interrupted);  // left pending across the restart
  }
  SessionService svc(dir.path);
  CHECK(svc.size() == 2);
  CHECK(svc.status(interrupted) == SessionStatus::active);
  CHECK(svc.digest(interrupted) == cfg.digest);
  CHECK(svc.transcript(interrupted).rounds.size() == 3);
  CHECK(code_of([&] { svc.next_pair(interrupted); }) == Errc::sequencing);
  svc.submit_verdict(interrupted, 4, client::scripted_verdict(4));
  while (svc.status(interrupted) == SessionStatus::active) {
    const int r = svc.next_pair(interrupted)["round"].get<int>();
    svc.submit_verdict(interrupted, r, client::scripted_verdict(r));
  }
  while (svc.status(straight) == SessionStatus::active) {
    const int r = svc.next_pair(straight)["round"].get<int>();
    svc.submit_verdict(straight, r, client::scripted_verdict(r));
  }
  CHECK(nlohmann::json(svc.transcript(interrupted)).dump() == nlohmann::json(svc.transcript(straight)).dump());
  CHECK(svc.session_report(interrupted).dump() == svc.session_report(straight).dump());

  SessionService again(dir.path);
  CHECK(again.status(interrupted) == SessionStatus::complete);
  CHECK(again.session_report(interrupted).dump() == svc.session_report(interrupted).dump());
}

TEST_CASE("http") {
  TempDir dir("dualtest_http_test");
  const auto cfg = session_config();
  SessionService svc(dir.path);
  SessionServer server(svc, cfg);
  const int port = server.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread th([&] { server.listen(); });
  httplib::Client cli("127.0.0.1", port);

  auto post = [&](const std::string& path, const nlohmann::json& body) {
    return cli.Post(path, body.dump(), "application/json");
  };

  auto created = post("/sessions", nlohmann::json::object());
  REQUIRE(created);
  CHECK(created->status == 201);
  const auto c = nlohmann::json::parse(created->body);
  const std::string id = c["id"];
  CHECK(c["config_digest"] == cfg.digest);

  auto seeded = post("/sessions", {{"seed", 99}});
  REQUIRE(seeded);
  CHECK(seeded->status == 201);
  CHECK(nlohmann::json::parse(seeded->body)["config_digest"] != cfg.digest);

  auto early = cli.Get("/sessions/" + id + "/report");
  REQUIRE(early);
  CHECK(early->status == 409);
  CHECK(nlohmann::json::parse(early->body)["code"] == "not_ready");

  auto missing = cli.Get("/sessions/abcdef/next");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  CHECK(nlohmann::json::parse(missing->body)["code"] == "not_found");

  auto garbage = cli.Post("/sessions/" + id + "/verdict", "{not json", "application/json");
  REQUIRE(garbage);
  CHECK(garbage->status == 400);

  auto stale = post("/sessions/" + id + "/verdict", {{"round", 1}, {"verdict", 1}});
  REQUIRE(stale);
  CHECK(stale->status == 409);
  CHECK(nlohmann::json::parse(stale->body)["code"] == "sequencing_error");

  for (;;) {
    auto next = cli.Get("/sessions/" + id + "/next");
    REQUIRE(next);
    if (next->status == 409) {
      CHECK(nlohmann::json::parse(next->body)["code"] == "session_complete");
      break;
    }
    REQUIRE(next->status == 200);
    const auto p = nlohmann::json::parse(next->body);
    auto ack = post("/sessions/" + id + "/verdict", {{"round", p["round"]}, {"verdict", client::human_position(p, cfg.pool)}});
    REQUIRE(ack);
    CHECK(ack->status == 200);
  }
  auto report = cli.Get("/sessions/" + id + "/report");
  REQUIRE(report);
  CHECK(report->status == 200);
  CHECK(nlohmann::json::parse(report->body)["overall"]["accuracy"] == 1.0);
  CHECK(report->body == svc.session_report(id).dump());

  auto abandon = post("/sessions/" + nlohmann::json::parse(seeded->body)["id"].get<std::string>() + "/abandon", {});
  REQUIRE(abandon);
  CHECK(abandon->status == 200);

  server.stop();
  th.join();
}

TEST_CASE("port resolution") {
  CHECK(resolve_port(9001) == 9001);
  CHECK(http_status(Errc::not_found) == 404);
  CHECK(http_status(Errc::sequencing) == 409);
  CHECK(http_status(Errc::parse) == 400);
}
