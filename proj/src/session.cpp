#include "dualtest/session.hpp"

#include <fstream>
#include <random>

#include "dualtest/error.hpp"

namespace dualtest {

std::string to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::active: return "active";
    case SessionStatus::complete: return "complete";
    case SessionStatus::abandoned: return "abandoned";
  }
  return "active";
}

void to_json(nlohmann::json& j, const VerdictAck& a) {
  j = nlohmann::json{{"round", a.round}, {"duplicate", a.duplicate}, {"answered", a.answered}, {"status", to_string(a.status)}};
}

ReportExtras report_extras(const ExperimentConfig& cfg) {
  ReportExtras x;
  x.alpha = cfg.alpha;
  x.analytics = cfg.analytics;
  return x;
}

struct SessionService::Session {
  std::mutex mutex;
  std::string id;
  ExperimentConfig config;
  std::unique_ptr<ProtocolRunner> runner;
  SessionStatus status = SessionStatus::active;
  std::filesystem::path log;
  std::optional<nlohmann::json> report;

  void append(const nlohmann::json& event) const {
    std::ofstream out(log, std::ios::app | std::ios::binary);
    if (!out) throw Error(Errc::io, "cannot append to " + log.string());
    out << event.dump() << '\n';
    out.flush();
    if (!out) throw Error(Errc::io, "write failed on " + log.string());
  }
};

namespace {

std::string fresh_id() {
  std::random_device rd;
  static constexpr char hex[] = "0123456789abcdef";
  std::string id;
  for (int i = 0; i < 4; ++i) {
    auto word = rd();
    for (int k = 0; k < 8; ++k, word >>= 4) id += hex[word & 0xf];
  }
  return id;
}

constexpr const char* kLogSuffix = ".events.jsonl";

}  // namespace

SessionService::SessionService(std::filesystem::path state_dir) : dir_(std::move(state_dir)) {
  std::filesystem::create_directories(dir_);
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    const auto name = entry.path().filename().string();
    if (name.size() <= std::string_view(kLogSuffix).size() || !name.ends_with(kLogSuffix)) continue;
    auto s = restore(entry.path());
    sessions_.emplace(s->id, std::move(s));
  }
}

std::shared_ptr<SessionService::Session> SessionService::restore(const std::filesystem::path& log) {
  std::ifstream in(log);
  std::string line;
  std::shared_ptr<Session> s;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto ev = nlohmann::json::parse(line);
    const auto kind = ev.at("event").get<std::string>();
    if (lineno == 1) {
      if (kind != "create") throw Error(Errc::parse, log.string() + ": log must start with a create event");
      s = std::make_shared<Session>();
      s->id = ev.at("id").get<std::string>();
      s->log = log;
      s->config = parse_config(ev.at("config"), ev.at("base_dir").get<std::string>());
      s->runner = std::make_unique<ProtocolRunner>(protocol_config(s->config));
      continue;
    }
    if (kind == "next") {
      try {
        s->runner->advance();
      } catch (const Error&) {
        if (!ev.value("failed", false)) throw;
      }
    } else if (kind == "verdict") {
      s->runner->submit(side_from_int(ev.at("verdict").get<int>()));
      if (s->runner->finished()) finish(*s);
    } else if (kind == "abandon") {
      s->status = SessionStatus::abandoned;
    } else {
      throw Error(Errc::parse, log.string() + ": unknown event '" + kind + "'");
    }
  }
  if (!s) throw Error(Errc::parse, log.string() + ": empty session log");
  return s;
}

void SessionService::finish(Session& s) {
  s.status = SessionStatus::complete;
  s.report = full_report(s.runner->transcript(), report_extras(s.config));
  write_file(dir_ / (s.id + ".transcript.json"), nlohmann::json(s.runner->transcript()).dump(2) + "\n");
}

std::string SessionService::create_session(const ExperimentConfig& cfg) {
  if (cfg.judge_spec.value("kind", std::string{}) != "human")
    throw Error(Errc::configuration, "sessions need a config whose judge kind is human");
  auto s = std::make_shared<Session>();
  s->config = cfg;
  s->runner = std::make_unique<ProtocolRunner>(protocol_config(cfg));

  std::unique_lock lock(map_mutex_);
  do s->id = fresh_id();
  while (sessions_.contains(s->id));
  s->log = dir_ / (s->id + kLogSuffix);
  s->append({{"event", "create"},
             {"id", s->id},
             {"config", cfg.document},
             {"base_dir", std::filesystem::absolute(cfg.base_dir).string()}});
  sessions_.emplace(s->id, s);
  return s->id;
}

std::shared_ptr<SessionService::Session> SessionService::find(const std::string& id) const {
  std::shared_lock lock(map_mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(Errc::not_found, "no session '" + id + "'");
  return it->second;
}

nlohmann::json SessionService::next_pair(const std::string& id) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  if (s->status == SessionStatus::complete) throw Error(Errc::session_complete, "session is complete; fetch the report");
  if (s->status == SessionStatus::abandoned) throw Error(Errc::sequencing, "session was abandoned");
  if (s->runner->has_pending())
    throw Error(Errc::sequencing, "round " + std::to_string(s->runner->pending().index) + " is awaiting a verdict");
  try {
    s->runner->advance();
  } catch (const Error&) {
    // the failed attempt consumed randomness, so replay has to repeat it
    s->append({{"event", "next"}, {"failed", true}});
    throw;
  }
  s->append({{"event", "next"}});
  return presentation_payload(s->runner->pending(), scheduled_rounds(s->runner->schedule()));
}

VerdictAck SessionService::submit_verdict(const std::string& id, int round, int verdict) {
  if (verdict != 1 && verdict != 2) throw Error(Errc::domain, "verdict must be 1 or 2");
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  const auto& rounds = s->runner->transcript().rounds;
  VerdictAck ack{round, false, static_cast<int>(rounds.size()), s->status};

  if (!rounds.empty() && rounds.back().index == round && !s->runner->has_pending()) {
    if (rounds.back().verdict && to_int(*rounds.back().verdict) == verdict) {
      ack.duplicate = true;
      return ack;
    }
    throw Error(Errc::sequencing, "round " + std::to_string(round) + " already has a different verdict");
  }
  if (s->status != SessionStatus::active) throw Error(Errc::sequencing, "session is " + to_string(s->status));
  if (!s->runner->has_pending()) throw Error(Errc::sequencing, "no round is awaiting a verdict");
  if (s->runner->pending().index != round)
    throw Error(Errc::sequencing, "verdict for round " + std::to_string(round) + " but round " +
                                      std::to_string(s->runner->pending().index) + " is pending");

  s->append({{"event", "verdict"}, {"round", round}, {"verdict", verdict}});
  s->runner->submit(side_from_int(verdict));
  if (s->runner->finished()) finish(*s);
  ack.answered = static_cast<int>(s->runner->transcript().rounds.size());
  ack.status = s->status;
  return ack;
}

void SessionService::abandon(const std::string& id) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  if (s->status == SessionStatus::complete) throw Error(Errc::session_complete, "session is already complete");
  if (s->status == SessionStatus::abandoned) return;
  s->append({{"event", "abandon"}});
  s->status = SessionStatus::abandoned;
}

nlohmann::json SessionService::session_report(const std::string& id) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  if (s->status != SessionStatus::complete) throw Error(Errc::not_ready, "session is " + to_string(s->status));
  return *s->report;
}

SessionStatus SessionService::status(const std::string& id) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  return s->status;
}

std::string SessionService::digest(const std::string& id) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  return s->runner->transcript().config_digest;
}

Transcript SessionService::transcript(const std::string& id) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  return s->runner->transcript();
}

std::size_t SessionService::size() const {
  std::shared_lock lock(map_mutex_);
  return sessions_.size();
}

}  // namespace dualtest
