#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "dualtest/config.hpp"
#include "dualtest/protocol.hpp"
#include "dualtest/report.hpp"

namespace dualtest {

enum class SessionStatus { active, complete, abandoned };

std::string to_string(SessionStatus s);

struct VerdictAck {
  int round = 0;
  bool duplicate = false;
  int answered = 0;
  SessionStatus status = SessionStatus::active;
};

void to_json(nlohmann::json& j, const VerdictAck& a);

/// Report options shared by sessions and the offline report subcommand.
ReportExtras report_extras(const ExperimentConfig& cfg);

/// Live human-judge sessions. Each session is an append-only event log
/// (<id>.events.jsonl) in the state directory; on construction every log is
/// replayed through a fresh protocol runner, which restores the exact state
/// since the runner is deterministic in its seed. Completed sessions also
/// leave <id>.transcript.json behind.
class SessionService {
 public:
  explicit SessionService(std::filesystem::path state_dir);

  /// The config's judge must be human. Throws Errc::configuration otherwise.
  std::string create_session(const ExperimentConfig& cfg);

  /// Whitelisted payload {round, phase, total, pair}.
  nlohmann::json next_pair(const std::string& id);

  /// Only the pending round accepts a verdict. Re-sending the verdict already
  /// recorded for the last answered round is acknowledged without effect.
  VerdictAck submit_verdict(const std::string& id, int round, int verdict);

  void abandon(const std::string& id);

  /// Throws Errc::not_ready unless the session is complete.
  nlohmann::json session_report(const std::string& id);

  SessionStatus status(const std::string& id);
  std::string digest(const std::string& id);
  Transcript transcript(const std::string& id);
  std::size_t size() const;

 private:
  struct Session;

  std::shared_ptr<Session> find(const std::string& id) const;
  std::shared_ptr<Session> restore(const std::filesystem::path& log);
  void finish(Session& s);

  std::filesystem::path dir_;
  mutable std::shared_mutex map_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

}  // namespace dualtest
