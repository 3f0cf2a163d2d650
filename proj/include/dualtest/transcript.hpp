#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dualtest/quality.hpp"

namespace dualtest {

enum class BasePhase { general_knowledge = 1, critical_reasoning = 2, creative_introspection = 3 };

/// One of the three graded phases, or a hybrid blending two distinct ones.
class Phase {
 public:
  constexpr Phase(BasePhase base = BasePhase::general_knowledge) : first_(base) {}  // NOLINT

  /// Throws Errc::configuration when `a == b`.
  static Phase hybrid(BasePhase a, BasePhase b);

  bool is_hybrid() const noexcept { return second_.has_value(); }
  BasePhase base() const noexcept { return first_; }
  BasePhase first() const noexcept { return first_; }
  std::optional<BasePhase> second() const noexcept { return second_; }

  /// "I", "II", "III" or "I+III" for hybrids.
  std::string tag() const;
  static Phase parse(const std::string& tag);

  friend bool operator==(const Phase&, const Phase&) = default;

 private:
  BasePhase first_;
  std::optional<BasePhase> second_;
};

struct Prompt {
  std::string id;
  Phase phase;
  std::vector<Reply> human_pool;
  std::vector<Reply> machine_pool;
  std::size_t reference_human = 0;

  const Reply& reference() const { return human_pool.at(reference_human); }
};

/// Throws when a pool is empty, the reference index is out of range, or a
/// pooled reply carries a different prompt id.
void validate_prompt(const Prompt& p);

enum class Side { first = 1, second = 2 };

inline int to_int(Side s) { return static_cast<int>(s); }
Side side_from_int(int v);
inline Side other(Side s) { return s == Side::first ? Side::second : Side::first; }

/// What a judge is allowed to see of one reply.
struct ReplyView {
  std::string id;
  std::vector<double> subscores;
  std::optional<std::string> text;

  friend bool operator==(const ReplyView&, const ReplyView&) = default;
};

struct Round {
  int index = 0;
  std::string prompt_id;
  Phase phase;
  std::pair<ReplyView, ReplyView> presented;
  /// Position of the human reply.
  Side hidden_label = Side::first;
  std::optional<Side> verdict;
  ConstraintVerdict constraint_check;
  double quality_u = 0.0;
  double quality_m = 0.0;

  bool correct() const { return verdict && *verdict == hidden_label; }
};

struct SkippedRound {
  std::string prompt_id;
  Phase phase;
  int attempts = 0;
};

struct Transcript {
  std::vector<Round> rounds;
  std::uint64_t seed = 0;
  std::string config_digest;
  /// First round index of every schedule block.
  std::vector<int> phase_boundaries;
  /// Subset of phase_boundaries opening an inserted calibration block.
  std::vector<int> calibration_boundaries;
  std::vector<SkippedRound> skipped;
};

ReplyView make_view(const Reply& r, std::string view_id);

void to_json(nlohmann::json& j, const Phase& p);
void from_json(const nlohmann::json& j, Phase& p);
void to_json(nlohmann::json& j, const Prompt& p);
void from_json(const nlohmann::json& j, Prompt& p);
void to_json(nlohmann::json& j, const ReplyView& v);
void from_json(const nlohmann::json& j, ReplyView& v);
void to_json(nlohmann::json& j, const Round& r);
void from_json(const nlohmann::json& j, Round& r);
void to_json(nlohmann::json& j, const Transcript& t);
void from_json(const nlohmann::json& j, Transcript& t);

/// Blind presentation payload {round, phase, total, pair}.
nlohmann::json presentation_payload(const Round& r, int scheduled_total);

}  // namespace dualtest
