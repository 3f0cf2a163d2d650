#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dualtest/analytics.hpp"
#include "dualtest/error.hpp"
#include "dualtest/judge.hpp"
#include "dualtest/quality.hpp"
#include "dualtest/rng.hpp"
#include "dualtest/transcript.hpp"

namespace dualtest {

struct ScheduleBlock {
  Phase phase;
  int rounds = 0;
  bool calibration = false;
  bool hybrid_eligible = false;

  friend bool operator==(const ScheduleBlock&, const ScheduleBlock&) = default;
};

using PhaseSchedule = std::vector<ScheduleBlock>;

/// N/3 rounds each of Phase I, II, III. Throws Errc::configuration unless
/// N is a positive multiple of three.
PhaseSchedule equal_schedule(int n);

int scheduled_rounds(const PhaseSchedule& schedule);

struct RecalibrationPolicy {
  double threshold = 0.80;
  int extra_rounds = 5;
  /// When set, a block marked hybrid-eligible is run with hybrid prompts
  /// blending its phase with the preceding one.
  bool enable_hybrid = false;
};

/// Picks an index into the prompt's machine pool.
using MachineResponder = std::function<std::size_t(const Prompt&, Rng&)>;

MachineResponder uniform_responder();
MachineResponder fixed_responder(std::size_t index);

class RejectedRoundError : public Error {
 public:
  explicit RejectedRoundError(ConstraintVerdict verdict);
  const ConstraintVerdict& verdict() const noexcept { return verdict_; }

 private:
  ConstraintVerdict verdict_;
};

/// Uniform draw among the pool's prompts tagged exactly `phase`.
/// Throws Errc::exhaustion when there are none.
const Prompt& sample_prompt(const Phase& phase, std::span<const Prompt> pool, Rng& rng);

/// Flips a fair coin for presentation order, strips source and stealth from
/// the presented pair and fills the verdict for automatic judges.
Round run_round(const Prompt& prompt, const Reply& u, const Reply& m, const JudgeStrategy& judge,
                const ConstraintSet& c, const QualityWeights& weights, Rng& rng, int index = 1);

/// Reacts to a completed Phase I or II block: below the threshold, inserts
/// `extra_rounds` calibration rounds of the same phase right after it; at
/// perfect accuracy, marks the following block hybrid-eligible. No-op for
/// other phases.
PhaseSchedule apply_recalibration(const PhaseReport& report, PhaseSchedule schedule, std::size_t completed_block,
                                  const RecalibrationPolicy& policy = {});

/// Pools are the unions of the parents' pools, re-stamped with the hybrid id.
Prompt make_hybrid_prompt(const Prompt& a, const Prompt& b, Rng& rng);

double accuracy(const Transcript& t);

struct ProtocolConfig {
  PhaseSchedule schedule;
  ConstraintSet constraints;
  QualityWeights weights;
  JudgeStrategy judge;
  std::vector<Prompt> pool;
  MachineResponder responder = uniform_responder();
  std::uint64_t seed = 0;
  int retry_bound = 8;
  /// Consecutive skipped attempts tolerated for one round slot.
  int max_skips = 64;
  RecalibrationPolicy recalibration;
  std::string config_digest;
};

/// Step-wise protocol engine shared by batch runs and live sessions.
class ProtocolRunner {
 public:
  explicit ProtocolRunner(ProtocolConfig config);

  bool finished() const noexcept { return !pending_ && block_ >= schedule_.size(); }
  bool has_pending() const noexcept { return pending_.has_value(); }
  const Round& pending() const;

  /// Admits the next round. Automatic judges answer immediately and the
  /// round is committed; for human judges it stays pending until submit().
  const Round& advance();

  void submit(Side verdict);

  const Transcript& transcript() const noexcept { return transcript_; }
  const PhaseSchedule& schedule() const noexcept { return schedule_; }
  const ProtocolConfig& config() const noexcept { return config_; }

 private:
  Prompt next_prompt(const Phase& phase);
  bool phase_has_feasible(const Phase& phase) const;
  void commit(Round round);

  ProtocolConfig config_;
  Rng rng_;
  PhaseSchedule schedule_;
  std::size_t block_ = 0;
  int done_in_block_ = 0;
  std::size_t block_first_round_ = 0;
  Transcript transcript_;
  std::optional<Round> pending_;
};

/// Runs the whole schedule with an automatic judge.
Transcript run_protocol(const ProtocolConfig& config);

}  // namespace dualtest
