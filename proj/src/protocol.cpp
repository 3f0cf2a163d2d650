#include "dualtest/protocol.hpp"

#include <algorithm>

namespace dualtest {

PhaseSchedule equal_schedule(int n) {
  if (n <= 0 || n % 3 != 0)
    throw Error(Errc::configuration, "equal phase schedule needs N divisible by 3, got " + std::to_string(n));
  return {{Phase(BasePhase::general_knowledge), n / 3},
          {Phase(BasePhase::critical_reasoning), n / 3},
          {Phase(BasePhase::creative_introspection), n / 3}};
}

int scheduled_rounds(const PhaseSchedule& schedule) {
  int total = 0;
  for (const auto& b : schedule) total += b.rounds;
  return total;
}

MachineResponder uniform_responder() {
  return [](const Prompt& p, Rng& rng) { return rng.index(p.machine_pool.size()); };
}

MachineResponder fixed_responder(std::size_t index) {
  return [index](const Prompt& p, Rng&) { return std::min(index, p.machine_pool.size() - 1); };
}

RejectedRoundError::RejectedRoundError(ConstraintVerdict verdict)
    : Error(Errc::rejected_round,
            "round rejected: " + (verdict.violation ? to_string(*verdict.violation) : std::string("unknown"))),
      verdict_(verdict) {}

const Prompt& sample_prompt(const Phase& phase, std::span<const Prompt> pool, Rng& rng) {
  std::vector<std::size_t> matching;
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (pool[i].phase == phase) matching.push_back(i);
  if (matching.empty()) throw Error(Errc::exhaustion, "no prompt available for phase " + phase.tag());
  return pool[matching[rng.index(matching.size())]];
}

Round run_round(const Prompt& prompt, const Reply& u, const Reply& m, const JudgeStrategy& judge,
                const ConstraintSet& c, const QualityWeights& weights, Rng& rng, int index) {
  const auto check = check_constraints(u, m, c, weights);
  if (!check.ok) throw RejectedRoundError(check);

  Round r;
  r.index = index;
  r.prompt_id = prompt.id;
  r.phase = prompt.phase;
  r.constraint_check = check;
  r.quality_u = quality(u, weights);
  r.quality_m = quality(m, weights);
  const bool human_first = rng.coin();
  r.hidden_label = human_first ? Side::first : Side::second;
  const Reply& first = human_first ? u : m;
  const Reply& second = human_first ? m : u;
  const std::string stem = std::to_string(index);
  r.presented = {make_view(first, stem + "-1"), make_view(second, stem + "-2")};
  if (!judge.is_human()) r.verdict = judge_verdict(judge, first, second);
  return r;
}

PhaseSchedule apply_recalibration(const PhaseReport& report, PhaseSchedule schedule, std::size_t completed_block,
                                  const RecalibrationPolicy& policy) {
  if (report.phase.is_hybrid() || report.phase.base() == BasePhase::creative_introspection) return schedule;
  if (completed_block >= schedule.size()) return schedule;
  if (report.accuracy < policy.threshold && policy.extra_rounds > 0) {
    ScheduleBlock extra{report.phase, policy.extra_rounds, true, false};
    schedule.insert(schedule.begin() + static_cast<std::ptrdiff_t>(completed_block) + 1, extra);
  } else if (report.accuracy >= 1.0 && completed_block + 1 < schedule.size()) {
    auto& next = schedule[completed_block + 1];
    next.hybrid_eligible = true;
    if (policy.enable_hybrid && !next.phase.is_hybrid() && next.phase.base() != report.phase.base())
      next.phase = Phase::hybrid(report.phase.base(), next.phase.base());
  }
  return schedule;
}

Prompt make_hybrid_prompt(const Prompt& a, const Prompt& b, Rng& rng) {
  if (a.phase.is_hybrid() || b.phase.is_hybrid())
    throw Error(Errc::configuration, "hybrid prompts need non-hybrid parents");
  if (a.phase == b.phase) throw Error(Errc::configuration, "hybrid prompts need parents from distinct phases");
  Prompt h;
  h.id = a.id + "+" + b.id;
  h.phase = Phase::hybrid(a.phase.base(), b.phase.base());
  auto restamp = [&](const std::vector<Reply>& src, std::vector<Reply>& dst) {
    for (Reply r : src) {
      r.prompt_id = h.id;
      dst.push_back(std::move(r));
    }
  };
  restamp(a.human_pool, h.human_pool);
  restamp(b.human_pool, h.human_pool);
  restamp(a.machine_pool, h.machine_pool);
  restamp(b.machine_pool, h.machine_pool);
  h.reference_human = rng.coin() ? a.reference_human : a.human_pool.size() + b.reference_human;
  return h;
}

double accuracy(const Transcript& t) {
  if (t.rounds.empty()) throw Error(Errc::incomplete_transcript, "accuracy of an empty transcript");
  std::size_t correct = 0;
  for (const auto& r : t.rounds) {
    if (!r.verdict) throw Error(Errc::incomplete_transcript, "round " + std::to_string(r.index) + " has no verdict");
    if (*r.verdict == r.hidden_label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(t.rounds.size());
}

ProtocolRunner::ProtocolRunner(ProtocolConfig config)
    : config_(std::move(config)), rng_(config_.seed), schedule_(config_.schedule) {
  validate_constraints(config_.constraints);
  validate_judge(config_.judge, config_.weights.facet_count());
  if (config_.retry_bound < 1) throw Error(Errc::configuration, "retry bound must be positive");
  if (!config_.responder) throw Error(Errc::configuration, "no machine responder configured");
  for (const auto& b : schedule_)
    if (b.rounds < 0) throw Error(Errc::configuration, "schedule block with negative round count");
  for (const auto& p : config_.pool) validate_prompt(p);
  transcript_.seed = config_.seed;
  transcript_.config_digest = config_.config_digest;
  while (block_ < schedule_.size() && schedule_[block_].rounds == 0) ++block_;
}

const Round& ProtocolRunner::pending() const {
  if (!pending_) throw Error(Errc::sequencing, "no pending round");
  return *pending_;
}

Prompt ProtocolRunner::next_prompt(const Phase& phase) {
  if (!phase.is_hybrid()) return sample_prompt(phase, config_.pool, rng_);
  const Prompt& a = sample_prompt(Phase(phase.first()), config_.pool, rng_);
  const Prompt& b = sample_prompt(Phase(*phase.second()), config_.pool, rng_);
  return make_hybrid_prompt(a, b, rng_);
}

bool ProtocolRunner::phase_has_feasible(const Phase& phase) const {
  if (phase.is_hybrid()) return true;
  for (const auto& p : config_.pool) {
    if (!(p.phase == phase)) continue;
    for (const auto& m : p.machine_pool)
      if (check_constraints(p.reference(), m, config_.constraints, config_.weights).ok) return true;
  }
  return false;
}

const Round& ProtocolRunner::advance() {
  if (pending_) throw Error(Errc::sequencing, "round " + std::to_string(pending_->index) + " is awaiting a verdict");
  if (finished()) throw Error(Errc::session_complete, "protocol schedule is complete");

  const ScheduleBlock& block = schedule_[block_];
  const int index = static_cast<int>(transcript_.rounds.size()) + 1;
  for (int skips = 0;; ++skips) {
    if (skips >= config_.max_skips)
      throw Error(Errc::infeasible_round, "round " + std::to_string(index) + ": skip bound exhausted");
    Prompt prompt = next_prompt(block.phase);
    const Reply& u = prompt.reference();
    for (int attempt = 0; attempt < config_.retry_bound; ++attempt) {
      const std::size_t pick = config_.responder(prompt, rng_);
      if (pick >= prompt.machine_pool.size())
        throw Error(Errc::configuration, "machine responder returned an index outside the pool");
      const Reply& m = prompt.machine_pool[pick];
      if (!check_constraints(u, m, config_.constraints, config_.weights).ok) continue;
      Round round = run_round(prompt, u, m, config_.judge, config_.constraints, config_.weights, rng_, index);
      if (done_in_block_ == 0) {
        transcript_.phase_boundaries.push_back(index);
        if (block.calibration) transcript_.calibration_boundaries.push_back(index);
        block_first_round_ = transcript_.rounds.size();
      }
      if (round.verdict) {
        commit(std::move(round));
        return transcript_.rounds.back();
      }
      pending_ = std::move(round);
      return *pending_;
    }
    transcript_.skipped.push_back({prompt.id, prompt.phase, config_.retry_bound});
    if (!phase_has_feasible(block.phase))
      throw Error(Errc::infeasible_round, "no feasible machine reply for any prompt of phase " + block.phase.tag());
  }
}

void ProtocolRunner::submit(Side verdict) {
  if (!pending_) throw Error(Errc::sequencing, "no pending round to answer");
  Round round = std::move(*pending_);
  pending_.reset();
  round.verdict = verdict;
  commit(std::move(round));
}

void ProtocolRunner::commit(Round round) {
  transcript_.rounds.push_back(std::move(round));
  if (++done_in_block_ < schedule_[block_].rounds) return;

  const ScheduleBlock block = schedule_[block_];
  if (!block.calibration) {
    std::span<const Round> rounds(transcript_.rounds.begin() + static_cast<std::ptrdiff_t>(block_first_round_),
                                  transcript_.rounds.end());
    AnalyticsOptions opts;
    opts.recalibration_threshold = config_.recalibration.threshold;
    const auto report = summarize_rounds(rounds, block.phase, opts);
    schedule_ = apply_recalibration(report, std::move(schedule_), block_, config_.recalibration);
  }
  done_in_block_ = 0;
  ++block_;
  while (block_ < schedule_.size() && schedule_[block_].rounds == 0) ++block_;
}

Transcript run_protocol(const ProtocolConfig& config) {
  if (config.judge.is_human())
    throw Error(Errc::configuration, "run_protocol needs an automatic judge; use a session for human judges");
  ProtocolRunner runner(config);
  while (!runner.finished()) runner.advance();
  return runner.transcript();
}

}  // namespace dualtest
