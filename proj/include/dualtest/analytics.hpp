#pragma once

#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "dualtest/transcript.hpp"

namespace dualtest {

struct AnalyticsOptions {
  double significance = 0.05;
  double recalibration_threshold = 0.80;
};

struct PhaseReport {
  Phase phase;
  int rounds = 0;
  int correct = 0;
  double accuracy = 0.0;
  double p_value = 1.0;
  bool significant = false;
  bool recalibration_triggered = false;
  /// Set when calibration rounds were inserted for this phase; those rounds
  /// are included in the counts above.
  bool calibration_inserted = false;
};

/// One-sided exact tail P(X >= correct) for X ~ Binomial(n, p0), summed in
/// log space. Throws Errc::domain for invalid counts or p0 outside (0, 1).
double binomial_test(int correct, int n, double p0);

/// log P(X = k) for X ~ Binomial(n, p0).
double binomial_log_pmf(int k, int n, double p0);

/// Aggregates `rounds` (all assumed to belong to `phase`). Throws
/// Errc::incomplete_transcript when a verdict is missing.
PhaseReport summarize_rounds(std::span<const Round> rounds, const Phase& phase, const AnalyticsOptions& opts = {});

/// Throws Errc::missing_phase when the transcript has no round of `phase`.
PhaseReport phase_report(const Transcript& t, const Phase& phase, const AnalyticsOptions& opts = {});

/// Distinct phases in order of first appearance.
std::vector<Phase> phases_in_order(const Transcript& t);

void to_json(nlohmann::json& j, const PhaseReport& r);

}  // namespace dualtest
