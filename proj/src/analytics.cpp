#include "dualtest/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dualtest/error.hpp"

namespace dualtest {

namespace {

double log_choose(int n, int k) {
  k = std::min(k, n - k);
  double acc = 0.0;
  for (int i = 1; i <= k; ++i) acc += std::log(static_cast<double>(n - k + i) / static_cast<double>(i));
  return acc;
}

void check_binomial_args(int correct, int n, double p0) {
  if (n < 0 || correct < 0 || correct > n) throw Error(Errc::domain, "binomial_test: need 0 <= correct <= n");
  if (!(p0 > 0.0 && p0 < 1.0)) throw Error(Errc::domain, "binomial_test: p0 must lie in (0,1)");
}

}  // namespace

double binomial_log_pmf(int k, int n, double p0) {
  check_binomial_args(k, n, p0);
  return log_choose(n, k) + k * std::log(p0) + (n - k) * std::log1p(-p0);
}

double binomial_test(int correct, int n, double p0) {
  check_binomial_args(correct, n, p0);
  if (correct == 0) return 1.0;
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(n - correct + 1));
  double peak = -std::numeric_limits<double>::infinity();
  for (int k = correct; k <= n; ++k) {
    terms.push_back(binomial_log_pmf(k, n, p0));
    peak = std::max(peak, terms.back());
  }
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - peak);
  return std::clamp(std::exp(peak) * sum, 0.0, 1.0);
}

PhaseReport summarize_rounds(std::span<const Round> rounds, const Phase& phase, const AnalyticsOptions& opts) {
  PhaseReport r;
  r.phase = phase;
  r.rounds = static_cast<int>(rounds.size());
  for (const auto& round : rounds) {
    if (!round.verdict)
      throw Error(Errc::incomplete_transcript, "round " + std::to_string(round.index) + " has no verdict");
    if (round.correct()) ++r.correct;
  }
  if (r.rounds == 0) throw Error(Errc::missing_phase, "no rounds for phase " + phase.tag());
  r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.rounds);
  r.p_value = binomial_test(r.correct, r.rounds, 0.5);
  r.significant = r.p_value < opts.significance;
  r.recalibration_triggered =
      !phase.is_hybrid() && phase.base() != BasePhase::creative_introspection &&
      r.accuracy < opts.recalibration_threshold;
  return r;
}

PhaseReport phase_report(const Transcript& t, const Phase& phase, const AnalyticsOptions& opts) {
  std::vector<Round> selected;
  for (const auto& r : t.rounds)
    if (r.phase == phase) selected.push_back(r);
  if (selected.empty()) throw Error(Errc::missing_phase, "transcript has no rounds of phase " + phase.tag());
  auto report = summarize_rounds(selected, phase, opts);
  for (int start : t.calibration_boundaries) {
    const auto it = std::find_if(t.rounds.begin(), t.rounds.end(), [&](const Round& r) { return r.index == start; });
    if (it != t.rounds.end() && it->phase == phase) report.calibration_inserted = true;
  }
  return report;
}

std::vector<Phase> phases_in_order(const Transcript& t) {
  std::vector<Phase> out;
  for (const auto& r : t.rounds)
    if (std::find(out.begin(), out.end(), r.phase) == out.end()) out.push_back(r.phase);
  return out;
}

void to_json(nlohmann::json& j, const PhaseReport& r) {
  j = nlohmann::json{{"phase", r.phase},
                     {"rounds", r.rounds},
                     {"correct", r.correct},
                     {"accuracy", r.accuracy},
                     {"p_value", r.p_value},
                     {"significant", r.significant},
                     {"recalibration_triggered", r.recalibration_triggered},
                     {"calibration_inserted", r.calibration_inserted}};
}

}  // namespace dualtest
