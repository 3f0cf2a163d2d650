#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dualtest/judge.hpp"
#include "dualtest/quality.hpp"
#include "dualtest/transcript.hpp"

namespace dualtest {

enum class PresentationRule {
  both_orders,  ///< payoff averages the (u, m) and (m, u) presentations
  fixed_order,  ///< human reply always shown first
};

/// One round per prompt; the human reply of round i is prompt i's reference.
struct GameInstance {
  std::vector<Prompt> rounds;
  ConstraintSet constraints;
  QualityWeights weights;
  PresentationRule presentation = PresentationRule::both_orders;
};

/// Throws Errc::configuration when a human reference falls below tau.
void validate_instance(const GameInstance& g);

/// Product set of feasible machine replies, stored per round.
struct StrategySet {
  std::vector<std::vector<std::size_t>> per_round;

  /// Product of the per-round list sizes, saturating at UINT64_MAX.
  std::uint64_t count() const;
};

StrategySet build_strategy_set(const GameInstance& g);

/// Judge correctness on one round in half-points: 0, 1 or 2. Keeping the
/// count integral makes per-round and brute-force sums bit-identical.
int correct_halves(const JudgeStrategy& judge, const Reply& u, const Reply& m, PresentationRule rule);

/// Accuracy of `judge` when the adversary plays `choices` (indices into each
/// round's machine pool).
double replay_value(const JudgeStrategy& judge, const GameInstance& g, std::span<const std::size_t> choices);

struct AdversaryResponse {
  std::vector<std::size_t> choices;  ///< machine-pool index per round
  double value = 0.0;
};

/// Exact best response of the adversary. The objective and the constraints
/// separate across rounds, so per-round minimisation is exact.
AdversaryResponse inner_min(const JudgeStrategy& judge, const GameInstance& g, const StrategySet& s);

enum class SolveMode { pure, mixed };

struct MinimaxResult {
  double value = 0.0;
  SolveMode mode = SolveMode::pure;

  // Pure mode.
  std::size_t best_judge_index = 0;
  std::optional<JudgeStrategy> best_judge;
  std::vector<std::size_t> worst_adversary;

  // Mixed mode: distributions over matrix rows (judges) and columns.
  std::vector<double> judge_mix;
  std::vector<double> adversary_mix;

  std::int64_t iterations = 0;
  double exploitability_gap = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool converged = true;
};

/// Judge maximising its worst case, ties broken by lowest index.
MinimaxResult outer_max(std::span<const JudgeStrategy> judges, const GameInstance& g, const StrategySet& s);

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  ///< row-major

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}
  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  double& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
};

struct PayoffMatrix {
  Matrix payoff;  ///< rows: judges, columns: adversary tuples
  std::vector<std::vector<std::size_t>> tuples;
};

/// Enumerates the product strategy set, first round varying slowest.
std::vector<std::vector<std::size_t>> enumerate_strategies(const StrategySet& s, std::uint64_t cap);

/// Throws Errc::size when the strategy count exceeds `cap`.
PayoffMatrix build_payoff_matrix(std::span<const JudgeStrategy> judges, const GameInstance& g, const StrategySet& s,
                                 std::uint64_t cap = 4096);

struct MixedOptions {
  double tolerance = 1e-4;
  std::int64_t max_iterations = 2'000'000;
};

/// Alternating fictitious play for the row-maximising zero-sum game. Stops
/// once the certified bounds are closer than the tolerance; otherwise
/// reports the best bounds found with converged = false.
MinimaxResult solve_mixed(const Matrix& payoff, const MixedOptions& opts = {});

bool certify_guarantee(const MinimaxResult& result, double alpha);

/// Instance, judge family and alpha as read from a game file.
struct GameFile {
  GameInstance instance;
  std::vector<JudgeStrategy> judges;
  double alpha = 0.70;
};

GameFile parse_game_file(const nlohmann::json& j);
std::vector<JudgeStrategy> parse_judge_family(const nlohmann::json& j, std::size_t facet_count);

void to_json(nlohmann::json& j, const MinimaxResult& r);
void to_json(nlohmann::json& j, const GameInstance& g);

}  // namespace dualtest
