#include "dualtest/game.hpp"

#include <algorithm>
#include <limits>

#include "dualtest/error.hpp"

namespace dualtest {

void validate_instance(const GameInstance& g) {
  validate_constraints(g.constraints);
  for (const auto& p : g.rounds) {
    validate_prompt(p);
    if (quality(p.reference(), g.weights) < g.constraints.tau)
      throw Error(Errc::configuration, "game round " + p.id + ": human reply falls below tau");
  }
}

std::uint64_t StrategySet::count() const {
  if (per_round.empty()) return 0;
  std::uint64_t n = 1;
  for (const auto& r : per_round) {
    if (r.empty()) return 0;
    if (n > std::numeric_limits<std::uint64_t>::max() / r.size()) return std::numeric_limits<std::uint64_t>::max();
    n *= r.size();
  }
  return n;
}

StrategySet build_strategy_set(const GameInstance& g) {
  validate_instance(g);
  StrategySet s;
  s.per_round.reserve(g.rounds.size());
  for (std::size_t i = 0; i < g.rounds.size(); ++i) {
    const auto& p = g.rounds[i];
    std::vector<std::size_t> feasible;
    for (std::size_t k = 0; k < p.machine_pool.size(); ++k)
      if (check_constraints(p.reference(), p.machine_pool[k], g.constraints, g.weights).ok) feasible.push_back(k);
    if (feasible.empty())
      throw Error(Errc::infeasible_instance,
                  "round " + std::to_string(i + 1) + " (" + p.id + ") has no feasible machine reply");
    s.per_round.push_back(std::move(feasible));
  }
  return s;
}

int correct_halves(const JudgeStrategy& judge, const Reply& u, const Reply& m, PresentationRule rule) {
  const bool human_first_ok = judge_verdict(judge, u, m) == Side::first;
  if (rule == PresentationRule::fixed_order) return human_first_ok ? 2 : 0;
  const bool human_second_ok = judge_verdict(judge, m, u) == Side::second;
  return int{human_first_ok} + int{human_second_ok};
}

namespace {

double halves_to_value(std::int64_t halves, std::size_t rounds) {
  return static_cast<double>(halves) / static_cast<double>(2 * rounds);
}

void require_automatic(const JudgeStrategy& judge) {
  if (judge.is_human()) throw Error(Errc::unsupported_judge, "game solving needs a deterministic judge");
}

}  // namespace

double replay_value(const JudgeStrategy& judge, const GameInstance& g, std::span<const std::size_t> choices) {
  require_automatic(judge);
  if (choices.size() != g.rounds.size()) throw Error(Errc::dimension, "replay: one choice per round expected");
  std::int64_t halves = 0;
  for (std::size_t i = 0; i < choices.size(); ++i) {
    const auto& p = g.rounds[i];
    halves += correct_halves(judge, p.reference(), p.machine_pool.at(choices[i]), g.presentation);
  }
  return halves_to_value(halves, g.rounds.size());
}

AdversaryResponse inner_min(const JudgeStrategy& judge, const GameInstance& g, const StrategySet& s) {
  require_automatic(judge);
  if (s.per_round.size() != g.rounds.size() || g.rounds.empty())
    throw Error(Errc::dimension, "inner_min: strategy set does not match the instance");
  AdversaryResponse out;
  std::int64_t halves = 0;
  for (std::size_t i = 0; i < g.rounds.size(); ++i) {
    const auto& p = g.rounds[i];
    int best = std::numeric_limits<int>::max();
    std::size_t pick = s.per_round[i].front();
    for (std::size_t k : s.per_round[i]) {
      const int h = correct_halves(judge, p.reference(), p.machine_pool[k], g.presentation);
      if (h < best) {
        best = h;
        pick = k;
      }
    }
    halves += best;
    out.choices.push_back(pick);
  }
  out.value = halves_to_value(halves, g.rounds.size());
  return out;
}

MinimaxResult outer_max(std::span<const JudgeStrategy> judges, const GameInstance& g, const StrategySet& s) {
  if (judges.empty()) throw Error(Errc::configuration, "outer_max: empty judge family");
  MinimaxResult best;
  best.mode = SolveMode::pure;
  bool have = false;
  for (std::size_t j = 0; j < judges.size(); ++j) {
    auto response = inner_min(judges[j], g, s);
    if (!have || response.value > best.value) {
      have = true;
      best.value = response.value;
      best.best_judge_index = j;
      best.best_judge = judges[j];
      best.worst_adversary = std::move(response.choices);
    }
  }
  best.lower = best.upper = best.value;
  return best;
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols) throw Error(Errc::dimension, "matrix rows differ in length");
    for (std::size_t j = 0; j < m.cols; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

std::vector<std::vector<std::size_t>> enumerate_strategies(const StrategySet& s, std::uint64_t cap) {
  const std::uint64_t n = s.count();
  if (n > cap)
    throw Error(Errc::size, "strategy set has " + std::to_string(n) + " tuples, above the cap of " +
                                std::to_string(cap) + "; solve per round instead");
  std::vector<std::vector<std::size_t>> out;
  if (n == 0) return out;
  out.reserve(static_cast<std::size_t>(n));
  std::vector<std::size_t> digit(s.per_round.size(), 0);
  for (;;) {
    std::vector<std::size_t> tuple(digit.size());
    for (std::size_t i = 0; i < digit.size(); ++i) tuple[i] = s.per_round[i][digit[i]];
    out.push_back(std::move(tuple));
    std::size_t pos = digit.size();
    for (;;) {
      if (pos == 0) return out;
      --pos;
      if (++digit[pos] < s.per_round[pos].size()) break;
      digit[pos] = 0;
    }
  }
}

PayoffMatrix build_payoff_matrix(std::span<const JudgeStrategy> judges, const GameInstance& g, const StrategySet& s,
                                 std::uint64_t cap) {
  if (judges.empty()) throw Error(Errc::configuration, "payoff matrix: empty judge family");
  PayoffMatrix pm;
  pm.tuples = enumerate_strategies(s, cap);
  pm.payoff = Matrix(judges.size(), pm.tuples.size());
  for (std::size_t j = 0; j < judges.size(); ++j) {
    require_automatic(judges[j]);
    // Per-round cells are reused across every tuple containing them.
    std::vector<std::vector<int>> cell(g.rounds.size());
    for (std::size_t i = 0; i < g.rounds.size(); ++i) {
      const auto& p = g.rounds[i];
      cell[i].assign(p.machine_pool.size(), 0);
      for (std::size_t k : s.per_round[i])
        cell[i][k] = correct_halves(judges[j], p.reference(), p.machine_pool[k], g.presentation);
    }
    for (std::size_t a = 0; a < pm.tuples.size(); ++a) {
      std::int64_t halves = 0;
      for (std::size_t i = 0; i < g.rounds.size(); ++i) halves += cell[i][pm.tuples[a][i]];
      pm.payoff(j, a) = halves_to_value(halves, g.rounds.size());
    }
  }
  return pm;
}

MinimaxResult solve_mixed(const Matrix& a, const MixedOptions& opts) {
  if (a.rows == 0 || a.cols == 0) throw Error(Errc::dimension, "solve_mixed: empty payoff matrix");
  const std::size_t m = a.rows;
  const std::size_t n = a.cols;
  std::vector<double> row_counts(m, 0.0), col_counts(n, 0.0);
  std::vector<double> row_gain(m, 0.0);  // A * col_counts
  std::vector<double> col_loss(n, 0.0);  // row_counts^T * A

  auto play_row = [&](std::size_t i) {
    row_counts[i] += 1.0;
    for (std::size_t j = 0; j < n; ++j) col_loss[j] += a(i, j);
  };
  auto play_col = [&](std::size_t j) {
    col_counts[j] += 1.0;
    for (std::size_t i = 0; i < m; ++i) row_gain[i] += a(i, j);
  };

  MinimaxResult best;
  best.mode = SolveMode::mixed;
  double best_lower = -std::numeric_limits<double>::infinity();
  double best_upper = std::numeric_limits<double>::infinity();

  std::size_t next_row = 0;
  std::int64_t t = 0;
  while (t < opts.max_iterations) {
    ++t;
    play_row(next_row);
    const auto jmin = static_cast<std::size_t>(std::min_element(col_loss.begin(), col_loss.end()) - col_loss.begin());
    const double lower = col_loss[jmin] / static_cast<double>(t);
    if (lower > best_lower) {
      best_lower = lower;
      best.judge_mix = row_counts;
      for (double& x : best.judge_mix) x /= static_cast<double>(t);
    }
    play_col(jmin);
    next_row = static_cast<std::size_t>(std::max_element(row_gain.begin(), row_gain.end()) - row_gain.begin());
    const double upper = row_gain[next_row] / static_cast<double>(t);
    if (upper < best_upper) {
      best_upper = upper;
      best.adversary_mix = col_counts;
      for (double& y : best.adversary_mix) y /= static_cast<double>(t);
    }
    if (best_upper - best_lower < opts.tolerance) break;
  }

  best.iterations = t;
  best.lower = best_lower;
  best.upper = best_upper;
  best.exploitability_gap = std::max(0.0, best_upper - best_lower);
  best.converged = best.exploitability_gap < opts.tolerance;
  best.value = best.exploitability_gap == 0.0 ? best_lower : 0.5 * (best_lower + best_upper);
  return best;
}

bool certify_guarantee(const MinimaxResult& result, double alpha) { return result.value >= alpha - 1e-12; }

std::vector<JudgeStrategy> parse_judge_family(const nlohmann::json& j, std::size_t facet_count) {
  std::vector<JudgeStrategy> family;
  if (j.contains("judges")) family = j["judges"].get<std::vector<JudgeStrategy>>();
  if (j.contains("judge_grid")) {
    const auto& grid = j["judge_grid"];
    const auto values = grid.at("values").get<std::vector<double>>();
    const auto picks = side_from_int(grid.value("positive_picks", 1));
    auto extra = linear_grid(facet_count, values, grid.value("bias", 0.0), picks);
    family.insert(family.end(), extra.begin(), extra.end());
  }
  for (const auto& judge : family) validate_judge(judge, facet_count);
  return family;
}

GameFile parse_game_file(const nlohmann::json& j) {
  GameFile f;
  if (j.contains("quality")) f.instance.weights = j["quality"].get<QualityWeights>();
  f.instance.constraints = j.at("constraints").get<ConstraintSet>();
  const auto rule = j.value("presentation_rule", std::string{"both_orders"});
  if (rule == "both_orders") f.instance.presentation = PresentationRule::both_orders;
  else if (rule == "fixed_order") f.instance.presentation = PresentationRule::fixed_order;
  else throw Error(Errc::parse, "unknown presentation_rule '" + rule + "'");
  f.instance.rounds = j.at("rounds").get<std::vector<Prompt>>();
  f.judges = parse_judge_family(j, f.instance.weights.facet_count());
  f.alpha = j.value("alpha", 0.70);
  validate_instance(f.instance);
  return f;
}

void to_json(nlohmann::json& j, const GameInstance& g) {
  j = nlohmann::json{{"quality", g.weights},
                     {"constraints", g.constraints},
                     {"presentation_rule", g.presentation == PresentationRule::both_orders ? "both_orders" : "fixed_order"},
                     {"rounds", g.rounds}};
}

void to_json(nlohmann::json& j, const MinimaxResult& r) {
  j = nlohmann::json{{"value", r.value},
                     {"mode", r.mode == SolveMode::pure ? "pure" : "mixed"},
                     {"iterations", r.iterations},
                     {"exploitability_gap", r.exploitability_gap}};
  if (r.mode == SolveMode::pure) {
    j["best_judge"] = r.best_judge ? nlohmann::json(*r.best_judge) : nlohmann::json(nullptr);
    j["best_judge_index"] = r.best_judge_index;
    j["worst_adversary"] = r.worst_adversary;
  } else {
    j["best_judge"] = r.judge_mix;
    j["worst_adversary"] = r.adversary_mix;
    j["lower"] = r.lower;
    j["upper"] = r.upper;
    j["converged"] = r.converged;
  }
}

}  // namespace dualtest
