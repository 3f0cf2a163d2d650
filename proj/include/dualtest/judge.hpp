#pragma once

#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "dualtest/transcript.hpp"

namespace dualtest {

/// Scores s = bias + w . (first - second) over sub-scores and names
/// `positive_picks` as the human side when s >= 0, the other side otherwise.
struct LinearJudge {
  std::vector<double> weights;
  double bias = 0.0;
  Side positive_picks = Side::first;
};

/// Fixed verdicts keyed by the presented reply ids "first|second".
struct OracleJudge {
  std::map<std::string, Side> verdicts;
  Side fallback = Side::first;
};

/// Verdicts arrive later through the session API.
struct HumanJudge {};

struct JudgeStrategy {
  std::string id;
  std::variant<LinearJudge, OracleJudge, HumanJudge> kind;

  bool is_human() const { return std::holds_alternative<HumanJudge>(kind); }
};

std::string oracle_key(const Reply& first, const Reply& second);

/// Throws Errc::unsupported_judge for human judges and Errc::dimension when a
/// linear judge's weight vector does not match the replies.
Side judge_verdict(const JudgeStrategy& judge, const Reply& first, const Reply& second);

void validate_judge(const JudgeStrategy& judge, std::size_t facet_count);

JudgeStrategy constant_oracle(Side verdict, std::string id = "constant");

/// Oracle answering correctly on every human/machine pairing in `pool`.
JudgeStrategy truthful_oracle(std::span<const Prompt> pool, std::string id = "truthful");

/// Every linear judge whose weights are drawn from `values` facet by facet,
/// in lexicographic order with the first facet varying slowest.
std::vector<JudgeStrategy> linear_grid(std::size_t facet_count, std::span<const double> values, double bias = 0.0,
                                       Side positive_picks = Side::first);

void to_json(nlohmann::json& j, const JudgeStrategy& s);
void from_json(const nlohmann::json& j, JudgeStrategy& s);

}  // namespace dualtest
