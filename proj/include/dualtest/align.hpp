#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dualtest/detector.hpp"
#include "dualtest/protocol.hpp"
#include "dualtest/quality.hpp"
#include "dualtest/rng.hpp"
#include "dualtest/transcript.hpp"

namespace dualtest {

struct RewardConfig {
  double lambda_undetect = 1.0;
  double lambda_qual = 1.0;
  double lambda_tau = 0.5;
  double lambda_delta = 0.5;
  ConstraintSet constraints;
};

void validate_reward_config(const RewardConfig& cfg);

struct RewardBreakdown {
  double undetect_term = 0.0;
  double qual_term = 0.0;
  double tau_bonus = 0.0;
  double parity_bonus = 0.0;
  double total = 0.0;
};

/// Reward-side quality estimate. Identical to Q for feature-vector replies.
double quality_proxy(const Reply& r, const QualityWeights& weights);

/// R(r) = -l_u D(r) + l_q Q~(r) + l_tau max(0, Q(r) - tau)
///        + l_delta max(0, delta - |Q(r) - Q(u)|).
/// The detector must be frozen; `u` is the human reference for r's prompt.
RewardBreakdown reward(const Reply& r, const Reply& u, const DetectorModel& d, const RewardConfig& cfg,
                       const QualityWeights& weights);

enum class Baseline { none, batch_mean };

/// Softmax policy over each prompt's machine candidates.
struct PolicyModel {
  std::map<std::string, std::vector<double>> logits;
  double step_size = 0.5;
  Baseline baseline = Baseline::batch_mean;
  /// Per-component cap on one update's logit change; 0 disables clipping.
  double max_logit_step = 1.0;
};

/// Zero logits for every prompt in `prompts`.
PolicyModel uniform_policy(std::span<const Prompt> prompts, double step_size = 0.5,
                           Baseline baseline = Baseline::batch_mean);

std::vector<double> softmax(std::span<const double> logits);
std::vector<double> probabilities(const PolicyModel& p, const std::string& prompt_id);

std::size_t policy_sample_index(const PolicyModel& p, const Prompt& prompt, Rng& rng);
const Reply& policy_sample(const PolicyModel& p, const Prompt& prompt, Rng& rng);

MachineResponder policy_responder(PolicyModel p);

struct PolicySample {
  std::string prompt_id;
  std::size_t candidate = 0;
  double reward = 0.0;
};

/// REINFORCE step: logits += step_size * mean_k (R_k - b) (onehot_k - pi).
PolicyModel policy_update(PolicyModel p, std::span<const PolicySample> batch);

/// sum_i pi_i R_i for one prompt and its gradient with respect to the logits.
double expected_reward(const PolicyModel& p, const std::string& prompt_id, std::span<const double> rewards);
std::vector<double> expected_reward_gradient(const PolicyModel& p, const std::string& prompt_id,
                                             std::span<const double> rewards);

/// Exact expected detector score, averaged uniformly over prompts.
double expected_detectability(const PolicyModel& p, std::span<const Prompt> prompts, const DetectorModel& d);

/// Exact expected total reward, averaged uniformly over prompts.
double expected_total_reward(const PolicyModel& p, std::span<const Prompt> prompts, const DetectorModel& d,
                             const RewardConfig& cfg, const QualityWeights& weights);

struct FinetuneSchedule {
  int iterations = 200;
  int batch_size = 16;
  std::uint64_t seed = 1;
};

struct HistoryRow {
  int iteration = 0;
  double mean_reward = 0.0;
  double mean_detectability = 0.0;
};

struct FinetuneResult {
  PolicyModel policy;
  /// Row 0 is the initial policy; row k follows the k-th update.
  std::vector<HistoryRow> history;
};

/// Sample, reward and update loop. Batch slots cycle through `prompts` in
/// order; each prompt's reference human reply anchors the parity term.
FinetuneResult finetune(PolicyModel p, std::span<const Prompt> prompts, const DetectorModel& d,
                        const RewardConfig& cfg, const QualityWeights& weights, const FinetuneSchedule& schedule);

std::string history_csv(std::span<const HistoryRow> history);

void to_json(nlohmann::json& j, const RewardConfig& c);
void from_json(const nlohmann::json& j, RewardConfig& c);
void to_json(nlohmann::json& j, const RewardBreakdown& b);
void to_json(nlohmann::json& j, const PolicyModel& p);
void from_json(const nlohmann::json& j, PolicyModel& p);

}  // namespace dualtest
