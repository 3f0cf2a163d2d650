#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "dualtest/align.hpp"
#include "dualtest/detector.hpp"

namespace dualtest {

struct LoopConfig {
  int max_iterations = 10;
  /// Probes per red-team pass.
  int redteam_budget = 64;
  /// A ground-truth stealthy probe scoring below this counts as a find.
  double stealth_threshold = 0.5;
  /// Ground-truth stealth at or above this marks a reply Undetectable.
  double corpus_threshold = 0.5;
  int convergence_patience = 2;
  double epsilon = 0.05;
};

void validate_loop_config(const LoopConfig& cfg);

struct LoopMetrics {
  int iteration = 0;
  double expected_detectability = 0.0;
  int redteam_finds = 0;
  double detector_auc = 0.0;
};

struct LoopState {
  int iteration = 0;
  int detector_version = 0;
  int policy_version = 0;
  /// Detector training corpus; only ever grows.
  std::vector<LabeledReply> stealth_corpus;
  std::vector<LoopMetrics> metrics_history;
  DetectorModel detector;
  PolicyModel policy;
  /// Finds of the latest iteration.
  std::vector<LabeledReply> last_finds;
};

/// Probes one policy sample per prompt, then every pool member, then
/// epsilon-perturbed pool members, up to the budget. Returns the probes that
/// are stealthy by ground truth yet score below the threshold, labelled
/// Undetectable, in probe order.
std::vector<LabeledReply> red_team(const PolicyModel& policy, std::span<const Prompt> prompts, const DetectorModel& d,
                                   const LoopConfig& cfg, Rng& rng, int iteration = 0);

/// Retrains from scratch on base ∪ finds; the result is frozen with
/// version d.version + 1.
DetectorModel augment_and_retrain(const DetectorModel& d, std::span<const LabeledReply> base_corpus,
                                  std::span<const LabeledReply> finds, const DetectorHyper& hyper);

/// True iff the last `convergence_patience` iterations had no finds.
bool converged(const LoopState& state, const LoopConfig& cfg);

struct LoopSettings {
  RewardConfig reward;
  QualityWeights weights;
  DetectorHyper detector;
  FinetuneSchedule finetune;
  LoopConfig loop;
  std::uint64_t seed = 1;
};

struct LoopRun {
  /// history[0] holds the initial detector; history[k] the state after
  /// iteration k.
  std::vector<LoopState> history;
  bool converged = false;

  const LoopState& final_state() const { return history.back(); }
};

LoopRun run_loop(std::span<const LabeledReply> initial_corpus, std::span<const Prompt> prompts, PolicyModel policy,
                 const LoopSettings& settings);

std::string loop_metrics_csv(const LoopRun& run);
nlohmann::json loop_summary(const LoopRun& run);

/// iter_NNN/{detector.json, policy.json, finds.jsonl, metrics.json} plus
/// top-level metrics.csv and summary.json.
void write_run_directory(const LoopRun& run, const std::filesystem::path& dir);

void to_json(nlohmann::json& j, const LoopMetrics& m);
void to_json(nlohmann::json& j, const LoopConfig& c);
void from_json(const nlohmann::json& j, LoopConfig& c);

}  // namespace dualtest
