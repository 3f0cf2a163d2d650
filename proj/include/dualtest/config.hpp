#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dualtest/align.hpp"
#include "dualtest/analytics.hpp"
#include "dualtest/detector.hpp"
#include "dualtest/game.hpp"
#include "dualtest/loop.hpp"
#include "dualtest/protocol.hpp"

namespace dualtest {

std::string sha256_hex(std::string_view bytes);

/// Prompt pools are stored one prompt per line.
std::vector<Prompt> read_pool(const std::filesystem::path& path);
void write_pool(const std::filesystem::path& path, std::span<const Prompt> pool);

nlohmann::json read_json(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);

struct ResponderSpec {
  std::string kind = "uniform";  // uniform | first | policy
  std::optional<std::filesystem::path> policy;
};

/// Everything one experiment needs. `document` is the config as read; its
/// canonical dump (sorted keys, no whitespace) is what `digest` hashes.
struct ExperimentConfig {
  nlohmann::json document;
  std::filesystem::path base_dir;
  std::string digest;

  std::uint64_t seed = 0;
  QualityWeights weights;
  ConstraintSet constraints;

  PhaseSchedule schedule;
  int retry_bound = 8;
  int max_skips = 64;
  RecalibrationPolicy recalibration;

  nlohmann::json judge_spec;
  std::vector<JudgeStrategy> judge_family;
  std::vector<Prompt> pool;
  ResponderSpec responder;

  RewardConfig reward;
  DetectorHyper detector;
  double stealth_threshold = 0.5;
  double epsilon = 0.05;
  std::optional<std::filesystem::path> corpus;

  PolicyModel policy_defaults;
  FinetuneSchedule finetune;
  LoopConfig loop;

  double alpha = 0.70;
  AnalyticsOptions analytics;
  std::optional<std::filesystem::path> game;
};

/// Relative paths resolve against `base_dir`. Throws Errc::configuration on
/// invalid values and on referenced files that are missing or unparsable.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

std::string config_digest(const nlohmann::json& doc);

/// Materialises the configured judge. {"kind": "oracle", "truthful": true}
/// expands to the truthful oracle over the pool.
JudgeStrategy make_judge(const ExperimentConfig& cfg);

MachineResponder make_responder(const ExperimentConfig& cfg);

ProtocolConfig protocol_config(const ExperimentConfig& cfg);

GameFile load_game(const ExperimentConfig& cfg);

}  // namespace dualtest
