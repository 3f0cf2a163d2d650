#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dualtest/detector.hpp"
#include "dualtest/game.hpp"
#include "dualtest/loop.hpp"
#include "dualtest/transcript.hpp"

namespace dualtest {

// Synthetic pools and corpora over the six standard facets. Stealthy replies
// come in two families with distinct facet signatures: family A spikes
// creativity while sagging on formal correctness, family B spikes empathy
// while sagging on factual accuracy.
enum class ReplyKind { plain, stealth_a, stealth_b };

Reply synth_reply(ReplyKind kind, std::string id, std::string prompt_id, Rng& rng);
Reply synth_human_reply(std::string id, std::string prompt_id, Rng& rng);

struct GenPoolOptions {
  int prompts_per_phase = 30;
  int human_per_prompt = 2;
  int machine_per_prompt = 4;
  double stealthy_fraction = 0.25;
  std::uint64_t seed = 1;
};

std::vector<Prompt> generate_pool(const GenPoolOptions& opts);

struct GenCorpusOptions {
  int plain = 60;
  int stealth_a = 30;
  int stealth_b = 0;
  double stealth_threshold = 0.5;
  std::uint64_t seed = 1;
};

std::vector<LabeledReply> generate_corpus(const GenCorpusOptions& opts);

/// Ten rounds over two facets where the best linear judge of the bundled
/// family is forced correct on exactly seven rounds (minimax value 0.70).
GameFile alpha_game();

struct AlignmentInstance {
  std::vector<Prompt> prompts;
  QualityWeights weights;
  DetectorModel detector;  ///< frozen
};

/// Each prompt offers a stealthy and a plain candidate of equal quality;
/// the detector scores them about 0.92 and 0.08.
AlignmentInstance alignment_instance(int prompts = 3);

struct LoopInstance {
  std::vector<Prompt> prompts;
  std::vector<LabeledReply> initial_corpus;
  /// tau 0.6, delta 0.15, 50 fine-tuning updates per iteration.
  LoopSettings settings;
};

/// Two prompts per phase, each with two plain, one family-A and one
/// family-B candidate. The initial corpus only contains family A.
LoopInstance loop_instance(std::uint64_t seed);

}  // namespace dualtest
