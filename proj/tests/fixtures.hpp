#pragma once

#include <string>
#include <vector>

#include "dualtest/game.hpp"
#include "dualtest/protocol.hpp"
#include "dualtest/rng.hpp"

namespace fx {

using namespace dualtest;

inline Reply reply(std::string id, std::string prompt, std::vector<double> s, double stealth = 0.0) {
  return Reply{std::move(id), std::move(prompt), std::move(s), stealth, std::nullopt};
}

inline QualityWeights two_facets() { return QualityWeights::uniform({"a", "b"}); }

/// Prompt with one human reply and the given machine sub-score vectors.
inline Prompt prompt(const std::string& id, Phase phase, std::vector<double> human,
                     const std::vector<std::vector<double>>& machines) {
  Prompt p;
  p.id = id;
  p.phase = phase;
  p.human_pool.push_back(reply(id + "-h", id, std::move(human)));
  for (std::size_t k = 0; k < machines.size(); ++k)
    p.machine_pool.push_back(reply(id + "-m" + std::to_string(k), id, machines[k]));
  return p;
}

/// Random two-facet instance; candidates cluster near the human reply so
/// most are feasible, and the human reply always clears tau.
inline GameInstance random_instance(Rng& rng, int rounds, int candidates, PresentationRule rule) {
  GameInstance g;
  g.weights = two_facets();
  g.constraints = {0.5, 0.2};
  g.presentation = rule;
  for (int i = 0; i < rounds; ++i) {
    std::vector<double> h{rng.uniform(0.6, 0.9), rng.uniform(0.6, 0.9)};
    std::vector<std::vector<double>> ms;
    for (int k = 0; k < candidates; ++k) {
      std::vector<double> m{std::clamp(h[0] + rng.uniform(-0.25, 0.25), 0.0, 1.0),
                            std::clamp(h[1] + rng.uniform(-0.25, 0.25), 0.0, 1.0)};
      ms.push_back(m);
    }
    // guarantee feasibility: one candidate equal to the human reply
    ms[rng.index(ms.size())] = h;
    g.rounds.push_back(prompt("g" + std::to_string(i), Phase(), h, ms));
  }
  return g;
}

inline std::vector<JudgeStrategy> random_linear_judges(Rng& rng, int count, std::size_t facets) {
  std::vector<JudgeStrategy> js;
  for (int n = 0; n < count; ++n) {
    LinearJudge lin;
    for (std::size_t i = 0; i < facets; ++i) lin.weights.push_back(rng.uniform(-1.0, 1.0));
    lin.bias = rng.uniform(-0.05, 0.05);
    lin.positive_picks = rng.coin() ? Side::first : Side::second;
    js.push_back({"j" + std::to_string(n), lin});
  }
  return js;
}

/// A pool with `per_phase` prompts per base phase, every candidate feasible
/// under tau 0.5, delta 0.3.
inline std::vector<Prompt> simple_pool(int per_phase, Rng& rng, int machines = 3) {
  std::vector<Prompt> pool;
  for (BasePhase b : {BasePhase::general_knowledge, BasePhase::critical_reasoning, BasePhase::creative_introspection}) {
    for (int i = 0; i < per_phase; ++i) {
      const std::string id = Phase(b).tag() + "-" + std::to_string(i);
      std::vector<std::vector<double>> ms;
      for (int k = 0; k < machines; ++k) ms.push_back({rng.uniform(0.6, 0.8), rng.uniform(0.6, 0.8)});
      pool.push_back(prompt(id, Phase(b), {rng.uniform(0.6, 0.8), rng.uniform(0.6, 0.8)}, ms));
    }
  }
  return pool;
}

}  // namespace fx
