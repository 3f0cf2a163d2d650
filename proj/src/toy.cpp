#include "dualtest/toy.hpp"

#include <cstdio>

#include "dualtest/error.hpp"

namespace dualtest {

namespace {

constexpr std::size_t kCreativity = 2;
constexpr std::size_t kEmpathy = 3;
constexpr std::size_t kFactual = 4;
constexpr std::size_t kFormal = 5;

std::string numbered(const char* fmt, int n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, fmt, n);
  return buf;
}

}  // namespace

Reply synth_reply(ReplyKind kind, std::string id, std::string prompt_id, Rng& rng) {
  Reply r;
  r.id = std::move(id);
  r.prompt_id = std::move(prompt_id);
  r.subscores.resize(standard_facets().size());
  for (double& s : r.subscores) s = rng.uniform(0.62, 0.86);
  switch (kind) {
    case ReplyKind::plain:
      r.stealth = rng.uniform(0.0, 0.3);
      break;
    case ReplyKind::stealth_a:
      r.subscores[kCreativity] = rng.uniform(0.9, 1.0);
      r.subscores[kFormal] = rng.uniform(0.35, 0.45);
      r.stealth = rng.uniform(0.7, 1.0);
      break;
    case ReplyKind::stealth_b:
      r.subscores[kEmpathy] = rng.uniform(0.9, 1.0);
      r.subscores[kFactual] = rng.uniform(0.35, 0.45);
      r.stealth = rng.uniform(0.7, 1.0);
      break;
  }
  return r;
}

Reply synth_human_reply(std::string id, std::string prompt_id, Rng& rng) {
  Reply r;
  r.id = std::move(id);
  r.prompt_id = std::move(prompt_id);
  r.subscores.resize(standard_facets().size());
  for (double& s : r.subscores) s = rng.uniform(0.68, 0.88);
  r.stealth = 0.0;
  return r;
}

std::vector<Prompt> generate_pool(const GenPoolOptions& opts) {
  if (opts.prompts_per_phase <= 0 || opts.human_per_prompt <= 0 || opts.machine_per_prompt <= 0)
    throw Error(Errc::configuration, "gen-pool: counts must be positive");
  Rng rng(opts.seed);
  std::vector<Prompt> pool;
  for (BasePhase base : {BasePhase::general_knowledge, BasePhase::critical_reasoning, BasePhase::creative_introspection}) {
    const Phase phase(base);
    for (int k = 1; k <= opts.prompts_per_phase; ++k) {
      Prompt p;
      p.id = phase.tag() + numbered("-%02d", k);
      p.phase = phase;
      for (int h = 0; h < opts.human_per_prompt; ++h)
        p.human_pool.push_back(synth_human_reply(p.id + numbered("-h%d", h), p.id, rng));
      for (int m = 0; m < opts.machine_per_prompt; ++m) {
        ReplyKind kind = ReplyKind::plain;
        if (rng.bernoulli(opts.stealthy_fraction)) kind = rng.coin() ? ReplyKind::stealth_a : ReplyKind::stealth_b;
        p.machine_pool.push_back(synth_reply(kind, p.id + numbered("-m%d", m), p.id, rng));
      }
      p.reference_human = 0;
      pool.push_back(std::move(p));
    }
  }
  return pool;
}

std::vector<LabeledReply> generate_corpus(const GenCorpusOptions& opts) {
  Rng rng(opts.seed);
  std::vector<LabeledReply> out;
  int n = 0;
  auto emit = [&](ReplyKind kind, int count) {
    for (int i = 0; i < count; ++i, ++n)
      out.push_back(label_by_stealth(synth_reply(kind, numbered("c%04d", n), "corpus", rng), opts.stealth_threshold));
  };
  emit(ReplyKind::plain, opts.plain);
  emit(ReplyKind::stealth_a, opts.stealth_a);
  emit(ReplyKind::stealth_b, opts.stealth_b);
  return out;
}

GameFile alpha_game() {
  GameFile f;
  f.instance.weights = QualityWeights::uniform({"coherence", "empathy"});
  f.instance.constraints = {0.6, 0.15};
  f.instance.presentation = PresentationRule::both_orders;
  for (int i = 1; i <= 10; ++i) {
    Prompt p;
    p.id = numbered("g%02d", i);
    p.phase = Phase(i <= 4 ? BasePhase::general_knowledge
                           : (i <= 7 ? BasePhase::critical_reasoning : BasePhase::creative_introspection));
    auto mk = [&](const char* tag, double a, double b) { return Reply{p.id + "-" + tag, p.id, {a, b}, 0.0, {}}; };
    p.human_pool.push_back(mk("h", 0.8, 0.8));
    if (i <= 7) {
      // Feasible candidates trail the human on both facets; the ones that
      // would fool a judge fall below tau.
      p.machine_pool = {mk("m0", 0.75, 0.70), mk("m1", 0.70, 0.75), mk("m2", 0.90, 0.20), mk("m3", 0.20, 0.95)};
    } else {
      // Each feasible candidate beats the human on exactly one facet.
      p.machine_pool = {mk("m0", 0.85, 0.70), mk("m1", 0.70, 0.85)};
    }
    f.instance.rounds.push_back(std::move(p));
  }
  f.judges = {
      JudgeStrategy{"coherence", LinearJudge{{1.0, 0.0}, 0.0, Side::first}},
      JudgeStrategy{"empathy", LinearJudge{{0.0, 1.0}, 0.0, Side::first}},
      JudgeStrategy{"contrarian", LinearJudge{{-1.0, 0.0}, 0.0, Side::first}},
  };
  f.alpha = 0.70;
  return f;
}

AlignmentInstance alignment_instance(int prompts) {
  AlignmentInstance inst;
  inst.weights = QualityWeights();
  const std::vector<double> stealthy{0.7, 0.7, 0.9, 0.7, 0.7, 0.5};
  const std::vector<double> plain{0.7, 0.7, 0.5, 0.7, 0.7, 0.9};
  const std::vector<double> human{0.7, 0.7, 0.7, 0.7, 0.7, 0.7};
  for (int i = 1; i <= prompts; ++i) {
    Prompt p;
    p.id = numbered("a%02d", i);
    p.phase = Phase(static_cast<BasePhase>((i - 1) % 3 + 1));
    p.human_pool.push_back(Reply{p.id + "-h", p.id, human, 0.0, {}});
    p.machine_pool.push_back(Reply{p.id + "-stealthy", p.id, stealthy, 0.9, {}});
    p.machine_pool.push_back(Reply{p.id + "-plain", p.id, plain, 0.1, {}});
    inst.prompts.push_back(std::move(p));
  }
  DetectorModel d;
  d.feature_names = standard_facets();
  d.weights.assign(d.feature_names.size(), 0.0);
  d.weights[kCreativity] = 12.0;
  d.bias = -12.0 * 0.7;
  d.version = 1;
  inst.detector = freeze(std::move(d));
  return inst;
}

LoopInstance loop_instance(std::uint64_t seed) {
  LoopInstance inst;
  Rng rng(seed);
  for (BasePhase base : {BasePhase::general_knowledge, BasePhase::critical_reasoning, BasePhase::creative_introspection}) {
    const Phase phase(base);
    for (int k = 1; k <= 2; ++k) {
      Prompt p;
      p.id = "L" + phase.tag() + numbered("-%d", k);
      p.phase = phase;
      p.human_pool.push_back(synth_human_reply(p.id + "-h", p.id, rng));
      p.machine_pool.push_back(synth_reply(ReplyKind::plain, p.id + "-m0", p.id, rng));
      p.machine_pool.push_back(synth_reply(ReplyKind::plain, p.id + "-m1", p.id, rng));
      p.machine_pool.push_back(synth_reply(ReplyKind::stealth_a, p.id + "-m2", p.id, rng));
      p.machine_pool.push_back(synth_reply(ReplyKind::stealth_b, p.id + "-m3", p.id, rng));
      inst.prompts.push_back(std::move(p));
    }
  }
  inst.initial_corpus = generate_corpus({60, 30, 0, 0.5, seed ^ 0x9e3779b97f4a7c15ULL});
  inst.settings.reward.constraints = {0.6, 0.15};
  inst.settings.finetune = {50, 16, seed};
  inst.settings.seed = seed;
  return inst;
}

}  // namespace dualtest
