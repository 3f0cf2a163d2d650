#include "dualtest/loop.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "dualtest/error.hpp"

namespace dualtest {

void validate_loop_config(const LoopConfig& cfg) {
  if (cfg.max_iterations < 0 || cfg.redteam_budget <= 0 || cfg.convergence_patience <= 0)
    throw Error(Errc::configuration, "loop config: budget and patience must be positive");
  if (!(cfg.stealth_threshold > 0.0 && cfg.stealth_threshold < 1.0))
    throw Error(Errc::configuration, "loop config: stealth_threshold must lie in (0,1)");
}

std::vector<LabeledReply> red_team(const PolicyModel& policy, std::span<const Prompt> prompts, const DetectorModel& d,
                                   const LoopConfig& cfg, Rng& rng, int iteration) {
  if (!d.frozen) throw Error(Errc::contract, "red-teaming needs a frozen detector");
  std::vector<LabeledReply> finds;
  std::set<std::string> seen;
  const auto budget = static_cast<std::size_t>(cfg.redteam_budget);
  std::size_t probes = 0;

  auto probe = [&](const Reply& r) {
    if (probes >= budget || !seen.insert(r.id).second) return;
    ++probes;
    if (r.stealth >= cfg.corpus_threshold && score(d, r) < cfg.stealth_threshold)
      finds.push_back({r, Label::undetectable});
  };

  for (const auto& prompt : prompts) probe(policy_sample(policy, prompt, rng));
  for (const auto& prompt : prompts)
    for (const auto& m : prompt.machine_pool) probe(m);

  std::size_t total_candidates = 0;
  for (const auto& prompt : prompts) total_candidates += prompt.machine_pool.size();
  if (total_candidates == 0 || cfg.epsilon == 0.0) return finds;
  for (std::size_t variant = 0; probes < budget; ++variant) {
    for (const auto& prompt : prompts) {
      for (const auto& m : prompt.machine_pool) {
        if (probes >= budget) return finds;
        Reply v = perturb(m, cfg.epsilon, rng);
        // iteration in the id keeps variants from different rounds distinct in the corpus
        v.id = m.id + "~" + std::to_string(iteration) + "." + std::to_string(variant);
        probe(v);
      }
    }
  }
  return finds;
}

DetectorModel augment_and_retrain(const DetectorModel& d, std::span<const LabeledReply> base_corpus,
                                  std::span<const LabeledReply> finds, const DetectorHyper& hyper) {
  if (!d.frozen) throw Error(Errc::contract, "augment_and_retrain expects the frozen predecessor");
  std::vector<LabeledReply> corpus(base_corpus.begin(), base_corpus.end());
  std::set<std::string> ids;
  for (const auto& item : corpus) ids.insert(item.reply.id);
  for (const auto& f : finds) {
    if (f.label != Label::undetectable) throw Error(Errc::contract, "red-team finds must be labelled Undetectable");
    if (ids.insert(f.reply.id).second) corpus.push_back(f);
  }
  DetectorHyper h = hyper;
  h.interactions = d.interactions();
  auto next = train_detector(corpus, h, d.facet_names());
  next.version = d.version + 1;
  return freeze(std::move(next));
}

bool converged(const LoopState& state, const LoopConfig& cfg) {
  int clean = 0;
  for (auto it = state.metrics_history.rbegin(); it != state.metrics_history.rend(); ++it) {
    if (it->iteration < 1) break;
    if (it->redteam_finds != 0) break;
    if (++clean >= cfg.convergence_patience) return true;
  }
  return false;
}

namespace {

double corpus_auc(const DetectorModel& d, std::span<const LabeledReply> corpus) {
  std::vector<double> scores;
  std::vector<Label> labels;
  for (const auto& item : corpus) {
    scores.push_back(score(d, item.reply));
    labels.push_back(item.label);
  }
  return auc(scores, labels);
}

}  // namespace

LoopRun run_loop(std::span<const LabeledReply> initial_corpus, std::span<const Prompt> prompts, PolicyModel policy,
                 const LoopSettings& settings) {
  const auto& cfg = settings.loop;
  validate_loop_config(cfg);
  validate_reward_config(settings.reward);

  LoopRun run;
  LoopState state;
  state.stealth_corpus.assign(initial_corpus.begin(), initial_corpus.end());
  state.detector = freeze(train_detector(state.stealth_corpus, settings.detector, settings.weights.facet_names()));
  state.detector_version = state.detector.version;
  state.policy = std::move(policy);
  state.metrics_history.push_back(
      {0, expected_detectability(state.policy, prompts, state.detector), 0, corpus_auc(state.detector, state.stealth_corpus)});
  run.history.push_back(state);

  Rng rng(settings.seed);
  for (int k = 1; k <= cfg.max_iterations; ++k) {
    FinetuneSchedule sched = settings.finetune;
    sched.seed = settings.finetune.seed + static_cast<std::uint64_t>(k);
    auto tuned = finetune(std::move(state.policy), prompts, state.detector, settings.reward, settings.weights, sched);
    state.policy = std::move(tuned.policy);
    state.policy_version += 1;
    const double detectability = expected_detectability(state.policy, prompts, state.detector);

    state.last_finds = red_team(state.policy, prompts, state.detector, cfg, rng, k);
    state.detector = augment_and_retrain(state.detector, state.stealth_corpus, state.last_finds, settings.detector);
    state.detector_version = state.detector.version;
    std::set<std::string> ids;
    for (const auto& item : state.stealth_corpus) ids.insert(item.reply.id);
    for (const auto& f : state.last_finds)
      if (ids.insert(f.reply.id).second) state.stealth_corpus.push_back(f);

    state.iteration = k;
    state.metrics_history.push_back({k, detectability, static_cast<int>(state.last_finds.size()),
                                     corpus_auc(state.detector, state.stealth_corpus)});
    run.history.push_back(state);
    if (converged(state, cfg)) {
      run.converged = true;
      break;
    }
  }
  return run;
}

std::string loop_metrics_csv(const LoopRun& run) {
  std::ostringstream os;
  os.precision(17);
  os << "iteration,expected_detectability,redteam_finds,detector_auc,corpus_size,detector_version,policy_version\n";
  for (const auto& s : run.history) {
    const auto& m = s.metrics_history.back();
    os << m.iteration << ',' << m.expected_detectability << ',' << m.redteam_finds << ',' << m.detector_auc << ','
       << s.stealth_corpus.size() << ',' << s.detector_version << ',' << s.policy_version << '\n';
  }
  return os.str();
}

nlohmann::json loop_summary(const LoopRun& run) {
  const auto& last = run.final_state();
  return nlohmann::json{{"converged", run.converged},
                        {"iterations", last.iteration},
                        {"initial_expected_detectability", run.history.front().metrics_history.back().expected_detectability},
                        {"final_expected_detectability", last.metrics_history.back().expected_detectability},
                        {"corpus_size", last.stealth_corpus.size()},
                        {"detector_version", last.detector_version},
                        {"policy_version", last.policy_version}};
}

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw Error(Errc::io, "cannot write " + p.string());
  out << text;
}

}  // namespace

void write_run_directory(const LoopRun& run, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& s : run.history) {
    char name[16];
    std::snprintf(name, sizeof name, "iter_%03d", s.iteration);
    const auto sub = dir / name;
    std::filesystem::create_directories(sub);
    write_text(sub / "detector.json", nlohmann::json(s.detector).dump(2) + "\n");
    write_text(sub / "policy.json", nlohmann::json(s.policy).dump(2) + "\n");
    write_corpus(sub / "finds.jsonl", s.last_finds);
    write_text(sub / "metrics.json", nlohmann::json(s.metrics_history.back()).dump(2) + "\n");
  }
  write_text(dir / "metrics.csv", loop_metrics_csv(run));
  write_text(dir / "summary.json", loop_summary(run).dump(2) + "\n");
}

void to_json(nlohmann::json& j, const LoopMetrics& m) {
  j = nlohmann::json{{"iteration", m.iteration},
                     {"expected_detectability", m.expected_detectability},
                     {"redteam_finds", m.redteam_finds},
                     {"detector_auc", m.detector_auc}};
}

void to_json(nlohmann::json& j, const LoopConfig& c) {
  j = nlohmann::json{{"max_iterations", c.max_iterations},
                     {"redteam_budget", c.redteam_budget},
                     {"stealth_threshold", c.stealth_threshold},
                     {"corpus_threshold", c.corpus_threshold},
                     {"convergence_patience", c.convergence_patience},
                     {"epsilon", c.epsilon}};
}

void from_json(const nlohmann::json& j, LoopConfig& c) {
  c.max_iterations = j.value("max_iterations", 10);
  c.redteam_budget = j.value("redteam_budget", 64);
  c.stealth_threshold = j.value("stealth_threshold", 0.5);
  c.corpus_threshold = j.value("corpus_threshold", 0.5);
  c.convergence_patience = j.value("convergence_patience", 2);
  c.epsilon = j.value("epsilon", 0.05);
  validate_loop_config(c);
}

}  // namespace dualtest
