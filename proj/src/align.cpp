#include "dualtest/align.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dualtest/error.hpp"

namespace dualtest {

void validate_reward_config(const RewardConfig& cfg) {
  for (double l : {cfg.lambda_undetect, cfg.lambda_qual, cfg.lambda_tau, cfg.lambda_delta}) {
    if (!std::isfinite(l) || l < 0.0) throw Error(Errc::configuration, "reward weights must be finite and non-negative");
  }
  validate_constraints(cfg.constraints);
}

double quality_proxy(const Reply& r, const QualityWeights& weights) { return quality(r, weights); }

RewardBreakdown reward(const Reply& r, const Reply& u, const DetectorModel& d, const RewardConfig& cfg,
                       const QualityWeights& weights) {
  if (!d.frozen) throw Error(Errc::contract, "reward needs a frozen detector");
  if (r.prompt_id != u.prompt_id) throw Error(Errc::protocol, "reward: reply and reference answer different prompts");
  const double q = quality(r, weights);
  const double qu = quality(u, weights);
  RewardBreakdown b;
  b.undetect_term = -cfg.lambda_undetect * score(d, r);
  b.qual_term = cfg.lambda_qual * quality_proxy(r, weights);
  b.tau_bonus = cfg.lambda_tau * std::max(0.0, q - cfg.constraints.tau);
  b.parity_bonus = cfg.lambda_delta * std::max(0.0, cfg.constraints.delta - std::abs(q - qu));
  b.total = b.undetect_term + b.qual_term + b.tau_bonus + b.parity_bonus;
  return b;
}

PolicyModel uniform_policy(std::span<const Prompt> prompts, double step_size, Baseline baseline) {
  PolicyModel p;
  p.step_size = step_size;
  p.baseline = baseline;
  for (const auto& prompt : prompts) p.logits[prompt.id] = std::vector<double>(prompt.machine_pool.size(), 0.0);
  return p;
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) return {};
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += out[i] = std::exp(logits[i] - peak);
  for (double& x : out) x /= sum;
  return out;
}

namespace {

const std::vector<double>& logits_for(const PolicyModel& p, const std::string& prompt_id) {
  const auto it = p.logits.find(prompt_id);
  if (it == p.logits.end()) throw Error(Errc::missing_policy, "no policy registered for prompt " + prompt_id);
  return it->second;
}

const std::vector<double>& checked_logits(const PolicyModel& p, const Prompt& prompt) {
  const auto& l = logits_for(p, prompt.id);
  if (l.size() != prompt.machine_pool.size())
    throw Error(Errc::dimension, "policy for prompt " + prompt.id + " does not match its candidate pool");
  return l;
}

}  // namespace

std::vector<double> probabilities(const PolicyModel& p, const std::string& prompt_id) {
  return softmax(logits_for(p, prompt_id));
}

std::size_t policy_sample_index(const PolicyModel& p, const Prompt& prompt, Rng& rng) {
  const auto probs = softmax(checked_logits(p, prompt));
  const double u = rng.uniform01();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return probs.size() - 1;
}

const Reply& policy_sample(const PolicyModel& p, const Prompt& prompt, Rng& rng) {
  return prompt.machine_pool[policy_sample_index(p, prompt, rng)];
}

MachineResponder policy_responder(PolicyModel p) {
  return [p = std::move(p)](const Prompt& prompt, Rng& rng) { return policy_sample_index(p, prompt, rng); };
}

PolicyModel policy_update(PolicyModel p, std::span<const PolicySample> batch) {
  if (batch.empty()) throw Error(Errc::configuration, "policy_update: empty batch");
  double baseline = 0.0;
  if (p.baseline == Baseline::batch_mean) {
    for (const auto& s : batch) baseline += s.reward;
    baseline /= static_cast<double>(batch.size());
  }
  std::map<std::string, std::vector<double>> grad;
  for (const auto& s : batch) {
    const auto& logits = logits_for(p, s.prompt_id);
    if (s.candidate >= logits.size()) throw Error(Errc::dimension, "policy_update: candidate index out of range");
    const auto probs = softmax(logits);
    auto& g = grad.try_emplace(s.prompt_id, logits.size(), 0.0).first->second;
    const double adv = s.reward - baseline;
    for (std::size_t i = 0; i < probs.size(); ++i) g[i] += adv * ((i == s.candidate ? 1.0 : 0.0) - probs[i]);
  }
  const double scale = p.step_size / static_cast<double>(batch.size());
  for (auto& [id, g] : grad) {
    auto& logits = p.logits[id];
    for (std::size_t i = 0; i < g.size(); ++i) {
      double step = scale * g[i];
      if (p.max_logit_step > 0.0) step = std::clamp(step, -p.max_logit_step, p.max_logit_step);
      logits[i] += step;
    }
  }
  return p;
}

double expected_reward(const PolicyModel& p, const std::string& prompt_id, std::span<const double> rewards) {
  const auto probs = probabilities(p, prompt_id);
  if (probs.size() != rewards.size()) throw Error(Errc::dimension, "expected_reward: one reward per candidate");
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) total += probs[i] * rewards[i];
  return total;
}

std::vector<double> expected_reward_gradient(const PolicyModel& p, const std::string& prompt_id,
                                             std::span<const double> rewards) {
  const auto probs = probabilities(p, prompt_id);
  if (probs.size() != rewards.size()) throw Error(Errc::dimension, "expected_reward_gradient: one reward per candidate");
  const double mean = expected_reward(p, prompt_id, rewards);
  std::vector<double> g(probs.size());
  // E[R (e_i - pi)] collapses to pi_i (R_i - E[R]).
  for (std::size_t i = 0; i < probs.size(); ++i) g[i] = probs[i] * (rewards[i] - mean);
  return g;
}

double expected_detectability(const PolicyModel& p, std::span<const Prompt> prompts, const DetectorModel& d) {
  if (prompts.empty()) throw Error(Errc::configuration, "expected_detectability: no prompts");
  double total = 0.0;
  for (const auto& prompt : prompts) {
    const auto probs = softmax(checked_logits(p, prompt));
    double e = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) e += probs[i] * score(d, prompt.machine_pool[i]);
    total += e;
  }
  return total / static_cast<double>(prompts.size());
}

double expected_total_reward(const PolicyModel& p, std::span<const Prompt> prompts, const DetectorModel& d,
                             const RewardConfig& cfg, const QualityWeights& weights) {
  if (prompts.empty()) throw Error(Errc::configuration, "expected_total_reward: no prompts");
  double total = 0.0;
  for (const auto& prompt : prompts) {
    const auto probs = softmax(checked_logits(p, prompt));
    for (std::size_t i = 0; i < probs.size(); ++i)
      total += probs[i] * reward(prompt.machine_pool[i], prompt.reference(), d, cfg, weights).total;
  }
  return total / static_cast<double>(prompts.size());
}

FinetuneResult finetune(PolicyModel p, std::span<const Prompt> prompts, const DetectorModel& d,
                        const RewardConfig& cfg, const QualityWeights& weights, const FinetuneSchedule& schedule) {
  if (!d.frozen) throw Error(Errc::contract, "fine-tuning needs a frozen detector");
  if (prompts.empty()) throw Error(Errc::configuration, "fine-tuning needs at least one prompt");
  if (schedule.iterations < 0 || schedule.batch_size <= 0)
    throw Error(Errc::configuration, "fine-tuning schedule must have a positive batch size");
  validate_reward_config(cfg);
  for (const auto& prompt : prompts) {
    validate_prompt(prompt);
    checked_logits(p, prompt);
  }

  // Rewards depend only on (prompt, candidate); evaluate each once.
  std::vector<std::vector<double>> table(prompts.size());
  for (std::size_t k = 0; k < prompts.size(); ++k) {
    for (const auto& cand : prompts[k].machine_pool)
      table[k].push_back(reward(cand, prompts[k].reference(), d, cfg, weights).total);
  }
  auto snapshot = [&](int iteration) {
    double r = 0.0;
    for (std::size_t k = 0; k < prompts.size(); ++k) r += expected_reward(p, prompts[k].id, table[k]);
    return HistoryRow{iteration, r / static_cast<double>(prompts.size()), expected_detectability(p, prompts, d)};
  };

  FinetuneResult out;
  out.history.push_back(snapshot(0));
  Rng rng(schedule.seed);
  std::vector<PolicySample> batch(static_cast<std::size_t>(schedule.batch_size));
  std::size_t slot = 0;
  for (int it = 1; it <= schedule.iterations; ++it) {
    for (auto& s : batch) {
      const std::size_t k = slot++ % prompts.size();
      const std::size_t c = policy_sample_index(p, prompts[k], rng);
      s = {prompts[k].id, c, table[k][c]};
    }
    p = policy_update(std::move(p), batch);
    out.history.push_back(snapshot(it));
  }
  out.policy = std::move(p);
  return out;
}

std::string history_csv(std::span<const HistoryRow> history) {
  std::ostringstream os;
  os.precision(17);
  os << "iteration,mean_reward,mean_detectability\n";
  for (const auto& row : history) os << row.iteration << ',' << row.mean_reward << ',' << row.mean_detectability << '\n';
  return os.str();
}

void to_json(nlohmann::json& j, const RewardConfig& c) {
  j = nlohmann::json{{"lambda_undetect", c.lambda_undetect},
                     {"lambda_qual", c.lambda_qual},
                     {"lambda_tau", c.lambda_tau},
                     {"lambda_delta", c.lambda_delta},
                     {"constraints", c.constraints}};
}

void from_json(const nlohmann::json& j, RewardConfig& c) {
  c.lambda_undetect = j.value("lambda_undetect", 1.0);
  c.lambda_qual = j.value("lambda_qual", 1.0);
  c.lambda_tau = j.value("lambda_tau", 0.5);
  c.lambda_delta = j.value("lambda_delta", 0.5);
  if (j.contains("constraints")) c.constraints = j["constraints"].get<ConstraintSet>();
  validate_reward_config(c);
}

void to_json(nlohmann::json& j, const RewardBreakdown& b) {
  j = nlohmann::json{{"undetect_term", b.undetect_term},
                     {"qual_term", b.qual_term},
                     {"tau_bonus", b.tau_bonus},
                     {"parity_bonus", b.parity_bonus},
                     {"total", b.total}};
}

void to_json(nlohmann::json& j, const PolicyModel& p) {
  j = nlohmann::json{{"logits", p.logits},
                     {"step_size", p.step_size},
                     {"baseline", p.baseline == Baseline::batch_mean ? "batch_mean" : "none"},
                     {"max_logit_step", p.max_logit_step}};
}

void from_json(const nlohmann::json& j, PolicyModel& p) {
  p.logits = j.at("logits").get<std::map<std::string, std::vector<double>>>();
  p.step_size = j.value("step_size", 0.5);
  const auto b = j.value("baseline", std::string{"batch_mean"});
  if (b == "batch_mean") p.baseline = Baseline::batch_mean;
  else if (b == "none") p.baseline = Baseline::none;
  else throw Error(Errc::parse, "unknown baseline '" + b + "'");
  p.max_logit_step = j.value("max_logit_step", 1.0);
}

}  // namespace dualtest
