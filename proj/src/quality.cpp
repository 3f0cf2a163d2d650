#include "dualtest/quality.hpp"

#include <algorithm>
#include <cmath>

#include "dualtest/error.hpp"

namespace dualtest {

namespace {

constexpr double kWeightSumTolerance = 1e-9;

bool in_unit(double x) { return x >= 0.0 && x <= 1.0; }

}  // namespace

const std::vector<std::string>& standard_facets() {
  static const std::vector<std::string> names = {
      "coherence", "relevance", "creativity", "empathy", "factual_accuracy", "formal_correctness"};
  return names;
}

void validate_reply(const Reply& reply) {
  for (double s : reply.subscores) {
    if (!in_unit(s)) throw Error(Errc::domain, "reply " + reply.id + ": subscore outside [0,1]");
  }
  if (!in_unit(reply.stealth)) throw Error(Errc::domain, "reply " + reply.id + ": stealth outside [0,1]");
}

QualityWeights::QualityWeights() : QualityWeights(uniform(standard_facets())) {}

QualityWeights::QualityWeights(std::vector<std::string> facet_names, std::vector<double> weights,
                               std::vector<FacetBounds> bounds)
    : names_(std::move(facet_names)), weights_(std::move(weights)), bounds_(std::move(bounds)) {
  if (weights_.empty()) throw Error(Errc::configuration, "quality weights: no facets");
  if (names_.size() != weights_.size() || bounds_.size() != weights_.size())
    throw Error(Errc::configuration, "quality weights: facet names, weights and bounds differ in length");
  double sum = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error(Errc::configuration, "quality weights: negative weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > kWeightSumTolerance)
    throw Error(Errc::configuration, "quality weights: weights must sum to 1");
  for (const auto& b : bounds_) {
    if (!(b.min < b.max)) throw Error(Errc::configuration, "quality weights: normalisation min >= max");
  }
}

QualityWeights QualityWeights::uniform(std::vector<std::string> facet_names) {
  const std::size_t n = facet_names.size();
  if (n == 0) throw Error(Errc::configuration, "quality weights: no facets");
  return QualityWeights(std::move(facet_names), std::vector<double>(n, 1.0 / static_cast<double>(n)),
                        std::vector<FacetBounds>(n));
}

void validate_constraints(const ConstraintSet& c) {
  if (!in_unit(c.tau) || !in_unit(c.delta))
    throw Error(Errc::configuration, "constraints: tau and delta must lie in [0,1]");
}

std::string to_string(Violation v) {
  switch (v) {
    case Violation::min_quality_human: return "MinQualityHuman";
    case Violation::min_quality_machine: return "MinQualityMachine";
    case Violation::quality_gap: return "QualityGap";
  }
  return "Unknown";
}

std::vector<double> normalize_subscores(std::span<const double> raw, const QualityWeights& weights) {
  if (raw.size() != weights.facet_count())
    throw Error(Errc::dimension, "normalize_subscores: expected " + std::to_string(weights.facet_count()) +
                                     " values, got " + std::to_string(raw.size()));
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& b = weights.bounds()[i];
    if (!(b.min < b.max)) throw Error(Errc::configuration, "normalize_subscores: min >= max");
    out[i] = std::clamp((raw[i] - b.min) / (b.max - b.min), 0.0, 1.0);
  }
  return out;
}

double quality(const Reply& reply, const QualityWeights& weights) {
  if (reply.subscores.size() != weights.facet_count())
    throw Error(Errc::dimension, "quality: reply " + reply.id + " has " + std::to_string(reply.subscores.size()) +
                                     " subscores, expected " + std::to_string(weights.facet_count()));
  double q = 0.0;
  const auto& w = weights.weights();
  for (std::size_t i = 0; i < w.size(); ++i) q += w[i] * reply.subscores[i];
  // Rounding can push a weighted mean of values in [0,1] a hair outside.
  return std::clamp(q, 0.0, 1.0);
}

ConstraintVerdict check_constraints(const Reply& u, const Reply& m, const ConstraintSet& c,
                                    const QualityWeights& weights) {
  if (u.prompt_id != m.prompt_id)
    throw Error(Errc::protocol, "check_constraints: replies answer different prompts (" + u.prompt_id + " vs " +
                                    m.prompt_id + ")");
  const double qu = quality(u, weights);
  const double qm = quality(m, weights);
  if (qu < c.tau) return ConstraintVerdict::fail(Violation::min_quality_human);
  if (qm < c.tau) return ConstraintVerdict::fail(Violation::min_quality_machine);
  if (std::abs(qu - qm) > c.delta) return ConstraintVerdict::fail(Violation::quality_gap);
  return ConstraintVerdict::pass();
}

void to_json(nlohmann::json& j, const Reply& r) {
  j = nlohmann::json{{"id", r.id}, {"prompt_id", r.prompt_id}, {"subscores", r.subscores}, {"stealth", r.stealth}};
  if (r.text) j["text"] = *r.text;
}

void from_json(const nlohmann::json& j, Reply& r) {
  r.id = j.at("id").get<std::string>();
  r.prompt_id = j.value("prompt_id", std::string{});
  r.subscores = j.at("subscores").get<std::vector<double>>();
  r.stealth = j.value("stealth", 0.0);
  if (j.contains("text") && !j["text"].is_null()) r.text = j["text"].get<std::string>();
  else r.text.reset();
  validate_reply(r);
}

void to_json(nlohmann::json& j, const QualityWeights& w) {
  nlohmann::json bounds = nlohmann::json::array();
  for (const auto& b : w.bounds()) bounds.push_back({b.min, b.max});
  j = nlohmann::json{{"facets", w.facet_names()}, {"weights", w.weights()}, {"bounds", bounds}};
}

void from_json(const nlohmann::json& j, QualityWeights& w) {
  auto names = j.contains("facets") ? j["facets"].get<std::vector<std::string>>() : standard_facets();
  const std::size_t n = names.size();
  std::vector<double> weights = j.contains("weights") ? j["weights"].get<std::vector<double>>()
                                                      : std::vector<double>(n, n ? 1.0 / static_cast<double>(n) : 0.0);
  std::vector<FacetBounds> bounds(n);
  if (j.contains("bounds")) {
    const auto& jb = j["bounds"];
    if (jb.size() != n) throw Error(Errc::configuration, "quality: bounds length differs from facet count");
    for (std::size_t i = 0; i < n; ++i) bounds[i] = {jb[i].at(0).get<double>(), jb[i].at(1).get<double>()};
  }
  w = QualityWeights(std::move(names), std::move(weights), std::move(bounds));
}

void to_json(nlohmann::json& j, const ConstraintSet& c) { j = nlohmann::json{{"tau", c.tau}, {"delta", c.delta}}; }

void from_json(const nlohmann::json& j, ConstraintSet& c) {
  c.tau = j.at("tau").get<double>();
  c.delta = j.at("delta").get<double>();
  validate_constraints(c);
}

void to_json(nlohmann::json& j, const ConstraintVerdict& v) {
  j = nlohmann::json{{"ok", v.ok}};
  j["violation"] = v.violation ? nlohmann::json(to_string(*v.violation)) : nlohmann::json(nullptr);
}

}  // namespace dualtest
