#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace dualtest {

/// A candidate response reduced to per-facet quality sub-scores.
///
/// `stealth` is generator-side ground truth used to label detector corpora.
/// It never feeds Q and is never shown to judges.
struct Reply {
  std::string id;
  std::string prompt_id;
  std::vector<double> subscores;
  double stealth = 0.0;
  std::optional<std::string> text;

  friend bool operator==(const Reply&, const Reply&) = default;
};

/// Throws Errc::domain when a subscore or stealth leaves [0, 1].
void validate_reply(const Reply& reply);

struct FacetBounds {
  double min = 0.0;
  double max = 1.0;
};

/// Facet names, aggregation weights and min-max normalisation bounds.
class QualityWeights {
 public:
  /// Uniform weights over the six standard facets with (0, 1) bounds.
  QualityWeights();

  /// Throws Errc::configuration on negative weights, weights not summing to
  /// one, `min >= max`, or mismatched lengths.
  QualityWeights(std::vector<std::string> facet_names, std::vector<double> weights,
                 std::vector<FacetBounds> bounds);

  static QualityWeights uniform(std::vector<std::string> facet_names);

  std::size_t facet_count() const noexcept { return weights_.size(); }
  const std::vector<std::string>& facet_names() const noexcept { return names_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  const std::vector<FacetBounds>& bounds() const noexcept { return bounds_; }

 private:
  std::vector<std::string> names_;
  std::vector<double> weights_;
  std::vector<FacetBounds> bounds_;
};

const std::vector<std::string>& standard_facets();

struct ConstraintSet {
  double tau = 0.0;
  double delta = 1.0;
};

void validate_constraints(const ConstraintSet& c);

enum class Violation { min_quality_human, min_quality_machine, quality_gap };

struct ConstraintVerdict {
  bool ok = true;
  std::optional<Violation> violation;

  static ConstraintVerdict pass() { return {}; }
  static ConstraintVerdict fail(Violation v) { return {false, v}; }
  friend bool operator==(const ConstraintVerdict&, const ConstraintVerdict&) = default;
};

std::string to_string(Violation v);

std::vector<double> normalize_subscores(std::span<const double> raw, const QualityWeights& weights);

/// Weighted mean of the sub-scores, in [0, 1] for valid inputs.
double quality(const Reply& reply, const QualityWeights& weights);

/// Checks Q(u) >= tau, Q(m) >= tau and |Q(u) - Q(m)| <= delta, reporting the
/// first failing test in that order.
ConstraintVerdict check_constraints(const Reply& u, const Reply& m, const ConstraintSet& c,
                                    const QualityWeights& weights);

// JSON forms used by config, pool and transcript files.
void to_json(nlohmann::json& j, const Reply& r);
void from_json(const nlohmann::json& j, Reply& r);
void to_json(nlohmann::json& j, const QualityWeights& w);
void from_json(const nlohmann::json& j, QualityWeights& w);
void to_json(nlohmann::json& j, const ConstraintSet& c);
void from_json(const nlohmann::json& j, ConstraintSet& c);
void to_json(nlohmann::json& j, const ConstraintVerdict& v);

}  // namespace dualtest
