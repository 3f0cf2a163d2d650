#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dualtest/quality.hpp"
#include "dualtest/rng.hpp"

namespace dualtest {

enum class Label { detectable = 0, undetectable = 1 };

struct LabeledReply {
  Reply reply;
  Label label = Label::detectable;
};

/// Undetectable iff reply.stealth >= threshold.
LabeledReply label_by_stealth(Reply reply, double threshold = 0.5);

struct DetectorHyper {
  double learning_rate = 0.5;
  int epochs = 2000;
  double l2 = 1e-4;
  std::uint64_t seed = 1;
  /// Adds pairwise products of sub-scores as extra features.
  bool interactions = false;
};

/// Logistic scorer D(r) in [0, 1]; higher means stealthier.
struct DetectorModel {
  std::vector<std::string> feature_names;
  std::vector<double> weights;
  double bias = 0.0;
  int version = 1;
  bool frozen = false;

  std::size_t facet_count() const;
  bool interactions() const;
  std::vector<std::string> facet_names() const;
};

/// Sub-scores, followed by pairwise products a*b (a < b) when requested.
std::vector<double> detector_features(const Reply& r, bool interactions);
std::vector<std::string> detector_feature_names(const std::vector<std::string>& facet_names, bool interactions);

struct DetectorFit {
  DetectorModel model;
  /// Regularised mean cross-entropy before each epoch and after the last.
  std::vector<double> loss_history;
};

/// Full-batch gradient descent on L2-regularised cross-entropy.
/// Throws Errc::degenerate_corpus unless both labels are present.
DetectorFit fit_detector(std::span<const LabeledReply> corpus, const DetectorHyper& hyper,
                         const std::vector<std::string>& facet_names = {});

DetectorModel train_detector(std::span<const LabeledReply> corpus, const DetectorHyper& hyper,
                             const std::vector<std::string>& facet_names = {});

/// Warm-started training of an existing model. Throws Errc::frozen_model if
/// the model has been frozen.
void train_detector(DetectorModel& model, std::span<const LabeledReply> corpus, const DetectorHyper& hyper);

double score(const DetectorModel& d, const Reply& r);

/// Shifts each sub-score by uniform noise in [-epsilon, epsilon], clamped to
/// [0, 1]. Stands in for paraphrasing at the feature level.
Reply perturb(const Reply& r, double epsilon, Rng& rng);

/// Mann-Whitney AUC with tied scores counted as one half.
double auc(std::span<const double> scores, std::span<const Label> labels);

struct DetectorMetrics {
  double accuracy = 0.0;
  double auc = 0.0;
  double perturbed_auc = 0.0;
  double robustness_drop = 0.0;
};

/// Accuracy thresholds at score > 0.5.
DetectorMetrics evaluate_detector(const DetectorModel& d, std::span<const LabeledReply> corpus, double epsilon, Rng& rng);

DetectorModel freeze(DetectorModel d);

void to_json(nlohmann::json& j, const DetectorModel& d);
void from_json(const nlohmann::json& j, DetectorModel& d);
void to_json(nlohmann::json& j, const LabeledReply& r);
void from_json(const nlohmann::json& j, LabeledReply& r);
void to_json(nlohmann::json& j, const DetectorMetrics& m);

std::vector<LabeledReply> read_corpus(const std::filesystem::path& path);
void write_corpus(const std::filesystem::path& path, std::span<const LabeledReply> corpus);

}  // namespace dualtest
