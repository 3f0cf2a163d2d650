#include "dualtest/detector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "dualtest/error.hpp"

namespace dualtest {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double affine(const DetectorModel& d, const std::vector<double>& x) {
  double z = d.bias;
  for (std::size_t i = 0; i < x.size(); ++i) z += d.weights[i] * x[i];
  return z;
}

}  // namespace

LabeledReply label_by_stealth(Reply reply, double threshold) {
  const Label label = reply.stealth >= threshold ? Label::undetectable : Label::detectable;
  return {std::move(reply), label};
}

bool DetectorModel::interactions() const {
  return std::any_of(feature_names.begin(), feature_names.end(),
                     [](const std::string& n) { return n.find('*') != std::string::npos; });
}

std::size_t DetectorModel::facet_count() const {
  return static_cast<std::size_t>(std::count_if(feature_names.begin(), feature_names.end(), [](const std::string& n) {
    return n.find('*') == std::string::npos;
  }));
}

std::vector<std::string> DetectorModel::facet_names() const {
  return {feature_names.begin(), feature_names.begin() + static_cast<std::ptrdiff_t>(facet_count())};
}

std::vector<double> detector_features(const Reply& r, bool interactions) {
  std::vector<double> x = r.subscores;
  if (interactions) {
    const std::size_t n = r.subscores.size();
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) x.push_back(r.subscores[a] * r.subscores[b]);
  }
  return x;
}

std::vector<std::string> detector_feature_names(const std::vector<std::string>& facet_names, bool interactions) {
  std::vector<std::string> names = facet_names;
  if (interactions) {
    for (std::size_t a = 0; a < facet_names.size(); ++a)
      for (std::size_t b = a + 1; b < facet_names.size(); ++b) names.push_back(facet_names[a] + "*" + facet_names[b]);
  }
  return names;
}

namespace {

struct Design {
  std::vector<std::vector<double>> x;
  std::vector<double> y;
};

Design make_design(std::span<const LabeledReply> corpus, bool interactions, std::size_t facet_count) {
  Design d;
  bool pos = false, neg = false;
  for (const auto& item : corpus) {
    if (item.reply.subscores.size() != facet_count)
      throw Error(Errc::dimension, "detector corpus: reply " + item.reply.id + " has the wrong facet count");
    d.x.push_back(detector_features(item.reply, interactions));
    d.y.push_back(item.label == Label::undetectable ? 1.0 : 0.0);
    (item.label == Label::undetectable ? pos : neg) = true;
  }
  if (!pos || !neg) throw Error(Errc::degenerate_corpus, "detector corpus needs both labels");
  return d;
}

void check_hyper(const DetectorHyper& h) {
  if (!(h.learning_rate > 0.0) || h.epochs <= 0 || !(h.l2 > 0.0))
    throw Error(Errc::configuration, "detector hyperparameters must be positive");
}

double regularised_loss(const DetectorModel& m, const Design& d, double l2) {
  double loss = 0.0;
  for (std::size_t i = 0; i < d.x.size(); ++i) {
    const double z = affine(m, d.x[i]);
    loss += d.y[i] > 0.5 ? softplus(-z) : softplus(z);
  }
  loss /= static_cast<double>(d.x.size());
  double sq = 0.0;
  for (double w : m.weights) sq += w * w;
  return loss + 0.5 * l2 * sq;
}

void descend(DetectorModel& m, const Design& d, const DetectorHyper& h, std::vector<double>* losses) {
  const std::size_t n = d.x.size();
  const std::size_t p = m.weights.size();
  std::vector<double> grad(p);
  for (int epoch = 0; epoch < h.epochs; ++epoch) {
    if (losses) losses->push_back(regularised_loss(m, d, h.l2));
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double err = sigmoid(affine(m, d.x[i])) - d.y[i];
      for (std::size_t k = 0; k < p; ++k) grad[k] += err * d.x[i][k];
      grad_b += err;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t k = 0; k < p; ++k) m.weights[k] -= h.learning_rate * (grad[k] * inv_n + h.l2 * m.weights[k]);
    m.bias -= h.learning_rate * grad_b * inv_n;
  }
  if (losses) losses->push_back(regularised_loss(m, d, h.l2));
}

}  // namespace

DetectorFit fit_detector(std::span<const LabeledReply> corpus, const DetectorHyper& hyper,
                         const std::vector<std::string>& facet_names) {
  check_hyper(hyper);
  if (corpus.empty()) throw Error(Errc::degenerate_corpus, "detector corpus is empty");
  const std::size_t facets = corpus.front().reply.subscores.size();
  std::vector<std::string> names = facet_names;
  if (names.empty())
    for (std::size_t i = 0; i < facets; ++i) names.push_back("f" + std::to_string(i));
  if (names.size() != facets) throw Error(Errc::dimension, "detector: facet names differ from sub-score count");
  const Design design = make_design(corpus, hyper.interactions, facets);

  DetectorFit fit;
  auto& m = fit.model;
  m.feature_names = detector_feature_names(names, hyper.interactions);
  Rng rng(hyper.seed);
  m.weights.resize(m.feature_names.size());
  for (double& w : m.weights) w = rng.uniform(-0.01, 0.01);
  m.bias = 0.0;
  m.version = 1;
  descend(m, design, hyper, &fit.loss_history);
  return fit;
}

DetectorModel train_detector(std::span<const LabeledReply> corpus, const DetectorHyper& hyper,
                             const std::vector<std::string>& facet_names) {
  return fit_detector(corpus, hyper, facet_names).model;
}

void train_detector(DetectorModel& model, std::span<const LabeledReply> corpus, const DetectorHyper& hyper) {
  if (model.frozen) throw Error(Errc::frozen_model, "detector v" + std::to_string(model.version) + " is frozen");
  check_hyper(hyper);
  const Design design = make_design(corpus, model.interactions(), model.facet_count());
  descend(model, design, hyper, nullptr);
}

double score(const DetectorModel& d, const Reply& r) {
  if (r.subscores.size() != d.facet_count())
    throw Error(Errc::dimension, "detector expects " + std::to_string(d.facet_count()) + " sub-scores, reply " + r.id +
                                     " has " + std::to_string(r.subscores.size()));
  return sigmoid(affine(d, detector_features(r, d.interactions())));
}

Reply perturb(const Reply& r, double epsilon, Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 0.5)) throw Error(Errc::domain, "perturb: epsilon must lie in [0, 0.5]");
  Reply out = r;
  if (epsilon == 0.0) return out;
  for (double& s : out.subscores) s = std::clamp(s + rng.uniform(-epsilon, epsilon), 0.0, 1.0);
  return out;
}

double auc(std::span<const double> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size()) throw Error(Errc::dimension, "auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Average ranks over tie groups, then apply Mann-Whitney.
  double rank_sum_pos = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == Label::undetectable) {
        rank_sum_pos += avg_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error(Errc::degenerate_corpus, "auc needs both labels");
  const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

DetectorMetrics evaluate_detector(const DetectorModel& d, std::span<const LabeledReply> corpus, double epsilon, Rng& rng) {
  if (corpus.empty()) throw Error(Errc::degenerate_corpus, "evaluation corpus is empty");
  std::vector<double> clean, noisy;
  std::vector<Label> labels;
  std::size_t hits = 0;
  for (const auto& item : corpus) {
    const double s = score(d, item.reply);
    clean.push_back(s);
    labels.push_back(item.label);
    if ((s > 0.5) == (item.label == Label::undetectable)) ++hits;
  }
  for (const auto& item : corpus) noisy.push_back(score(d, perturb(item.reply, epsilon, rng)));
  DetectorMetrics m;
  m.accuracy = static_cast<double>(hits) / static_cast<double>(corpus.size());
  m.auc = auc(clean, labels);
  m.perturbed_auc = auc(noisy, labels);
  m.robustness_drop = m.auc - m.perturbed_auc;
  return m;
}

DetectorModel freeze(DetectorModel d) {
  d.frozen = true;
  return d;
}

void to_json(nlohmann::json& j, const DetectorModel& d) {
  j = nlohmann::json{{"version", d.version},
                     {"frozen", d.frozen},
                     {"feature_names", d.feature_names},
                     {"weights", d.weights},
                     {"bias", d.bias}};
}

void from_json(const nlohmann::json& j, DetectorModel& d) {
  d.version = j.at("version").get<int>();
  d.frozen = j.at("frozen").get<bool>();
  d.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  d.weights = j.at("weights").get<std::vector<double>>();
  d.bias = j.at("bias").get<double>();
  if (d.weights.size() != d.feature_names.size())
    throw Error(Errc::parse, "detector checkpoint: weights and feature names differ in length");
}

void to_json(nlohmann::json& j, const LabeledReply& r) {
  j = nlohmann::json{{"reply", r.reply}, {"label", r.label == Label::undetectable ? "Undetectable" : "Detectable"}};
}

void from_json(const nlohmann::json& j, LabeledReply& r) {
  r.reply = j.at("reply").get<Reply>();
  const auto label = j.at("label").get<std::string>();
  if (label == "Undetectable") r.label = Label::undetectable;
  else if (label == "Detectable") r.label = Label::detectable;
  else throw Error(Errc::parse, "unknown label '" + label + "'");
}

void to_json(nlohmann::json& j, const DetectorMetrics& m) {
  j = nlohmann::json{{"accuracy", m.accuracy},
                     {"auc", m.auc},
                     {"perturbed_auc", m.perturbed_auc},
                     {"robustness_drop", m.robustness_drop}};
}

std::vector<LabeledReply> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open corpus " + path.string());
  std::vector<LabeledReply> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<LabeledReply>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::parse, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_corpus(const std::filesystem::path& path, std::span<const LabeledReply> corpus) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io, "cannot write corpus " + path.string());
  for (const auto& item : corpus) out << nlohmann::json(item).dump() << '\n';
}

}  // namespace dualtest
