#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "dualtest/detector.hpp"
#include "dualtest/error.hpp"
#include "fixtures.hpp"
#include "golden.hpp"
#include "oracles.hpp"

using namespace dualtest;

namespace {

// Two facets; label is decided by which side of x0 + x1 = 1 a point falls,
// with a margin of 0.2 kept clear.
std::vector<LabeledReply> separable(Rng& rng, int n) {
  std::vector<LabeledReply> out;
  while (static_cast<int>(out.size()) < n) {
    const double a = rng.uniform01(), b = rng.uniform01();
    const double s = a + b - 1.0;
    if (std::abs(s) < 0.2) continue;
    out.push_back({fx::reply("c" + std::to_string(out.size()), "p", {a, b}),
                   s > 0 ? Label::undetectable : Label::detectable});
  }
  return out;
}

std::vector<double> scores_of(const DetectorModel& d, const std::vector<LabeledReply>& c) {
  std::vector<double> s;
  for (const auto& x : c) s.push_back(score(d, x.reply));
  return s;
}

std::vector<Label> labels_of(const std::vector<LabeledReply>& c) {
  std::vector<Label> l;
  for (const auto& x : c) l.push_back(x.label);
  return l;
}

// Pairwise-count AUC, independent of the rank-based implementation.
double pair_auc(const std::vector<double>& s, const std::vector<Label>& l) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (l[i] == Label::undetectable && l[j] == Label::detectable) {
        den += 1;
        num += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
  return num / den;
}

}  // namespace

TEST_CASE("labelling by stealth") {
  CHECK(label_by_stealth(fx::reply("a", "p", {0.5}, 0.7)).label == Label::undetectable);
  CHECK(label_by_stealth(fx::reply("a", "p", {0.5}, 0.5)).label == Label::undetectable);
  CHECK(label_by_stealth(fx::reply("a", "p", {0.5}, 0.49)).label == Label::detectable);
  CHECK(label_by_stealth(fx::reply("a", "p", {0.5}, 0.3), 0.2).label == Label::undetectable);
}

TEST_CASE("separable corpus is learned") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    const auto corpus = separable(rng, 200);
    DetectorHyper h;
    h.seed = seed;
    const auto d = train_detector(corpus, h);
    Rng eval(seed + 100);
    const auto m = evaluate_detector(d, corpus, 0.0, eval);
    CHECK(m.accuracy >= 0.99);
    CHECK(m.auc >= 0.99);
  }
}

TEST_CASE("indistinguishable labels give chance AUC") {
  Rng rng(8);
  std::vector<LabeledReply> corpus;
  for (int i = 0; i < 400; ++i) {
    const double a = rng.uniform01(), b = rng.uniform01();
    corpus.push_back({fx::reply("c" + std::to_string(i), "p", {a, b}), i % 2 ? Label::undetectable : Label::detectable});
    corpus.push_back({fx::reply("d" + std::to_string(i), "p", {a, b}), i % 2 ? Label::detectable : Label::undetectable});
  }
  const auto d = train_detector(corpus, {});
  Rng eval(9);
  CHECK(std::abs(evaluate_detector(d, corpus, 0.0, eval).auc - 0.5) <= 0.05);
}

TEST_CASE("auc") {
  const std::vector<Label> l{Label::detectable, Label::undetectable, Label::detectable, Label::undetectable};
  CHECK(auc(std::vector<double>{0.1, 0.9, 0.2, 0.8}, l) == 1.0);
  CHECK(auc(std::vector<double>{0.9, 0.1, 0.8, 0.2}, l) == 0.0);
  CHECK(auc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, l) == 0.5);
  CHECK_THROWS_AS(auc(std::vector<double>{0.5}, std::vector<Label>{Label::detectable}), Error);

  SUBCASE("agrees with pair counting and survives monotone transforms") {
    Rng rng(12);
    for (int t = 0; t < 50; ++t) {
      std::vector<double> s;
      std::vector<Label> lab;
      for (int i = 0; i < 40; ++i) {
        s.push_back(std::round(rng.uniform01() * 10) / 10);  // force ties
        lab.push_back(i % 3 == 0 ? Label::undetectable : Label::detectable);
      }
      const double a = auc(s, lab);
      CHECK(a == doctest::Approx(pair_auc(s, lab)).epsilon(1e-12));
      std::vector<double> warped;
      for (double x : s) warped.push_back(std::exp(3 * x) - 7);
      CHECK(auc(warped, lab) == doctest::Approx(a).epsilon(1e-12));
    }
  }
}

TEST_CASE("score") {
  DetectorModel zero;
  zero.feature_names = {"a", "b"};
  zero.weights = {0, 0};
  CHECK(score(zero, fx::reply("r", "p", {0.3, 0.9})) == 0.5);

  DetectorModel d;
  d.feature_names = {"a", "b"};
  d.weights = {1.5, -2.0};
  d.bias = 0.1;
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    const auto r = fx::reply("r", "p", {rng.uniform01(), rng.uniform01()});
    const double z = d.bias + oracle::dot(d.weights, r.subscores);
    CHECK(score(d, r) == doctest::Approx(1.0 / (1.0 + std::exp(-z))).epsilon(1e-14));
    DetectorModel neg = d;
    for (double& w : neg.weights) w = -w;
    neg.bias = -neg.bias;
    CHECK(score(d, r) + score(neg, r) == doctest::Approx(1.0).epsilon(1e-14));
  }
  CHECK_THROWS_AS(score(d, fx::reply("r", "p", {0.1})), Error);
}

TEST_CASE("interaction features") {
  const auto f = detector_features(fx::reply("r", "p", {0.5, 0.4, 0.2}), true);
  CHECK(f.size() == 6);
  CHECK(f[3] == doctest::Approx(0.2));
  CHECK(f[4] == doctest::Approx(0.1));
  CHECK(f[5] == doctest::Approx(0.08));
  CHECK(detector_feature_names({"a", "b", "c"}, true).back() == "b*c");
  CHECK(detector_features(fx::reply("r", "p", {0.5, 0.4}), false).size() == 2);
}

TEST_CASE("perturb") {
  Rng rng(21);
  const auto r = fx::reply("r", "p", {0.5, 0.02, 0.99});
  double shift = 0;
  const int draws = 10000;
  for (int t = 0; t < draws; ++t) {
    const auto p = perturb(r, 0.05, rng);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(p.subscores[i] >= 0.0);
      CHECK(p.subscores[i] <= 1.0);
      CHECK(std::abs(p.subscores[i] - r.subscores[i]) <= 0.05 + 1e-15);
    }
    shift += p.subscores[0] - r.subscores[0];
  }
  CHECK(std::abs(shift / draws) < 0.01);
  CHECK(perturb(r, 0.0, rng).subscores == r.subscores);
  CHECK_THROWS_AS(perturb(r, -0.1, rng), Error);
}

TEST_CASE("training contract") {
  Rng rng(2);
  const auto corpus = separable(rng, 50);
  SUBCASE("single-label corpus") {
    std::vector<LabeledReply> one;
    for (const auto& c : corpus)
      if (c.label == Label::detectable) one.push_back(c);
    try {
      train_detector(one, {});
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::degenerate_corpus);
    }
  }
  SUBCASE("frozen models refuse training, copies keep their state") {
    auto d = train_detector(corpus, {});
    const auto f = freeze(d);
    CHECK(f.frozen);
    CHECK_FALSE(d.frozen);
    auto g = f;
    try {
      train_detector(g, corpus, {});
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::frozen_model);
    }
    CHECK(g.weights == f.weights);
    CHECK_NOTHROW(train_detector(d, corpus, {}));
  }
  SUBCASE("loss decreases") {
    DetectorHyper h;
    h.epochs = 300;
    const auto fit = fit_detector(corpus, h);
    CHECK(fit.loss_history.size() == 301);
    for (std::size_t i = 1; i < fit.loss_history.size(); ++i)
      CHECK(fit.loss_history[i] <= fit.loss_history[i - 1] + 1e-12);
  }
  SUBCASE("same seed, same weights") {
    const auto a = train_detector(corpus, {});
    const auto b = train_detector(corpus, {});
    CHECK(a.weights == b.weights);
    CHECK(a.bias == b.bias);
  }
}

TEST_CASE("trained weights are pinned") {
  Rng rng(77);
  const auto corpus = separable(rng, 100);
  DetectorHyper h;
  h.epochs = 500;
  h.seed = 3;
  const auto d = train_detector(corpus, h, {"a", "b"});
  nlohmann::json j = d;
  for (auto& w : j["weights"]) w = std::round(w.get<double>() * 1e9) / 1e9;
  j["bias"] = std::round(j["bias"].get<double>() * 1e9) / 1e9;
  const std::string text = j.dump(2) + "\n";
  CHECK(text == golden::pinned("detector_weights_seed77.json", text));
}

TEST_CASE("checkpoint JSON round trip") {
  Rng rng(31);
  const auto corpus = separable(rng, 60);
  auto d = freeze(train_detector(corpus, {}, {"a", "b"}));
  d.version = 4;
  const nlohmann::json j = d;
  const auto back = j.get<DetectorModel>();
  CHECK(back.weights == d.weights);
  CHECK(back.bias == d.bias);
  CHECK(back.version == 4);
  CHECK(back.frozen);
  CHECK(back.facet_names() == std::vector<std::string>{"a", "b"});
  CHECK(nlohmann::json(back).dump() == j.dump());

  const auto dir = std::filesystem::temp_directory_path() / "dualtest_detector_test";
  std::filesystem::create_directories(dir);
  write_corpus(dir / "c.jsonl", corpus);
  const auto read = read_corpus(dir / "c.jsonl");
  REQUIRE(read.size() == corpus.size());
  for (std::size_t i = 0; i < read.size(); ++i) {
    CHECK(read[i].reply == corpus[i].reply);
    CHECK(read[i].label == corpus[i].label);
  }
  std::filesystem::remove_all(dir);
}
