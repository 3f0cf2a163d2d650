#include <doctest.h>

#include "dualtest/error.hpp"
#include "dualtest/quality.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace dualtest;

TEST_CASE("normalize_subscores scales and clamps") {
  const QualityWeights one({"x"}, {1.0}, {{0.0, 1.0}});
  CHECK(normalize_subscores(std::vector<double>{0.5}, one)[0] == doctest::Approx(0.5));
  const QualityWeights ten({"x"}, {1.0}, {{0.0, 10.0}});
  CHECK(normalize_subscores(std::vector<double>{5.0}, ten)[0] == doctest::Approx(0.5));
  CHECK(normalize_subscores(std::vector<double>{12.0}, ten)[0] == 1.0);
  CHECK(normalize_subscores(std::vector<double>{-3.0}, ten)[0] == 0.0);

  SUBCASE("length mismatch is a dimension error") {
    try {
      normalize_subscores(std::vector<double>{1.0, 2.0}, ten);
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::dimension);
    }
  }
  SUBCASE("degenerate bounds are rejected") {
    try {
      QualityWeights({"x"}, {1.0}, {{1.0, 1.0}});
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::configuration);
    }
  }
  SUBCASE("idempotent on normalised input with unit bounds") {
    Rng rng(3);
    const QualityWeights w;
    for (int t = 0; t < 50; ++t) {
      std::vector<double> v(6);
      for (double& x : v) x = rng.uniform01();
      const auto once = normalize_subscores(v, w);
      CHECK(normalize_subscores(once, w) == once);
    }
  }
}

TEST_CASE("quality is the weighted mean") {
  const auto w = fx::two_facets();
  CHECK(quality(fx::reply("r", "p", {0.8, 0.6}), w) == doctest::Approx(0.7).epsilon(1e-15));
  const QualityWeights skew({"a", "b", "c"}, {0.2, 0.3, 0.5}, {{0, 1}, {0, 1}, {0, 1}});
  CHECK(quality(fx::reply("r", "p", {1, 1, 1}), skew) == doctest::Approx(1.0).epsilon(1e-15));

  SUBCASE("matches the dot-product oracle on random replies") {
    Rng rng(11);
    for (int t = 0; t < 100; ++t) {
      std::vector<double> raw(6);
      double sum = 0;
      for (double& x : raw) sum += x = rng.uniform(0.01, 1.0);
      for (double& x : raw) x /= sum;
      const QualityWeights w6(standard_facets(), raw, std::vector<FacetBounds>(6));
      Reply r = fx::reply("r", "p", std::vector<double>(6));
      for (double& x : r.subscores) x = rng.uniform01();
      CHECK(std::abs(quality(r, w6) - oracle::dot(raw, r.subscores)) <= 1e-12);
    }
  }
  SUBCASE("monotone and bounded") {
    Rng rng(5);
    const QualityWeights w6;
    for (int t = 0; t < 200; ++t) {
      Reply r = fx::reply("r", "p", std::vector<double>(6));
      for (double& x : r.subscores) x = rng.uniform01();
      const double before = quality(r, w6);
      CHECK(before >= 0.0);
      CHECK(before <= 1.0);
      auto& s = r.subscores[rng.index(6)];
      s = std::min(1.0, s + rng.uniform01() * 0.3);
      CHECK(quality(r, w6) >= before);
    }
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(quality(fx::reply("r", "p", {0.1}), w), Error);
  }
}

TEST_CASE("weights must be non-negative and sum to one") {
  CHECK_THROWS_AS(QualityWeights({"a", "b"}, {0.7, 0.4}, {{0, 1}, {0, 1}}), Error);
  CHECK_THROWS_AS(QualityWeights({"a", "b"}, {1.2, -0.2}, {{0, 1}, {0, 1}}), Error);
  CHECK_NOTHROW(QualityWeights({"a", "b"}, {0.3, 0.7 + 1e-12}, {{0, 1}, {0, 1}}));
}

namespace {

ConstraintVerdict check_q(double qu, double qm, double tau, double delta) {
  const QualityWeights w({"x"}, {1.0}, {{0, 1}});
  return check_constraints(fx::reply("u", "p", {qu}), fx::reply("m", "p", {qm}), {tau, delta}, w);
}

}  // namespace

TEST_CASE("check_constraints reports the first violation") {
  CHECK(check_q(0.80, 0.75, 0.7, 0.1).ok);
  CHECK(check_q(0.80, 0.65, 0.7, 0.2) == ConstraintVerdict::fail(Violation::min_quality_machine));
  CHECK(check_q(0.95, 0.75, 0.7, 0.1) == ConstraintVerdict::fail(Violation::quality_gap));
  CHECK(check_q(0.60, 0.50, 0.7, 0.01) == ConstraintVerdict::fail(Violation::min_quality_human));
  CHECK(to_string(Violation::quality_gap) == "QualityGap");

  SUBCASE("prompt mismatch is a protocol error") {
    const auto w = fx::two_facets();
    try {
      check_constraints(fx::reply("u", "p1", {1, 1}), fx::reply("m", "p2", {1, 1}), {}, w);
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::protocol);
    }
  }
  SUBCASE("gap outcome is symmetric under swapping") {
    Rng rng(9);
    for (int t = 0; t < 500; ++t) {
      const double a = rng.uniform01(), b = rng.uniform01();
      const double tau = rng.uniform01() * 0.5, delta = rng.uniform01() * 0.5;
      const auto fwd = check_q(a, b, tau, delta), rev = check_q(b, a, tau, delta);
      const bool both_clear = a >= tau && b >= tau;
      if (both_clear) CHECK(fwd.ok == rev.ok);
      CHECK((fwd.violation == Violation::quality_gap) == (rev.violation == Violation::quality_gap));
    }
  }
}

TEST_CASE("constraint set validation") {
  CHECK_THROWS_AS(validate_constraints({-0.1, 0.5}), Error);
  CHECK_THROWS_AS(validate_constraints({0.5, 1.5}), Error);
  CHECK_NOTHROW(validate_constraints({0.0, 1.0}));
}

TEST_CASE("reply validation and JSON round trip") {
  CHECK_THROWS_AS(validate_reply(fx::reply("r", "p", {1.2})), Error);
  CHECK_THROWS_AS(validate_reply(fx::reply("r", "p", {0.2}, 1.5)), Error);
  Reply r = fx::reply("r1", "p1", {0.25, 0.5}, 0.75);
  r.text = "hello";
  const auto j = nlohmann::json(r);
  CHECK(j.get<Reply>() == r);
  CHECK(nlohmann::json(j.get<Reply>()).dump() == j.dump());

  const QualityWeights w({"a", "b"}, {0.25, 0.75}, {{0, 2}, {1, 3}});
  const auto wj = nlohmann::json(w);
  CHECK(nlohmann::json(wj.get<QualityWeights>()).dump() == wj.dump());
}
