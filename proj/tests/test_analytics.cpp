#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dualtest/analytics.hpp"
#include "dualtest/error.hpp"
#include "dualtest/protocol.hpp"
#include "dualtest/report.hpp"
#include "fixtures.hpp"
#include "golden.hpp"
#include "oracles.hpp"

using namespace dualtest;

namespace {

// Appends `n` rounds of `phase`, the first `correct` of them answered right.
void add_rounds(Transcript& t, Phase phase, int n, int correct) {
  t.phase_boundaries.push_back(static_cast<int>(t.rounds.size()) + 1);
  for (int i = 0; i < n; ++i) {
    Round r;
    r.index = static_cast<int>(t.rounds.size()) + 1;
    r.prompt_id = phase.tag() + "-" + std::to_string(i);
    r.phase = phase;
    r.hidden_label = i % 2 ? Side::first : Side::second;
    r.verdict = i < correct ? r.hidden_label : other(r.hidden_label);
    r.constraint_check = ConstraintVerdict::pass();
    r.quality_u = 0.7;
    r.quality_m = 0.68;
    t.rounds.push_back(r);
  }
}

Transcript three_phases(int c1, int c2, int c3, int n = 10) {
  Transcript t;
  t.seed = 5;
  t.config_digest = "digest";
  add_rounds(t, Phase(BasePhase::general_knowledge), n, c1);
  add_rounds(t, Phase(BasePhase::critical_reasoning), n, c2);
  add_rounds(t, Phase(BasePhase::creative_introspection), n, c3);
  return t;
}

}  // namespace

TEST_CASE("binomial_test") {
  CHECK(binomial_test(5, 5, 0.5) == doctest::Approx(0.03125).epsilon(1e-14));
  for (int n : {0, 1, 7, 30}) CHECK(binomial_test(0, n, 0.5) == 1.0);
  CHECK(std::abs(binomial_test(22, 30, 0.5) - static_cast<double>(oracle::binomial_half_tail(22, 30))) <= 1e-12);

  SUBCASE("exact against integer tail counts") {
    for (int n = 1; n <= 64; ++n)
      for (int c = 0; c <= n; ++c)
        CHECK(std::abs(binomial_test(c, n, 0.5) - static_cast<double>(oracle::binomial_half_tail(c, n))) <= 1e-12);
  }
  SUBCASE("monotone in correct") {
    for (double p0 : {0.3, 0.5, 0.8})
      for (int c = 1; c <= 40; ++c) CHECK(binomial_test(c, 40, p0) <= binomial_test(c - 1, 40, p0));
  }
  SUBCASE("pmf sums to one") {
    for (int n = 0; n <= 64; ++n)
      for (double p0 : {0.1, 0.5, 0.77}) {
        double s = 0;
        for (int k = 0; k <= n; ++k) s += std::exp(binomial_log_pmf(k, n, p0));
        CHECK(std::abs(s - 1.0) <= 1e-12);
      }
  }
  SUBCASE("domain") {
    CHECK_THROWS_AS(binomial_test(6, 5, 0.5), Error);
    CHECK_THROWS_AS(binomial_test(-1, 5, 0.5), Error);
    CHECK_THROWS_AS(binomial_test(2, 5, 0.0), Error);
    CHECK_THROWS_AS(binomial_test(2, 5, 1.0), Error);
  }
}

TEST_CASE("phase_report") {
  SUBCASE("perfect phase") {
    const auto r = phase_report(three_phases(10, 5, 5), Phase(BasePhase::general_knowledge));
    CHECK(r.rounds == 10);
    CHECK(r.correct == 10);
    CHECK(r.accuracy == 1.0);
    CHECK(r.p_value == doctest::Approx(std::pow(0.5, 10)).epsilon(1e-14));
    CHECK(r.significant);
    CHECK_FALSE(r.recalibration_triggered);
  }
  SUBCASE("chance performance") {
    const auto t = three_phases(5, 5, 5);
    const auto r = phase_report(t, Phase(BasePhase::general_knowledge));
    CHECK(r.accuracy == 0.5);
    CHECK(r.p_value > 0.05);
    CHECK_FALSE(r.significant);
    CHECK(r.recalibration_triggered);
    CHECK(phase_report(t, Phase(BasePhase::critical_reasoning)).recalibration_triggered);
    CHECK_FALSE(phase_report(t, Phase(BasePhase::creative_introspection)).recalibration_triggered);
  }
  SUBCASE("missing phase") {
    Transcript t;
    add_rounds(t, Phase(BasePhase::general_knowledge), 4, 2);
    try {
      phase_report(t, Phase(BasePhase::critical_reasoning));
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::missing_phase);
    }
  }
  SUBCASE("unanswered round") {
    auto t = three_phases(3, 3, 3, 4);
    t.rounds[1].verdict.reset();
    try {
      phase_report(t, Phase(BasePhase::general_knowledge));
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::incomplete_transcript);
    }
  }
  SUBCASE("recount from a simulated run") {
    Rng rng(13);
    ProtocolConfig cfg;
    cfg.pool = fx::simple_pool(6, rng);
    cfg.weights = fx::two_facets();
    cfg.constraints = {0.5, 0.3};
    cfg.schedule = equal_schedule(18);
    cfg.seed = 3;
    cfg.judge = fx::random_linear_judges(rng, 1, 2)[0];
    const auto t = run_protocol(cfg);
    int all_rounds = 0, all_correct = 0;
    for (const auto& phase : phases_in_order(t)) {
      int n = 0, c = 0;
      for (const auto& r : t.rounds)
        if (r.phase == phase) {
          ++n;
          c += r.verdict == r.hidden_label;
        }
      const auto rep = phase_report(t, phase);
      CHECK(rep.rounds == n);
      CHECK(rep.correct == c);
      CHECK(rep.accuracy == static_cast<double>(c) / n);
      CHECK(rep.p_value == doctest::Approx(static_cast<double>(oracle::binomial_half_tail(c, n))).epsilon(1e-12));
      CHECK(rep.significant == (rep.p_value < 0.05));
      all_rounds += n;
      all_correct += c;
    }
    CHECK(all_rounds == static_cast<int>(t.rounds.size()));
    CHECK(accuracy(t) == static_cast<double>(all_correct) / all_rounds);
  }
}

TEST_CASE("phase accuracies combine to the overall accuracy") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const int n1 = 1 + static_cast<int>(rng.index(12)), n2 = 1 + static_cast<int>(rng.index(12)),
              n3 = 1 + static_cast<int>(rng.index(12));
    Transcript t;
    add_rounds(t, Phase(BasePhase::general_knowledge), n1, static_cast<int>(rng.index(n1 + 1)));
    add_rounds(t, Phase(BasePhase::critical_reasoning), n2, static_cast<int>(rng.index(n2 + 1)));
    add_rounds(t, Phase(BasePhase::creative_introspection), n3, static_cast<int>(rng.index(n3 + 1)));
    int correct = 0;
    for (const auto& phase : phases_in_order(t)) correct += phase_report(t, phase).correct;
    CHECK(accuracy(t) * t.rounds.size() == doctest::Approx(correct).epsilon(1e-12));
  }
}

TEST_CASE("full_report") {
  const auto t = three_phases(9, 7, 5);
  SUBCASE("transcript only") {
    const auto doc = full_report(t);
    CHECK(doc["phases"].size() == 3);
    CHECK(doc["overall"]["rounds"] == 30);
    CHECK(doc["overall"]["correct"] == 21);
    CHECK(doc["overall"]["accuracy"].get<double>() == doctest::Approx(0.7));
    CHECK_FALSE(doc.contains("minimax"));
  }
  SUBCASE("certification line") {
    ReportExtras x;
    MinimaxResult m;
    m.value = 0.75;
    x.minimax = m;
    x.alpha = 0.70;
    CHECK(full_report(t, x)["minimax"]["certification"] == "guarantee met");
    m.value = 0.65;
    x.minimax = m;
    CHECK(full_report(t, x)["minimax"]["certification"] == "guarantee not met");
  }
  SUBCASE("byte-identical and pinned") {
    ReportExtras x;
    MinimaxResult m;
    m.value = 0.75;
    x.minimax = m;
    x.loop = nlohmann::json{{"converged", true}, {"iterations", 3}, {"final_expected_detectability", 0.125}};
    const auto a = full_report(t, x).dump(2) + "\n";
    CHECK(a == full_report(t, x).dump(2) + "\n");
    CHECK(a == golden::pinned("report_three_phases.json", a));
    const auto text = report_text(full_report(t, x));
    CHECK(text.find("guarantee met") != std::string::npos);
    CHECK(text.find("converged=yes") != std::string::npos);
  }
  SUBCASE("rounds csv") {
    const auto csv = rounds_csv(t);
    CHECK(csv.rfind("index,prompt_id,phase,hidden_label,verdict,correct,quality_u,quality_m\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 31);
  }
}
