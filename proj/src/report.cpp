#include "dualtest/report.hpp"

#include <cstdio>
#include <sstream>

#include "dualtest/protocol.hpp"

namespace dualtest {

nlohmann::json full_report(const Transcript& t, const ReportExtras& extras) {
  std::vector<Round> all = t.rounds;
  const auto overall = summarize_rounds(all, Phase(), extras.analytics);

  nlohmann::json phases = nlohmann::json::array();
  for (const auto& phase : phases_in_order(t)) phases.push_back(phase_report(t, phase, extras.analytics));

  nlohmann::json doc{{"seed", t.seed},
                     {"config_digest", t.config_digest},
                     {"overall",
                      {{"rounds", overall.rounds},
                       {"correct", overall.correct},
                       {"accuracy", accuracy(t)},
                       {"p_value", overall.p_value},
                       {"significant", overall.significant}}},
                     {"phases", phases},
                     {"significance_level", extras.analytics.significance},
                     {"skipped_rounds", t.skipped.size()},
                     {"calibration_inserted", !t.calibration_boundaries.empty()}};
  if (extras.minimax) {
    const bool met = certify_guarantee(*extras.minimax, extras.alpha);
    doc["minimax"] = {{"value", extras.minimax->value},
                      {"mode", extras.minimax->mode == SolveMode::pure ? "pure" : "mixed"},
                      {"alpha", extras.alpha},
                      {"guarantee_met", met},
                      {"certification", met ? "guarantee met" : "guarantee not met"}};
  }
  if (extras.loop) doc["loop"] = *extras.loop;
  return doc;
}

std::string report_text(const nlohmann::json& report) {
  std::ostringstream os;
  char line[160];
  const auto& o = report.at("overall");
  std::snprintf(line, sizeof line, "overall  rounds=%d correct=%d accuracy=%.4f p=%.6g %s\n", o.at("rounds").get<int>(),
                o.at("correct").get<int>(), o.at("accuracy").get<double>(), o.at("p_value").get<double>(),
                o.at("significant").get<bool>() ? "significant" : "not significant");
  os << line;
  os << "phase     rounds  correct  accuracy   p_value      sig  recal  calib\n";
  for (const auto& p : report.at("phases")) {
    std::snprintf(line, sizeof line, "%-8s  %6d  %7d  %8.4f  %10.6g  %5s  %5s  %5s\n",
                  p.at("phase").get<std::string>().c_str(), p.at("rounds").get<int>(), p.at("correct").get<int>(),
                  p.at("accuracy").get<double>(), p.at("p_value").get<double>(),
                  p.at("significant").get<bool>() ? "yes" : "no",
                  p.at("recalibration_triggered").get<bool>() ? "yes" : "no",
                  p.at("calibration_inserted").get<bool>() ? "yes" : "no");
    os << line;
  }
  if (report.contains("minimax")) {
    const auto& m = report["minimax"];
    std::snprintf(line, sizeof line, "minimax  value=%.4f alpha=%.2f (%s): %s\n", m.at("value").get<double>(),
                  m.at("alpha").get<double>(), m.at("mode").get<std::string>().c_str(),
                  m.at("certification").get<std::string>().c_str());
    os << line;
  }
  if (report.contains("loop")) {
    const auto& l = report["loop"];
    std::snprintf(line, sizeof line, "loop     converged=%s iterations=%d final_expected_detectability=%.4f\n",
                  l.value("converged", false) ? "yes" : "no", l.value("iterations", 0),
                  l.value("final_expected_detectability", 0.0));
    os << line;
  }
  return os.str();
}

std::string rounds_csv(const Transcript& t) {
  std::ostringstream os;
  os.precision(17);
  os << "index,prompt_id,phase,hidden_label,verdict,correct,quality_u,quality_m\n";
  for (const auto& r : t.rounds) {
    os << r.index << ',' << r.prompt_id << ',' << r.phase.tag() << ',' << to_int(r.hidden_label) << ',';
    if (r.verdict) os << to_int(*r.verdict);
    os << ',' << (r.correct() ? 1 : 0) << ',' << r.quality_u << ',' << r.quality_m << '\n';
  }
  return os.str();
}

}  // namespace dualtest
