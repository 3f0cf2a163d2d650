#pragma once

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "dualtest/analytics.hpp"
#include "dualtest/game.hpp"
#include "dualtest/transcript.hpp"

namespace dualtest {

struct ReportExtras {
  std::optional<MinimaxResult> minimax;
  double alpha = 0.70;
  /// Summary document of an adversarial loop run.
  std::optional<nlohmann::json> loop;
  AnalyticsOptions analytics;
};

/// Overall accuracy, one report per phase present, and the optional minimax
/// certification and loop summary. Deterministic in its inputs.
nlohmann::json full_report(const Transcript& t, const ReportExtras& extras = {});

/// Plain-text table rendering of a full_report document.
std::string report_text(const nlohmann::json& report);

/// Per-round records: index,prompt_id,phase,hidden_label,verdict,correct,quality_u,quality_m.
std::string rounds_csv(const Transcript& t);

}  // namespace dualtest
