#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dualtest {

enum class Errc {
  dimension,
  configuration,
  protocol,
  rejected_round,
  exhaustion,
  infeasible_round,
  incomplete_transcript,
  infeasible_instance,
  unsupported_judge,
  size,
  degenerate_corpus,
  frozen_model,
  contract,
  missing_policy,
  domain,
  missing_phase,
  sequencing,
  session_complete,
  not_ready,
  not_found,
  parse,
  io,
};

/// Stable snake_case name used in wire-level error bodies {code, message}.
std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace dualtest
