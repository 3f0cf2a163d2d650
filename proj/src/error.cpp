#include "dualtest/error.hpp"

namespace dualtest {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::dimension: return "dimension_error";
    case Errc::configuration: return "configuration_error";
    case Errc::protocol: return "protocol_error";
    case Errc::rejected_round: return "rejected_round";
    case Errc::exhaustion: return "exhaustion_error";
    case Errc::infeasible_round: return "infeasible_round";
    case Errc::incomplete_transcript: return "incomplete_transcript";
    case Errc::infeasible_instance: return "infeasible_instance";
    case Errc::unsupported_judge: return "unsupported_judge";
    case Errc::size: return "size_error";
    case Errc::degenerate_corpus: return "degenerate_corpus";
    case Errc::frozen_model: return "frozen_model";
    case Errc::contract: return "contract_error";
    case Errc::missing_policy: return "missing_policy";
    case Errc::domain: return "domain_error";
    case Errc::missing_phase: return "missing_phase";
    case Errc::sequencing: return "sequencing_error";
    case Errc::session_complete: return "session_complete";
    case Errc::not_ready: return "not_ready";
    case Errc::not_found: return "not_found";
    case Errc::parse: return "parse_error";
    case Errc::io: return "io_error";
  }
  return "error";
}

}  // namespace dualtest
