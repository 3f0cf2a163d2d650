#include "dualtest/transcript.hpp"

#include "dualtest/error.hpp"

namespace dualtest {

namespace {

const char* base_tag(BasePhase b) {
  switch (b) {
    case BasePhase::general_knowledge: return "I";
    case BasePhase::critical_reasoning: return "II";
    case BasePhase::creative_introspection: return "III";
  }
  return "?";
}

BasePhase parse_base(const std::string& s) {
  if (s == "I") return BasePhase::general_knowledge;
  if (s == "II") return BasePhase::critical_reasoning;
  if (s == "III") return BasePhase::creative_introspection;
  throw Error(Errc::parse, "unknown phase tag '" + s + "'");
}

}  // namespace

Phase Phase::hybrid(BasePhase a, BasePhase b) {
  if (a == b) throw Error(Errc::configuration, "hybrid phase needs two distinct base phases");
  Phase p(a);
  p.second_ = b;
  return p;
}

std::string Phase::tag() const {
  std::string t = base_tag(first_);
  if (second_) {
    t += '+';
    t += base_tag(*second_);
  }
  return t;
}

Phase Phase::parse(const std::string& tag) {
  const auto plus = tag.find('+');
  if (plus == std::string::npos) return Phase(parse_base(tag));
  return hybrid(parse_base(tag.substr(0, plus)), parse_base(tag.substr(plus + 1)));
}

void validate_prompt(const Prompt& p) {
  if (p.human_pool.empty() || p.machine_pool.empty())
    throw Error(Errc::configuration, "prompt " + p.id + ": candidate pools must be non-empty");
  if (p.reference_human >= p.human_pool.size())
    throw Error(Errc::configuration, "prompt " + p.id + ": reference_human out of range");
  for (const auto* pool : {&p.human_pool, &p.machine_pool}) {
    for (const auto& r : *pool) {
      if (r.prompt_id != p.id)
        throw Error(Errc::configuration, "prompt " + p.id + ": reply " + r.id + " carries prompt id " + r.prompt_id);
    }
  }
}

Side side_from_int(int v) {
  if (v == 1) return Side::first;
  if (v == 2) return Side::second;
  throw Error(Errc::domain, "side must be 1 or 2, got " + std::to_string(v));
}

ReplyView make_view(const Reply& r, std::string view_id) { return ReplyView{std::move(view_id), r.subscores, r.text}; }

void to_json(nlohmann::json& j, const Phase& p) { j = p.tag(); }
void from_json(const nlohmann::json& j, Phase& p) { p = Phase::parse(j.get<std::string>()); }

void to_json(nlohmann::json& j, const Prompt& p) {
  j = nlohmann::json{{"id", p.id},
                     {"phase", p.phase},
                     {"human", p.human_pool},
                     {"machine", p.machine_pool},
                     {"reference_human", p.reference_human}};
}

void from_json(const nlohmann::json& j, Prompt& p) {
  p.id = j.at("id").get<std::string>();
  p.phase = j.at("phase").get<Phase>();
  p.human_pool = j.at("human").get<std::vector<Reply>>();
  p.machine_pool = j.at("machine").get<std::vector<Reply>>();
  p.reference_human = j.value("reference_human", std::size_t{0});
  validate_prompt(p);
}

void to_json(nlohmann::json& j, const ReplyView& v) {
  j = nlohmann::json{{"id", v.id}, {"subscores", v.subscores}};
  if (v.text) j["text"] = *v.text;
}

void from_json(const nlohmann::json& j, ReplyView& v) {
  v.id = j.at("id").get<std::string>();
  v.subscores = j.at("subscores").get<std::vector<double>>();
  if (j.contains("text")) v.text = j["text"].get<std::string>();
  else v.text.reset();
}

void to_json(nlohmann::json& j, const Round& r) {
  j = nlohmann::json{{"index", r.index},
                     {"prompt_id", r.prompt_id},
                     {"phase", r.phase},
                     {"presented", nlohmann::json::array({r.presented.first, r.presented.second})},
                     {"hidden_label", to_int(r.hidden_label)},
                     {"quality_u", r.quality_u},
                     {"quality_m", r.quality_m}};
  j["verdict"] = r.verdict ? nlohmann::json(to_int(*r.verdict)) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, Round& r) {
  r.index = j.at("index").get<int>();
  r.prompt_id = j.at("prompt_id").get<std::string>();
  r.phase = j.at("phase").get<Phase>();
  const auto& pres = j.at("presented");
  if (pres.size() != 2) throw Error(Errc::parse, "round: presented must hold two replies");
  r.presented = {pres[0].get<ReplyView>(), pres[1].get<ReplyView>()};
  r.hidden_label = side_from_int(j.at("hidden_label").get<int>());
  if (j.contains("verdict") && !j["verdict"].is_null()) r.verdict = side_from_int(j["verdict"].get<int>());
  else r.verdict.reset();
  r.quality_u = j.at("quality_u").get<double>();
  r.quality_m = j.at("quality_m").get<double>();
  // Only admitted rounds are ever serialised.
  r.constraint_check = ConstraintVerdict::pass();
}

void to_json(nlohmann::json& j, const Transcript& t) {
  nlohmann::json skipped = nlohmann::json::array();
  for (const auto& s : t.skipped)
    skipped.push_back({{"prompt_id", s.prompt_id}, {"phase", s.phase}, {"attempts", s.attempts}});
  j = nlohmann::json{{"seed", t.seed},
                     {"config_digest", t.config_digest},
                     {"phase_boundaries", t.phase_boundaries},
                     {"calibration_boundaries", t.calibration_boundaries},
                     {"rounds", t.rounds},
                     {"skipped", skipped}};
}

void from_json(const nlohmann::json& j, Transcript& t) {
  t.seed = j.at("seed").get<std::uint64_t>();
  t.config_digest = j.at("config_digest").get<std::string>();
  t.phase_boundaries = j.at("phase_boundaries").get<std::vector<int>>();
  t.calibration_boundaries = j.value("calibration_boundaries", std::vector<int>{});
  t.rounds = j.at("rounds").get<std::vector<Round>>();
  t.skipped.clear();
  if (j.contains("skipped")) {
    for (const auto& s : j["skipped"])
      t.skipped.push_back({s.at("prompt_id").get<std::string>(), s.at("phase").get<Phase>(), s.at("attempts").get<int>()});
  }
}

nlohmann::json presentation_payload(const Round& r, int scheduled_total) {
  return nlohmann::json{{"round", r.index},
                        {"phase", r.phase},
                        {"total", scheduled_total},
                        {"pair", nlohmann::json::array({r.presented.first, r.presented.second})}};
}

}  // namespace dualtest
