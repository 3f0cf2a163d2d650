#include "dualtest/judge.hpp"

#include "dualtest/error.hpp"

namespace dualtest {

std::string oracle_key(const Reply& first, const Reply& second) { return first.id + "|" + second.id; }

Side judge_verdict(const JudgeStrategy& judge, const Reply& first, const Reply& second) {
  if (const auto* lin = std::get_if<LinearJudge>(&judge.kind)) {
    if (lin->weights.size() != first.subscores.size() || lin->weights.size() != second.subscores.size())
      throw Error(Errc::dimension, "linear judge " + judge.id + ": weight length differs from facet count");
    double s = lin->bias;
    for (std::size_t i = 0; i < lin->weights.size(); ++i)
      s += lin->weights[i] * (first.subscores[i] - second.subscores[i]);
    return s >= 0.0 ? lin->positive_picks : other(lin->positive_picks);
  }
  if (const auto* orc = std::get_if<OracleJudge>(&judge.kind)) {
    const auto it = orc->verdicts.find(oracle_key(first, second));
    return it == orc->verdicts.end() ? orc->fallback : it->second;
  }
  throw Error(Errc::unsupported_judge, "judge " + judge.id + " is human; verdicts must come from a session");
}

void validate_judge(const JudgeStrategy& judge, std::size_t facet_count) {
  if (const auto* lin = std::get_if<LinearJudge>(&judge.kind)) {
    if (lin->weights.size() != facet_count)
      throw Error(Errc::configuration, "linear judge " + judge.id + ": weight length differs from facet count");
  }
}

JudgeStrategy constant_oracle(Side verdict, std::string id) {
  return JudgeStrategy{std::move(id), OracleJudge{{}, verdict}};
}

JudgeStrategy truthful_oracle(std::span<const Prompt> pool, std::string id) {
  OracleJudge o;
  for (const auto& p : pool) {
    for (const auto& h : p.human_pool) {
      for (const auto& m : p.machine_pool) {
        o.verdicts[oracle_key(h, m)] = Side::first;
        o.verdicts[oracle_key(m, h)] = Side::second;
      }
    }
  }
  return JudgeStrategy{std::move(id), std::move(o)};
}

std::vector<JudgeStrategy> linear_grid(std::size_t facet_count, std::span<const double> values, double bias,
                                       Side positive_picks) {
  std::vector<JudgeStrategy> out;
  if (facet_count == 0 || values.empty()) return out;
  std::vector<std::size_t> digit(facet_count, 0);
  for (;;) {
    LinearJudge lin{std::vector<double>(facet_count), bias, positive_picks};
    std::string id = "grid";
    for (std::size_t i = 0; i < facet_count; ++i) {
      lin.weights[i] = values[digit[i]];
      id += "-" + std::to_string(digit[i]);
    }
    out.push_back(JudgeStrategy{std::move(id), std::move(lin)});
    std::size_t pos = facet_count;
    while (pos > 0) {
      --pos;
      if (++digit[pos] < values.size()) break;
      digit[pos] = 0;
      if (pos == 0) return out;
    }
  }
}

void to_json(nlohmann::json& j, const JudgeStrategy& s) {
  if (const auto* lin = std::get_if<LinearJudge>(&s.kind)) {
    j = nlohmann::json{{"id", s.id},
                       {"kind", "linear"},
                       {"weights", lin->weights},
                       {"bias", lin->bias},
                       {"positive_picks", to_int(lin->positive_picks)}};
  } else if (const auto* orc = std::get_if<OracleJudge>(&s.kind)) {
    nlohmann::json verdicts = nlohmann::json::object();
    for (const auto& [k, v] : orc->verdicts) verdicts[k] = to_int(v);
    j = nlohmann::json{{"id", s.id}, {"kind", "oracle"}, {"verdicts", verdicts}, {"default", to_int(orc->fallback)}};
  } else {
    j = nlohmann::json{{"id", s.id}, {"kind", "human"}};
  }
}

void from_json(const nlohmann::json& j, JudgeStrategy& s) {
  s.id = j.value("id", std::string{"judge"});
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "linear") {
    LinearJudge lin;
    lin.weights = j.at("weights").get<std::vector<double>>();
    lin.bias = j.value("bias", 0.0);
    lin.positive_picks = side_from_int(j.value("positive_picks", 1));
    s.kind = std::move(lin);
  } else if (kind == "oracle") {
    OracleJudge o;
    o.fallback = side_from_int(j.value("default", 1));
    if (j.contains("verdicts")) {
      for (const auto& [k, v] : j["verdicts"].items()) o.verdicts[k] = side_from_int(v.get<int>());
    }
    s.kind = std::move(o);
  } else if (kind == "human") {
    s.kind = HumanJudge{};
  } else {
    throw Error(Errc::parse, "unknown judge kind '" + kind + "'");
  }
}

}  // namespace dualtest
