#include "dualtest/config.hpp"

#include <fstream>
#include <memory>
#include <sstream>

#include <openssl/evp.h>

#include "dualtest/error.hpp"

namespace dualtest {

std::string sha256_hex(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 || EVP_DigestFinal_ex(ctx.get(), md, &len) != 1)
    throw Error(Errc::io, "sha256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

std::vector<Prompt> read_pool(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open pool " + path.string());
  std::vector<Prompt> pool;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto p = nlohmann::json::parse(line).get<Prompt>();
      validate_prompt(p);
      pool.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::parse, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return pool;
}

void write_pool(const std::filesystem::path& path, std::span<const Prompt> pool) {
  std::ostringstream os;
  for (const auto& p : pool) os << nlohmann::json(p).dump() << '\n';
  write_file(path, os.str());
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse, path.string() + ": " + e.what());
  }
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << text;
}

std::string config_digest(const nlohmann::json& doc) { return sha256_hex(doc.dump()); }

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::filesystem::path existing(const std::filesystem::path& base, const nlohmann::json& j, const char* what) {
  auto p = resolve(base, j.get<std::string>());
  if (!std::filesystem::exists(p)) throw Error(Errc::configuration, std::string(what) + " file not found: " + p.string());
  return p;
}

PhaseSchedule parse_schedule(const nlohmann::json& proto) {
  if (proto.contains("schedule")) {
    PhaseSchedule s;
    for (const auto& b : proto["schedule"]) {
      ScheduleBlock block{b.at("phase").get<Phase>(), b.at("rounds").get<int>()};
      if (block.rounds <= 0) throw Error(Errc::configuration, "schedule blocks need a positive round count");
      s.push_back(block);
    }
    if (s.empty()) throw Error(Errc::configuration, "empty schedule");
    return s;
  }
  return equal_schedule(proto.value("rounds", 30));
}

void parse_sections(ExperimentConfig& c, const nlohmann::json& doc) {
  c.seed = doc.value("seed", std::uint64_t{0});
  if (doc.contains("quality")) c.weights = doc["quality"].get<QualityWeights>();
  if (doc.contains("constraints")) c.constraints = doc["constraints"].get<ConstraintSet>();
  validate_constraints(c.constraints);

  const auto proto = doc.value("protocol", nlohmann::json::object());
  c.schedule = parse_schedule(proto);
  c.retry_bound = proto.value("retry_bound", 8);
  c.max_skips = proto.value("max_skips", 64);
  c.recalibration.threshold = proto.value("recalibration_threshold", 0.80);
  c.recalibration.extra_rounds = proto.value("recalibration_rounds", 5);
  c.recalibration.enable_hybrid = proto.value("hybrid", false);
  if (c.retry_bound <= 0 || c.max_skips < 0 || c.recalibration.extra_rounds < 0)
    throw Error(Errc::configuration, "protocol: retry_bound must be positive, skips and recalibration rounds non-negative");
  if (!(c.recalibration.threshold >= 0.0 && c.recalibration.threshold <= 1.0))
    throw Error(Errc::configuration, "protocol: recalibration_threshold must lie in [0,1]");

  c.judge_spec = doc.value("judge", nlohmann::json{{"kind", "human"}});
  if (doc.contains("judges") || doc.contains("judge_grid")) c.judge_family = parse_judge_family(doc, c.weights.facet_count());

  if (doc.contains("pool")) c.pool = read_pool(existing(c.base_dir, doc["pool"], "pool"));
  make_judge(c);  // reject a malformed judge spec at load time

  if (doc.contains("responder")) {
    const auto& r = doc["responder"];
    c.responder.kind = r.value("kind", std::string{"uniform"});
    if (c.responder.kind == "policy") {
      if (!r.contains("policy")) throw Error(Errc::configuration, "policy responder needs a policy file");
      c.responder.policy = existing(c.base_dir, r["policy"], "policy");
    } else if (c.responder.kind != "uniform" && c.responder.kind != "first") {
      throw Error(Errc::configuration, "unknown responder kind '" + c.responder.kind + "'");
    }
  }

  c.reward.constraints = c.constraints;
  if (doc.contains("reward")) {
    auto r = doc["reward"];
    if (!r.contains("constraints")) r["constraints"] = c.constraints;
    c.reward = r.get<RewardConfig>();
  }

  const auto det = doc.value("detector", nlohmann::json::object());
  c.detector.learning_rate = det.value("learning_rate", 0.5);
  c.detector.epochs = det.value("epochs", 2000);
  c.detector.l2 = det.value("l2", 1e-4);
  c.detector.seed = det.value("seed", std::uint64_t{1});
  c.detector.interactions = det.value("interactions", false);
  c.stealth_threshold = det.value("stealth_threshold", 0.5);
  c.epsilon = det.value("epsilon", 0.05);
  if (det.contains("corpus")) c.corpus = existing(c.base_dir, det["corpus"], "corpus");
  if (c.detector.learning_rate <= 0.0 || c.detector.epochs < 0 || c.detector.l2 < 0.0)
    throw Error(Errc::configuration, "detector: learning_rate must be positive, epochs and l2 non-negative");
  if (!(c.epsilon >= 0.0 && c.epsilon <= 0.5)) throw Error(Errc::configuration, "detector: epsilon must lie in [0,0.5]");

  const auto al = doc.value("align", nlohmann::json::object());
  c.finetune.iterations = al.value("iterations", 200);
  c.finetune.batch_size = al.value("batch_size", 16);
  c.finetune.seed = al.value("seed", std::uint64_t{1});
  nlohmann::json pol{{"logits", nlohmann::json::object()},
                     {"step_size", al.value("step_size", 0.5)},
                     {"baseline", al.value("baseline", std::string{"batch_mean"})},
                     {"max_logit_step", al.value("max_logit_step", 1.0)}};
  c.policy_defaults = pol.get<PolicyModel>();
  if (c.finetune.iterations < 0 || c.finetune.batch_size <= 0 || c.policy_defaults.step_size <= 0.0)
    throw Error(Errc::configuration, "align: iterations non-negative, batch_size and step_size positive");

  c.loop = doc.value("loop", nlohmann::json::object()).get<LoopConfig>();

  c.alpha = doc.value("alpha", 0.70);
  c.analytics.significance = doc.value("significance", 0.05);
  c.analytics.recalibration_threshold = c.recalibration.threshold;
  if (doc.contains("game")) c.game = existing(c.base_dir, doc["game"], "game");
}

}  // namespace

ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw Error(Errc::configuration, "config must be a JSON object");
  ExperimentConfig c;
  c.document = doc;
  c.base_dir = base_dir;
  c.digest = config_digest(doc);
  try {
    parse_sections(c, doc);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::configuration, std::string("config: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::configuration) throw;
    throw Error(Errc::configuration, e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = read_json(path);
  } catch (const Error& e) {
    throw Error(Errc::configuration, e.what());
  }
  return parse_config(doc, path.parent_path());
}

JudgeStrategy make_judge(const ExperimentConfig& cfg) {
  const auto& spec = cfg.judge_spec;
  JudgeStrategy j;
  try {
    if (spec.value("kind", std::string{}) == "oracle" && spec.value("truthful", false))
      j = truthful_oracle(cfg.pool, spec.value("id", std::string{"truthful"}));
    else
      j = spec.get<JudgeStrategy>();
    validate_judge(j, cfg.weights.facet_count());
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::configuration, std::string("judge: ") + e.what());
  } catch (const Error& e) {
    throw Error(Errc::configuration, std::string("judge: ") + e.what());
  }
  return j;
}

MachineResponder make_responder(const ExperimentConfig& cfg) {
  if (cfg.responder.kind == "first") return fixed_responder(0);
  if (cfg.responder.kind == "policy") return policy_responder(read_json(*cfg.responder.policy).get<PolicyModel>());
  return uniform_responder();
}

ProtocolConfig protocol_config(const ExperimentConfig& cfg) {
  if (cfg.pool.empty()) throw Error(Errc::configuration, "config has no prompt pool");
  ProtocolConfig p;
  p.schedule = cfg.schedule;
  p.constraints = cfg.constraints;
  p.weights = cfg.weights;
  p.judge = make_judge(cfg);
  p.pool = cfg.pool;
  p.responder = make_responder(cfg);
  p.seed = cfg.seed;
  p.retry_bound = cfg.retry_bound;
  p.max_skips = cfg.max_skips;
  p.recalibration = cfg.recalibration;
  p.config_digest = cfg.digest;
  return p;
}

GameFile load_game(const ExperimentConfig& cfg) {
  if (cfg.game) return parse_game_file(read_json(*cfg.game));
  // inline game section
  if (cfg.document.contains("rounds")) return parse_game_file(cfg.document);
  throw Error(Errc::configuration, "config names no game instance");
}

}  // namespace dualtest
