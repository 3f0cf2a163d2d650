#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>

#include "dualtest/analytics.hpp"
#include "dualtest/config.hpp"
#include "dualtest/error.hpp"
#include "dualtest/game.hpp"
#include "dualtest/loop.hpp"
#include "dualtest/report.hpp"
#include "dualtest/session.hpp"
#include "dualtest/toy.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace dualtest;
using nlohmann::json;

// Structured values cross the boundary as JSON text; the Python package
// decodes them.

namespace {

QualityWeights weights_or_uniform(const std::optional<std::string>& weights, std::size_t n) {
  if (weights) return json::parse(*weights).get<QualityWeights>();
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) names.push_back("f" + std::to_string(i));
  return QualityWeights::uniform(names);
}

Reply bare(std::string id, std::vector<double> s) { return Reply{std::move(id), "p", std::move(s), 0.0, std::nullopt}; }

GameFile game_from(const std::string& path) {
  const auto doc = read_json(path);
  return doc.contains("rounds") ? parse_game_file(doc) : load_game(parse_config(doc, fs::path(path).parent_path()));
}

}  // namespace

PYBIND11_MODULE(_dualtest, m) {
  static py::exception<Error> error_type(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type.ptr())(e.what());
      exc.attr("code") = std::string(errc_name(e.code()));
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  m.def("quality", [](std::vector<double> subscores, std::optional<std::string> weights) {
    return quality(bare("r", subscores), weights_or_uniform(weights, subscores.size()));
  }, py::arg("subscores"), py::arg("weights_json") = std::nullopt);

  m.def("check_constraints", [](std::vector<double> u, std::vector<double> mach, double tau, double delta,
                                std::optional<std::string> weights) {
    const auto v = check_constraints(bare("u", u), bare("m", mach), {tau, delta}, weights_or_uniform(weights, u.size()));
    return v.ok ? std::string("ok") : to_string(*v.violation);
  }, py::arg("human"), py::arg("machine"), py::arg("tau"), py::arg("delta"), py::arg("weights_json") = std::nullopt);

  m.def("binomial_test", &binomial_test, py::arg("correct"), py::arg("n"), py::arg("p0") = 0.5);

  m.def("config_digest", [](const std::string& doc) { return config_digest(json::parse(doc)); });

  m.def("simulate", [](const std::string& config_path, std::optional<std::uint64_t> seed) {
    auto cfg = load_config(config_path);
    if (seed) {
      auto doc = cfg.document;
      doc["seed"] = *seed;
      cfg = parse_config(doc, cfg.base_dir);
    }
    const auto pc = protocol_config(cfg);
    if (pc.judge.is_human()) throw Error(Errc::configuration, "simulate needs an automatic judge");
    py::gil_scoped_release release;
    return json(run_protocol(pc)).dump();
  }, py::arg("config_path"), py::arg("seed") = std::nullopt);

  m.def("report", [](const std::string& transcript, std::optional<std::string> config_path) {
    const auto t = json::parse(transcript).get<Transcript>();
    return full_report(t, config_path ? report_extras(load_config(*config_path)) : ReportExtras{}).dump();
  }, py::arg("transcript_json"), py::arg("config_path") = std::nullopt);

  m.def("solve", [](const std::string& path, bool mixed) {
    const auto game = game_from(path);
    py::gil_scoped_release release;
    const auto s = build_strategy_set(game.instance);
    const auto r = mixed ? solve_mixed(build_payoff_matrix(game.judges, game.instance, s).payoff)
                         : outer_max(game.judges, game.instance, s);
    auto j = json(r);
    j["alpha"] = game.alpha;
    j["guarantee_met"] = certify_guarantee(r, game.alpha);
    return j.dump();
  }, py::arg("path"), py::arg("mixed") = false);

  m.def("solve_matrix", [](std::vector<std::vector<double>> rows) {
    return json(solve_mixed(Matrix::from_rows(rows))).dump();
  }, py::arg("rows"));

  m.def("alpha_game", [] {
    const auto g = alpha_game();
    auto j = json(outer_max(g.judges, g.instance, build_strategy_set(g.instance)));
    j["alpha"] = g.alpha;
    j["rounds"] = g.instance.rounds.size();
    return j.dump();
  });

  m.def("train_detector", [](const std::string& corpus_path, int epochs, bool interactions) {
    const auto corpus = read_corpus(corpus_path);
    DetectorHyper h;
    h.epochs = epochs;
    h.interactions = interactions;
    py::gil_scoped_release release;
    return json(freeze(train_detector(corpus, h, standard_facets()))).dump();
  }, py::arg("corpus_path"), py::arg("epochs") = 2000, py::arg("interactions") = false);

  m.def("score", [](const std::string& detector, std::vector<double> subscores) {
    return score(json::parse(detector).get<DetectorModel>(), bare("r", subscores));
  }, py::arg("detector_json"), py::arg("subscores"));

  m.def("reward", [](std::vector<double> r, std::vector<double> u, const std::string& detector,
                     std::optional<std::string> cfg, std::optional<std::string> weights) {
    const auto rc = cfg ? json::parse(*cfg).get<RewardConfig>() : RewardConfig{};
    return json(reward(bare("r", r), bare("u", u), json::parse(detector).get<DetectorModel>(), rc,
                       weights_or_uniform(weights, r.size())))
        .dump();
  }, py::arg("reply"), py::arg("reference"), py::arg("detector_json"), py::arg("reward_json") = std::nullopt,
     py::arg("weights_json") = std::nullopt);

  m.def("toy_loop", [](std::uint64_t seed) {
    const auto inst = loop_instance(seed);
    py::gil_scoped_release release;
    const auto run = run_loop(inst.initial_corpus, inst.prompts, uniform_policy(inst.prompts), inst.settings);
    return loop_summary(run).dump();
  }, py::arg("seed") = 1);
}
