// dualtest command-line driver.
#include <csignal>
#include <cstdio>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dualtest/config.hpp"
#include "dualtest/report.hpp"
#include "dualtest/server.hpp"
#include "dualtest/session.hpp"
#include "dualtest/toy.hpp"

using namespace dualtest;
namespace fs = std::filesystem;

namespace {

void emit(const std::optional<std::string>& out, const std::string& text) {
  if (out) write_file(*out, text);
  else std::cout << text;
}

ExperimentConfig with_seed(ExperimentConfig cfg, std::optional<std::uint64_t> seed) {
  if (!seed) return cfg;
  auto doc = cfg.document;
  doc["seed"] = *seed;
  return parse_config(doc, cfg.base_dir);
}

struct SimulateArgs {
  std::string config;
  std::optional<std::string> out, rounds_csv;
  std::optional<std::uint64_t> seed;
};

int simulate(const SimulateArgs& a) {
  const auto cfg = with_seed(load_config(a.config), a.seed);
  const auto pcfg = protocol_config(cfg);
  if (pcfg.judge.is_human()) throw Error(Errc::configuration, "simulate needs an automatic judge; use serve for humans");
  const auto t = run_protocol(pcfg);
  emit(a.out, nlohmann::json(t).dump(2) + "\n");
  if (a.rounds_csv) write_file(*a.rounds_csv, rounds_csv(t));
  if (a.out) std::cerr << "wrote " << t.rounds.size() << " rounds to " << *a.out << "\n";
  return 0;
}

struct SolveArgs {
  std::string config;
  bool mixed = false;
  std::optional<double> alpha;
  std::optional<std::string> out;
};

int solve(const SolveArgs& a) {
  GameFile game;
  const auto doc = [&] {
    try {
      return read_json(a.config);
    } catch (const Error& e) {
      throw Error(Errc::configuration, e.what());
    }
  }();
  try {
    game = doc.contains("rounds") ? parse_game_file(doc) : load_game(parse_config(doc, fs::path(a.config).parent_path()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::configuration, e.what());
  }
  if (game.judges.empty()) throw Error(Errc::configuration, "game has an empty judge family");
  const double alpha = a.alpha.value_or(game.alpha);
  const auto s = build_strategy_set(game.instance);
  MinimaxResult r;
  if (a.mixed) {
    r = solve_mixed(build_payoff_matrix(game.judges, game.instance, s).payoff);
  } else {
    r = outer_max(game.judges, game.instance, s);
  }
  const bool met = certify_guarantee(r, alpha);
  char line[64];
  std::snprintf(line, sizeof line, "%.6f", r.value);
  std::cout << "value " << line << "\n";
  std::cout << "mode " << (r.mode == SolveMode::pure ? "pure" : "mixed") << "\n";
  if (r.best_judge) std::cout << "best_judge " << r.best_judge->id << "\n";
  if (r.mode == SolveMode::mixed) {
    std::snprintf(line, sizeof line, "%.6f %.6f", r.lower, r.upper);
    std::cout << "bounds " << line << (r.converged ? "" : " (not converged)") << "\n";
  }
  std::snprintf(line, sizeof line, "%.2f", alpha);
  std::cout << "certification " << (met ? "guarantee met" : "guarantee not met") << " at alpha " << line << "\n";
  if (a.out) {
    auto j = nlohmann::json(r);
    j["alpha"] = alpha;
    j["guarantee_met"] = met;
    write_file(*a.out, j.dump(2) + "\n");
  }
  return 0;
}

struct TrainArgs {
  std::optional<std::string> config, corpus;
  std::string out;
  std::optional<int> epochs;
  bool interactions = false;
};

int train(const TrainArgs& a) {
  ExperimentConfig cfg;
  if (a.config) cfg = load_config(*a.config);
  std::optional<fs::path> corpus_path = a.corpus ? std::optional<fs::path>(*a.corpus) : cfg.corpus;
  if (!corpus_path) throw Error(Errc::configuration, "no training corpus given");
  const auto corpus = read_corpus(*corpus_path);
  auto hyper = cfg.detector;
  if (a.epochs) hyper.epochs = *a.epochs;
  if (a.interactions) hyper.interactions = true;
  if (!corpus.empty() && corpus.front().reply.subscores.size() != cfg.weights.facet_count())
    throw Error(Errc::configuration, "corpus sub-score count differs from the configured facets");
  const auto model = freeze(train_detector(corpus, hyper, cfg.weights.facet_names()));
  Rng rng(hyper.seed);
  const auto metrics = evaluate_detector(model, corpus, cfg.epsilon, rng);
  write_file(a.out, nlohmann::json(model).dump(2) + "\n");
  std::cout << nlohmann::json(metrics).dump(2) << "\n";
  return 0;
}

DetectorModel load_detector(const std::string& path) {
  return freeze(read_json(path).get<DetectorModel>());
}

struct AlignArgs {
  std::string config, detector, out;
  std::optional<std::string> history;
  std::optional<int> iterations;
};

int align(const AlignArgs& a) {
  const auto cfg = load_config(a.config);
  if (cfg.pool.empty()) throw Error(Errc::configuration, "config has no prompt pool");
  const auto d = load_detector(a.detector);
  auto policy = uniform_policy(cfg.pool, cfg.policy_defaults.step_size, cfg.policy_defaults.baseline);
  policy.max_logit_step = cfg.policy_defaults.max_logit_step;
  auto sched = cfg.finetune;
  if (a.iterations) sched.iterations = *a.iterations;
  const auto result = finetune(std::move(policy), cfg.pool, d, cfg.reward, cfg.weights, sched);
  write_file(a.out, nlohmann::json(result.policy).dump(2) + "\n");
  if (a.history) write_file(*a.history, history_csv(result.history));
  const auto& first = result.history.front();
  const auto& last = result.history.back();
  std::cout << nlohmann::json{{"iterations", sched.iterations},
                              {"initial_expected_reward", first.mean_reward},
                              {"final_expected_reward", last.mean_reward},
                              {"initial_expected_detectability", first.mean_detectability},
                              {"final_expected_detectability", last.mean_detectability}}
                   .dump(2)
            << "\n";
  return 0;
}

struct LoopArgs {
  std::optional<std::string> config;
  bool toy = false;
  std::uint64_t seed = 1;
  std::string out;
};

int loop(const LoopArgs& a) {
  LoopSettings st;
  std::vector<Prompt> prompts;
  std::vector<LabeledReply> corpus;
  if (a.config) {
    const auto cfg = load_config(*a.config);
    st.reward = cfg.reward;
    st.weights = cfg.weights;
    st.detector = cfg.detector;
    st.finetune = cfg.finetune;
    st.loop = cfg.loop;
    st.seed = cfg.seed;
    prompts = cfg.pool;
    if (!cfg.corpus) throw Error(Errc::configuration, "loop needs detector.corpus in the config");
    corpus = read_corpus(*cfg.corpus);
  } else if (a.toy) {
    auto inst = loop_instance(a.seed);
    prompts = std::move(inst.prompts);
    corpus = std::move(inst.initial_corpus);
    st = inst.settings;
  } else {
    throw Error(Errc::configuration, "loop needs --config or --toy");
  }
  if (prompts.empty()) throw Error(Errc::configuration, "loop has no prompts");
  const auto run = run_loop(corpus, prompts, uniform_policy(prompts), st);
  write_run_directory(run, a.out);
  std::cout << loop_summary(run).dump(2) << "\n";
  return 0;
}

struct ReportArgs {
  std::string transcript;
  std::optional<std::string> config, loop, out;
  bool game = false;
  std::string format = "json";
};

int report(const ReportArgs& a) {
  const auto t = [&] {
    try {
      return read_json(a.transcript).get<Transcript>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::parse, a.transcript + ": " + e.what());
    }
  }();
  ReportExtras extras;
  if (a.config) {
    const auto cfg = load_config(*a.config);
    extras = report_extras(cfg);
    if (a.game) {
      const auto g = load_game(cfg);
      extras.minimax = outer_max(g.judges, g.instance, build_strategy_set(g.instance));
    }
  } else if (a.game) {
    throw Error(Errc::configuration, "--game needs --config");
  }
  if (a.loop) extras.loop = read_json(*a.loop);
  const auto doc = full_report(t, extras);
  if (a.format == "json") emit(a.out, doc.dump(2) + "\n");
  else if (a.format == "text") emit(a.out, report_text(doc));
  else emit(a.out, rounds_csv(t));
  return 0;
}

struct ServeArgs {
  std::string config, state = "sessions", host = "127.0.0.1";
  std::optional<int> port;
};

SessionServer* g_server = nullptr;

int serve(const ServeArgs& a) {
  const auto cfg = load_config(a.config);
  SessionService service(a.state);
  SessionServer server(service, cfg);
  const int port = resolve_port(a.port);
  const int bound = server.bind(a.host, port);
  if (bound < 0) throw Error(Errc::io, "cannot bind " + a.host + ":" + std::to_string(port));
  std::cerr << "listening on " << a.host << ":" << bound << " (" << service.size() << " sessions restored)\n";
  g_server = &server;
  std::signal(SIGINT, [](int) { if (g_server) g_server->stop(); });
  std::signal(SIGTERM, [](int) { if (g_server) g_server->stop(); });
  server.listen();
  g_server = nullptr;
  return 0;
}

struct GenPoolArgs {
  std::string out;
  std::optional<std::string> corpus;
  GenPoolOptions pool;
  GenCorpusOptions corp;
};

int gen_pool(const GenPoolArgs& a) {
  const auto pool = generate_pool(a.pool);
  write_pool(a.out, pool);
  std::cerr << "wrote " << pool.size() << " prompts to " << a.out << "\n";
  if (a.corpus) {
    auto opts = a.corp;
    opts.seed = a.pool.seed;
    const auto c = generate_corpus(opts);
    write_corpus(*a.corpus, c);
    std::cerr << "wrote " << c.size() << " labelled replies to " << *a.corpus << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual Turing test toolkit: protocol simulation, minimax solving, detector training, alignment and sessions"};
  app.require_subcommand(1);
  std::function<int()> run;

  SimulateArgs sim;
  auto* c = app.add_subcommand("simulate", "Run the three-phase protocol with an automatic judge");
  c->add_option("--config", sim.config, "Experiment config JSON")->required();
  c->add_option("--out", sim.out, "Transcript JSON (stdout when omitted)");
  c->add_option("--rounds-csv", sim.rounds_csv, "Per-round CSV");
  c->add_option("--seed", sim.seed, "Override the config seed");
  c->callback([&] { run = [&] { return simulate(sim); }; });

  SolveArgs sol;
  c = app.add_subcommand("solve", "Compute the minimax detection value of a game instance");
  c->add_option("--config", sol.config, "Game file, or experiment config naming one")->required();
  c->add_flag("--mixed", sol.mixed, "Solve over mixed judge strategies");
  c->add_option("--alpha", sol.alpha, "Guarantee threshold");
  c->add_option("--out", sol.out, "Result JSON");
  c->callback([&] { run = [&] { return solve(sol); }; });

  TrainArgs tr;
  c = app.add_subcommand("train-detector", "Train the logistic stealth detector");
  c->add_option("--config", tr.config, "Experiment config JSON");
  c->add_option("--corpus", tr.corpus, "Labelled corpus JSONL");
  c->add_option("--out", tr.out, "Detector checkpoint JSON")->required();
  c->add_option("--epochs", tr.epochs);
  c->add_flag("--interactions", tr.interactions, "Add pairwise sub-score products");
  c->callback([&] { run = [&] { return train(tr); }; });

  AlignArgs al;
  c = app.add_subcommand("align", "Fine-tune the candidate policy against a frozen detector");
  c->add_option("--config", al.config, "Experiment config JSON")->required();
  c->add_option("--detector", al.detector, "Detector checkpoint JSON")->required();
  c->add_option("--out", al.out, "Policy JSON")->required();
  c->add_option("--history", al.history, "Reward history CSV");
  c->add_option("--iterations", al.iterations);
  c->callback([&] { run = [&] { return align(al); }; });

  LoopArgs lp;
  c = app.add_subcommand("loop", "Run the adversarial train/fine-tune/red-team loop");
  auto* lcfg = c->add_option("--config", lp.config, "Experiment config JSON");
  c->add_flag("--toy", lp.toy, "Use the built-in toy instance")->excludes(lcfg);
  c->add_option("--seed", lp.seed, "Seed for --toy");
  c->add_option("--out", lp.out, "Run directory")->required();
  c->callback([&] { run = [&] { return loop(lp); }; });

  ReportArgs rp;
  c = app.add_subcommand("report", "Analyse a transcript");
  c->add_option("--transcript", rp.transcript, "Transcript JSON")->required();
  c->add_option("--config", rp.config, "Experiment config JSON (alpha, significance, game)");
  c->add_flag("--game", rp.game, "Include the minimax certification of the config's game");
  c->add_option("--loop", rp.loop, "Loop summary JSON to embed");
  c->add_option("--format", rp.format)->check(CLI::IsMember({"json", "text", "csv"}));
  c->add_option("--out", rp.out);
  c->callback([&] { run = [&] { return report(rp); }; });

  ServeArgs sv;
  c = app.add_subcommand("serve", "Serve live human-judge sessions over HTTP");
  c->add_option("--config", sv.config, "Experiment config with a human judge")->required();
  c->add_option("--state", sv.state, "Session state directory");
  c->add_option("--host", sv.host);
  c->add_option("--port", sv.port, "Listen port (default DUALTEST_PORT or 8080)");
  c->callback([&] { run = [&] { return serve(sv); }; });

  GenPoolArgs gp;
  c = app.add_subcommand("gen-pool", "Synthesize a prompt/candidate pool");
  c->add_option("--out", gp.out, "Pool JSONL")->required();
  c->add_option("--prompts-per-phase", gp.pool.prompts_per_phase);
  c->add_option("--human", gp.pool.human_per_prompt, "Human replies per prompt");
  c->add_option("--machine", gp.pool.machine_per_prompt, "Machine replies per prompt");
  c->add_option("--stealthy", gp.pool.stealthy_fraction, "Fraction of stealthy machine replies")->check(CLI::Range(0.0, 1.0));
  c->add_option("--seed", gp.pool.seed);
  c->add_option("--corpus", gp.corpus, "Also write a labelled detector corpus JSONL");
  c->add_option("--corpus-plain", gp.corp.plain);
  c->add_option("--corpus-stealth-a", gp.corp.stealth_a);
  c->add_option("--corpus-stealth-b", gp.corp.stealth_b);
  c->callback([&] { run = [&] { return gen_pool(gp); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    return run();
  } catch (const Error& e) {
    std::cerr << "error [" << errc_name(e.code()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
