// mfsim command-line entry point.
//
//   mfsim simulate      --event corpus.jsonl [--event-id ID] --config c.json --out t.jsonl
//   mfsim evaluate      --real r.jsonl --gen g.jsonl [--judge mock|remote] [--emit-series s.csv]
//   mfsim forecast      --event corpus.jsonl --from-step S [--parent p.jsonl] --out t.jsonl
//   mfsim intervene     --event corpus.jsonl --from-step S --schedule s.json --out t.jsonl
//   mfsim train-toy     --corpus syn.jsonl --mode full_ibtune --out params.json
//   mfsim gen-synthetic --events 60 --steps 30 --agents 16 --out syn.jsonl
//   mfsim serve         --corpus corpus.jsonl --run-dir runs --port 8080
//
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <httplib.h>

#include "mfsim/config.hpp"
#include "mfsim/corpus.hpp"
#include "mfsim/engine.hpp"
#include "mfsim/ibtune.hpp"
#include "mfsim/json_io.hpp"
#include "mfsim/metrics.hpp"
#include "mfsim/service.hpp"

namespace fs = std::filesystem;
using namespace mfsim;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool verbose = false;
};

struct SimArgs {
  std::string corpus;
  std::string event_id;
  std::string schedule;
  std::string parent;
  std::optional<std::size_t> from_step;
  std::optional<std::size_t> horizon;
  std::optional<std::size_t> warmup;
  std::optional<std::size_t> batch_size;
  std::string strategy;
  std::optional<std::size_t> fanout;
};

struct EvalArgs {
  std::string real;
  std::string gen;
  std::string judge = "mock";
  std::size_t window = kDefaultWindow;
  std::optional<std::size_t> from_step;
  bool csv = false;
  std::string series;
};

struct TrainArgs {
  std::string corpus;
  std::string mode = "full_ibtune";
  IBHyper hyper;
  bool parallel = false;
  std::string curves;
};

struct GenArgs {
  std::size_t events = 10;
  std::size_t steps = 50;
  std::size_t agents = 16;
  SyntheticGenConfig::SelfExciting shape;
  std::string oracle;
};

struct ServeArgs {
  std::string corpus;
  std::string run_dir = "runs";
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t workers = 2;
};

class Log {
 public:
  explicit Log(bool on) : on_(on) {}
  void operator()(const std::string& line) const {
    if (on_) std::cerr << "mfsim: " << line << '\n';
  }

 private:
  bool on_;
};

AppConfig load_config(const Globals& g) {
  AppConfig c = g.config.empty() ? AppConfig{} : AppConfig::load(g.config);
  if (g.seed) c.simulation.seed = *g.seed;
  return c;
}

void write_output(const Globals& g, const std::string& text) {
  if (g.out.empty() || g.out == "-") {
    std::cout << text;
  } else {
    write_text_file(g.out, text);
  }
}

const Event& pick_event(const Corpus& corpus, const std::string& id) {
  if (corpus.events.empty()) throw ArgumentError("corpus has no events");
  return id.empty() ? corpus.events.front() : corpus.find(id);
}

SimulationConfig sim_config(const AppConfig& app, const SimArgs& a) {
  SimulationConfig c = app.simulation;
  if (a.horizon) c.horizon = *a.horizon;
  if (a.warmup) c.warmup_steps = *a.warmup;
  if (a.batch_size) c.batch_size = *a.batch_size;
  if (!a.strategy.empty()) c.strategy = parse_enum<ContextStrategy>(a.strategy, "context strategy");
  return c;
}

int run_simulate(const Globals& g, const SimArgs& a, bool fork, bool needs_schedule) {
  const Log log(g.verbose);
  const auto app = load_config(g);
  const auto corpus = load_corpus(a.corpus);
  const auto& ev = pick_event(corpus, a.event_id);
  const auto cfg = sim_config(app, a);
  const auto backends = make_backends(app);
  InterventionSchedule schedule;
  if (!a.schedule.empty()) schedule = load_schedule(a.schedule);
  if (needs_schedule && schedule.empty()) throw ArgumentError("intervene needs a non-empty --schedule");
  RunOptions opts;
  opts.fanout = a.fanout.value_or(app.fanout);

  Trajectory t;
  if (fork) {
    std::optional<Trajectory> parent;
    if (!a.parent.empty()) parent = read_trajectory(a.parent);
    t = fork_trajectory(ev, parent ? &*parent : nullptr, *a.from_step, cfg, backends, schedule, opts);
  } else {
    t = run_simulation(ev, cfg, backends, schedule, opts);
  }
  write_output(g, serialize_trajectory(t));
  log("event " + ev.event_id + ": " + std::to_string(t.steps.size()) + " steps written to " +
      (g.out.empty() ? std::string("stdout") : g.out));
  return 0;
}

DimensionSchema eval_schema(const AppConfig& app, const Trajectory& real, const Trajectory& gen) {
  if (!app.schema.is_null()) return resolve_schema(app, real);
  const auto r = default_schema(real);
  const auto s = default_schema(gen);
  if (r == DimensionSchema::standard() || s == DimensionSchema::standard()) return DimensionSchema::standard();
  return r.dimensions[0].labels.size() >= s.dimensions[0].labels.size() ? r : s;
}

int run_evaluate(const Globals& g, const EvalArgs& a) {
  const Log log(g.verbose);
  auto app = load_config(g);
  const auto real = read_trajectory(a.real);
  const auto gen = read_trajectory(a.gen);
  if (a.judge == "mock") app.judge = {{"kind", "mock"}};
  if (a.judge == "remote" && app.judge.value("kind", std::string("mock")) != "remote") {
    throw ArgumentError("--judge remote needs a remote \"judge\" section in --config");
  }
  const auto judge = make_judge(app.judge, app.base_dir, app.simulation.seed);
  const auto schema = eval_schema(app, real, gen);
  const auto backends = make_backends(app);

  EvalOptions opts;
  opts.window = a.window;
  opts.first_step = a.from_step;
  // A pure replay has nothing past its warm-up; compare it from the first step.
  const bool replay = gen.config.effective_warmup() + 1 >= gen.steps.size();
  if (!opts.first_step && replay) opts.first_step = 0;
  const auto ev = evaluate(real, gen, *judge, schema, replay ? nullptr : backends.policy.get(), opts);
  auto report = ev.report;
  report.label = fs::path(a.gen).stem().string();

  write_output(g, a.csv ? report.to_csv() : report.to_json().dump(2) + "\n");
  if (!a.series.empty()) write_text_file(a.series, series_csv(ev, schema));
  log("evaluated " + std::to_string(report.steps) + " steps from step " + std::to_string(report.first_step) +
      ", kl " + std::to_string(report.aggregate.kl));
  return 0;
}

int run_train(const Globals& g, TrainArgs a) {
  const Log log(g.verbose);
  if (g.seed) a.hyper.seed = *g.seed;
  a.hyper.exec = a.parallel ? Exec::parallel : Exec::serial;
  const auto corpus = load_corpus(a.corpus);
  const auto mode = parse_enum<TrainMode>(a.mode, "training mode");
  const auto result = train_toy(corpus, a.hyper, mode);
  write_output(g, nlohmann::json(result.params).dump() + "\n");
  if (!a.curves.empty()) write_text_file(a.curves, result.curves.to_csv());
  log(a.mode + ": final policy loss " + std::to_string(result.curves.policy_loss.back()));
  return 0;
}

int run_gen(const Globals& g, const GenArgs& a) {
  const Log log(g.verbose);
  const auto cfg = SyntheticGenConfig::self_exciting(a.events, a.steps, a.agents, g.seed.value_or(0), a.shape);
  const auto syn = generate_synthetic(cfg);
  write_output(g, serialize_corpus(syn.corpus));
  if (!a.oracle.empty()) write_text_file(a.oracle, nlohmann::json(oracle_params(cfg)).dump() + "\n");
  log("generated " + std::to_string(syn.corpus.events.size()) + " events");
  return 0;
}

int run_serve(const Globals& g, const ServeArgs& a) {
  const Log log(g.verbose);
  auto app = load_config(g);
  Service service(load_corpus(a.corpus), std::move(app), ServiceOptions{a.run_dir, a.workers});
  httplib::Server server;
  log("serving on http://" + a.host + ":" + std::to_string(a.port));
  serve(service, server, a.host, a.port);
  return 0;
}

void add_sim_options(CLI::App* cmd, SimArgs& a, bool fork) {
  cmd->add_option("--event", a.corpus, "Corpus JSONL holding the event")->required()->check(CLI::ExistingFile);
  cmd->add_option("--event-id", a.event_id, "Event to simulate (default: the first)");
  cmd->add_option("--horizon", a.horizon, "Number of steps T");
  cmd->add_option("--batch-size", a.batch_size, "Agents per step");
  cmd->add_option("--strategy", a.strategy, "Context strategy")
      ->check(CLI::IsMember({"mean_field", "state_only", "recent_k", "popular_k", "sft"}));
  cmd->add_option("--fanout", a.fanout, "Parallel policy calls per step")->check(CLI::PositiveNumber);
  if (fork) {
    cmd->add_option("--from-step", a.from_step, "Fork step; earlier steps are replayed")->required();
    cmd->add_option("--parent", a.parent, "Trajectory to replay the prefix from (default: ground truth)")
        ->check(CLI::ExistingFile);
  } else {
    cmd->add_option("--warmup", a.warmup, "Warm-up steps (default ceil(0.2 T))");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-field population simulator and evaluation harness", "mfsim"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Seed (overrides the config file)");
  app.add_option("--out", g.out, "Output path (default: stdout)");
  app.add_flag("-v,--verbose", g.verbose, "Progress on stderr");

  SimArgs sim, fc, iv;
  auto* simulate = app.add_subcommand("simulate", "Run one event from its warm-up to the horizon");
  add_sim_options(simulate, sim, false);
  simulate->add_option("--schedule", sim.schedule, "Intervention schedule JSON")->check(CLI::ExistingFile);

  auto* forecast = app.add_subcommand("forecast", "Fork from an observed prefix and generate the rest");
  add_sim_options(forecast, fc, true);

  auto* intervene = app.add_subcommand("intervene", "Fork with an intervention schedule");
  add_sim_options(intervene, iv, true);
  intervene->add_option("--schedule", iv.schedule, "Intervention schedule JSON")->required()->check(CLI::ExistingFile);

  EvalArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Compare a generated trajectory with a real one");
  evaluate->add_option("--real", ev.real, "Reference trajectory JSONL")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--gen", ev.gen, "Generated trajectory JSONL")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--judge", ev.judge, "Action classifier")->check(CLI::IsMember({"mock", "remote"}));
  evaluate->add_option("--window", ev.window, "Window length w")->check(CLI::PositiveNumber);
  evaluate->add_option("--from-step", ev.from_step, "First evaluated step (default: after warm-up)");
  evaluate->add_flag("--csv", ev.csv, "Write the report as CSV");
  evaluate->add_option("--emit-series", ev.series, "Write per-label proportion series CSV here");

  TrainArgs tr;
  auto* train = app.add_subcommand("train-toy", "Train the toy policy and mean-field models");
  train->add_option("--corpus", tr.corpus, "Synthetic corpus JSONL")->required()->check(CLI::ExistingFile);
  train->add_option("--mode", tr.mode, "Training arm")
      ->check(CLI::IsMember({"full_ibtune", "policy_only_sft", "no_meanfield"}));
  train->add_option("--beta", tr.hyper.beta, "Weight of the predictive term");
  train->add_option("--lr", tr.hyper.learning_rate, "Gradient step size");
  train->add_option("--iterations", tr.hyper.iterations, "Full-batch iterations");
  train->add_option("--batch-size", tr.hyper.batch_size, "Agents per step");
  train->add_option("--mean-fields", tr.hyper.mean_fields, "Mean-field alphabet size");
  train->add_option("--init-scale", tr.hyper.init_scale, "Std-dev of the initial logits");
  train->add_flag("--parallel", tr.parallel, "Use the OpenMP gradient kernels");
  train->add_option("--curves", tr.curves, "Write loss curves CSV here");

  GenArgs gen;
  auto* synth = app.add_subcommand("gen-synthetic", "Generate a self-exciting synthetic corpus");
  synth->add_option("--events", gen.events, "Number of events")->check(CLI::PositiveNumber);
  synth->add_option("--steps", gen.steps, "Steps per event")->check(CLI::PositiveNumber);
  synth->add_option("--agents", gen.agents, "Agents per step")->check(CLI::PositiveNumber);
  synth->add_option("--decay", gen.shape.decay, "Chance of dropping to low intensity");
  synth->add_option("--volatility", gen.shape.volatility, "Chance of a uniform latent jump");
  synth->add_option("--oracle", gen.oracle, "Write the generator's own toy params here");

  ServeArgs sv;
  auto* srv = app.add_subcommand("serve", "HTTP service for runs, forks and metrics");
  srv->add_option("--corpus", sv.corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  srv->add_option("--run-dir", sv.run_dir, "Run store directory");
  srv->add_option("--host", sv.host, "Bind address");
  srv->add_option("--port", sv.port, "Port")->check(CLI::Range(1, 65535));
  srv->add_option("--workers", sv.workers, "Concurrent runs")->check(CLI::PositiveNumber);

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*simulate) return run_simulate(g, sim, false, false);
    if (*forecast) return run_simulate(g, fc, true, false);
    if (*intervene) return run_simulate(g, iv, true, true);
    if (*evaluate) return run_evaluate(g, ev);
    if (*train) return run_train(g, tr);
    if (*synth) return run_gen(g, gen);
    if (*srv) return run_serve(g, sv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
