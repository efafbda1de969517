#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "fixtures.hpp"
#include "mfsim/config.hpp"
#include "mfsim/engine.hpp"
#include "mfsim/json_io.hpp"

using namespace mfsim;
using nlohmann::json;

namespace {

// Runs the CLI with stdout/stderr sent to files in `dir`; returns the exit code.
int run(const mfsim::testing::TempDir& dir, const std::string& args) {
  const std::string cmd = std::string(MFSIM_CLI_PATH) + " " + args + " >" + (dir / "stdout").string() +
                          " 2>" + (dir / "stderr").string();
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

// Synthetic corpus, oracle params and a toy config in a fresh directory.
struct ToySetup {
  mfsim::testing::TempDir dir;
  std::filesystem::path corpus = dir / "syn.jsonl";
  std::filesystem::path config = dir / "toy.json";

  ToySetup() {
    REQUIRE(run(dir, "gen-synthetic --events 2 --steps 12 --agents 8 --seed 5 --out " + q(corpus) +
                         " --oracle " + q(dir / "oracle.json")) == 0);
    const json c{{"simulation", {{"horizon", 12}, {"batch_size", 8}, {"seed", 2}}},
                 {"policy_backend", {{"kind", "toy"}, {"params", "oracle.json"}}},
                 {"mean_field_backend", {{"kind", "toy"}, {"params", "oracle.json"}}}};
    write_text_file(config, c.dump(2));
  }
};

}  // namespace

TEST_CASE("gen-synthetic writes a corpus and the oracle params") {
  ToySetup s;
  const auto corpus = load_corpus(s.corpus);
  CHECK(corpus.events.size() == 2);
  CHECK(corpus.events[0].timeline.size() == 12 * 8);
  const auto params = read_json_file(s.dir / "oracle.json").get<ToyModelParams>();
  CHECK(params.actions == 4);
}

TEST_CASE("simulate on a replay config reproduces the event") {
  ToySetup s;
  const auto cfg = s.dir / "replay.json";
  write_text_file(cfg, R"({"simulation": {"horizon": 12, "batch_size": 8, "warmup_steps": 12}})");
  REQUIRE(run(s.dir, "--config " + q(cfg) + " simulate --event " + q(s.corpus) + " --out " + q(s.dir / "t.jsonl")) == 0);
  const auto t = read_trajectory(s.dir / "t.jsonl");
  const auto corpus = load_corpus(s.corpus);
  const auto& ev = corpus.events[0];
  CHECK(serialize_steps(t) == serialize_steps(ground_truth_trajectory(ev, 8, 12)));
  std::size_t k = 0;
  for (const auto& step : t.steps) {
    for (const auto& a : step.actions) CHECK(a.text == ev.timeline[k++].action.text);
  }
}

TEST_CASE("evaluate a trajectory against itself") {
  ToySetup s;
  REQUIRE(run(s.dir, "--config " + q(s.config) + " simulate --event " + q(s.corpus) + " --out " + q(s.dir / "g.jsonl")) == 0);
  const auto g = q(s.dir / "g.jsonl");
  REQUIRE(run(s.dir, "evaluate --real " + g + " --gen " + g + " --out " + q(s.dir / "r.json")) == 0);
  const auto r = read_json_file(s.dir / "r.json");
  CHECK(r.at("aggregate").at("kl").get<double>() == doctest::Approx(0.0).scale(1.0));
  CHECK(r.at("aggregate").at("macro_f1").get<double>() == doctest::Approx(1.0));
  CHECK(r.at("aggregate").at("micro_f1").get<double>() == doctest::Approx(1.0));

  // Against the ground truth, with the toy policy's NLL and a series file.
  const auto real = s.dir / "real.jsonl";
  const auto cfg = s.dir / "replay.json";
  write_text_file(cfg, R"({"simulation": {"horizon": 12, "batch_size": 8, "warmup_steps": 12}})");
  REQUIRE(run(s.dir, "--config " + q(cfg) + " simulate --event " + q(s.corpus) + " --out " + q(real)) == 0);
  REQUIRE(run(s.dir, "--config " + q(s.config) + " evaluate --real " + q(real) + " --gen " + g + " --csv --emit-series " +
                         q(s.dir / "series.csv")) == 0);
  const auto csv = slurp(s.dir / "stdout");
  CHECK(csv.starts_with("dimension,metric,value\n"));
  CHECK(csv.find("aggregate,nll,") != std::string::npos);
  CHECK(slurp(s.dir / "series.csv").starts_with("step,dimension,label,real,generated\n"));
}

TEST_CASE("train-toy is byte-identical across runs") {
  ToySetup s;
  const std::string args = "--seed 1 train-toy --corpus " + q(s.corpus) + " --mode full_ibtune --iterations 20 --out ";
  REQUIRE(run(s.dir, args + q(s.dir / "a.json")) == 0);
  REQUIRE(run(s.dir, args + q(s.dir / "b.json") + " --curves " + q(s.dir / "curves.csv")) == 0);
  CHECK(slurp(s.dir / "a.json") == slurp(s.dir / "b.json"));
  CHECK(slurp(s.dir / "curves.csv").starts_with("iteration,meanfield_loss,policy_loss\n"));
  REQUIRE(run(s.dir, args + q(s.dir / "c.json") + " --parallel") == 0);
  CHECK(slurp(s.dir / "a.json") == slurp(s.dir / "c.json"));
}

TEST_CASE("intervene seeds agents at the fork step") {
  ToySetup s;
  const auto sched = s.dir / "schedule.json";
  write_text_file(sched, R"([{"step": 6, "kind": "seed_agents", "actions": ["act:1"], "count": 3}])");
  REQUIRE(run(s.dir, "--config " + q(s.config) + " intervene --event " + q(s.corpus) + " --from-step 6 --schedule " +
                         q(sched) + " --out " + q(s.dir / "i.jsonl")) == 0);
  const auto t = read_trajectory(s.dir / "i.jsonl");
  CHECK(t.fork_step == std::optional<std::size_t>(6));
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(t.steps[6].actions[i].text == "act:1");
    CHECK(t.steps[6].actions[i].provenance == Provenance::injected);
  }
  CHECK(t.steps[6].actions[3].provenance == Provenance::ground_truth);

  // forecast from that trajectory keeps its prefix.
  REQUIRE(run(s.dir, "--config " + q(s.config) + " forecast --event " + q(s.corpus) + " --from-step 8 --parent " +
                         q(s.dir / "i.jsonl") + " --out " + q(s.dir / "f.jsonl")) == 0);
  const auto f = read_trajectory(s.dir / "f.jsonl");
  for (std::size_t k = 0; k <= 8; ++k) CHECK(f.steps[k] == t.steps[k]);
}

TEST_CASE("exit codes") {
  ToySetup s;
  CHECK(run(s.dir, "simulate --event " + q(s.corpus) + " --bogus") == 1);
  CHECK(slurp(s.dir / "stderr").find("error") != std::string::npos);
  CHECK(run(s.dir, "simulate --event " + q(s.dir / "missing.jsonl")) == 1);
  CHECK(run(s.dir, "intervene --event " + q(s.corpus)) == 1);
  CHECK(run(s.dir, "--help") == 0);
  CHECK(run(s.dir, "--config " + q(s.config) + " simulate --event " + q(s.corpus) + " --event-id nope") == 2);
  CHECK(slurp(s.dir / "stderr").find("nope") != std::string::npos);
  CHECK(run(s.dir, "train-toy --corpus " + q(s.corpus) + " --mode sideways") == 1);
  // A text corpus has no toy symbols to train on.
  Corpus text;
  text.events.push_back(mfsim::testing::text_event(32));
  write_text_file(s.dir / "text.jsonl", serialize_corpus(text));
  CHECK(run(s.dir, "train-toy --corpus " + q(s.dir / "text.jsonl")) == 2);
}
