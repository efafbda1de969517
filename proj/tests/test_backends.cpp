#include <doctest.h>

#include <cmath>

#include "mfsim/backends.hpp"

using namespace mfsim;

namespace {

std::shared_ptr<ToyModelParams> uniform(std::size_t s, std::size_t a, std::size_t m) {
  return std::make_shared<ToyModelParams>(ToyModelParams::zeros(s, a, m));
}

}  // namespace

TEST_CASE("uniform toy policy samples every action equally") {
  auto p = uniform(1, 4, 1);
  std::array<int, 4> counts{};
  const int n = 40000;
  const std::vector<int> cond{0, 0};
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(toy_sample(*p, ToyHead::policy, cond, derive_seed(1, 0, static_cast<std::uint64_t>(i), SeedStream::policy), 1.0))];
  for (int c : counts) CHECK(std::abs(static_cast<double>(c) / n - 0.25) <= 0.01);
}

TEST_CASE("a dominant logit always wins") {
  auto p = uniform(1, 3, 1);
  p->policy_logits[2] = 50.0;
  const std::vector<int> cond{0, 0};
  for (std::uint64_t s = 0; s < 1000; ++s) CHECK(toy_sample(*p, ToyHead::policy, cond, s, 1.0) == 2);
}

TEST_CASE("temperature 0 breaks ties toward the lower index") {
  auto p = uniform(1, 4, 1);
  p->policy_logits[1] = 2.0;
  p->policy_logits[3] = 2.0;
  CHECK(toy_sample(*p, ToyHead::policy, std::vector<int>{0, 0}, 99, 0.0) == 1);
}

TEST_CASE("toy log-probabilities") {
  auto p = uniform(1, 4, 1);
  const std::vector<int> cond{0, 0};
  for (int a = 0; a < 4; ++a) CHECK(toy_logprob(*p, ToyHead::policy, cond, a) == doctest::Approx(-std::log(4.0)));

  auto two = uniform(1, 2, 1);
  two->policy_logits[0] = 1.0;
  CHECK(toy_logprob(*two, ToyHead::policy, cond, 0) == doctest::Approx(-std::log(1.0 + std::exp(-1.0))).epsilon(1e-12));
  CHECK(toy_logprob(*two, ToyHead::policy, cond, 0) == doctest::Approx(-0.3133).epsilon(1e-4));

  const auto r = ToyModelParams::random(3, 5, 4, 17, 2.0);
  for (int s = 0; s < 3; ++s) {
    for (int m = 0; m < 4; ++m) {
      double total = 0.0;
      for (int a = 0; a < 5; ++a) total += std::exp(toy_logprob(r, ToyHead::policy, std::vector<int>{s, m}, a));
      CHECK(std::abs(total - 1.0) < 1e-10);
    }
  }
  CHECK_THROWS_AS(toy_logprob(r, ToyHead::policy, std::vector<int>{3, 0}, 0), ArgumentError);
  CHECK_THROWS_AS(toy_logprob(r, ToyHead::mean_field, std::vector<int>{0, 5}, 0), ArgumentError);
}

TEST_CASE("ToyBackend speaks the toy codec") {
  auto p = std::make_shared<ToyModelParams>(ToyModelParams::random(2, 3, 4, 5, 1.0));
  ToyBackend pol(p, ToyHead::policy);
  ToyBackend mf(p, ToyHead::mean_field);
  GenerationRequest req;
  req.condition = {1, 2};
  CHECK(toy::parse_action(pol.generate(req, 3, 1.0)).has_value());
  CHECK(toy::parse_mean_field(mf.generate(req, 3, 1.0)).has_value());
  CHECK(pol.generate(req, 3, 1.0) == pol.generate(req, 3, 1.0));
  CHECK(*pol.logprob("act:1", req) == doctest::Approx(toy_logprob(*p, ToyHead::policy, req.condition, 1)));
  CHECK(std::isinf(*pol.logprob("nonsense", req)));
  CHECK(pol.capabilities().supports_logprob);
  CHECK(pol.capabilities().symbolic);
}

TEST_CASE("ScriptedBackend replays its table") {
  ScriptedBackend b(std::map<std::string, std::string>{{"p1", "r1"}});
  GenerationRequest req;
  req.prompt.text = "p1";
  CHECK(b.generate(req, 0, 1.0) == "r1");
  req.prompt.text = "p2";
  CHECK_THROWS_AS(b.generate(req, 0, 1.0), ReplayMissError);
  CHECK(b.prompts().size() == 2);
  CHECK_FALSE(b.logprob("r1", req).has_value());
  CHECK(ScriptedBackend::constant("x")->generate(req, 0, 1.0) == "x");
}

TEST_CASE("params JSON round-trips and validates") {
  const auto p = ToyModelParams::random(2, 3, 4, 8, 1.5);
  const nlohmann::json j = p;
  CHECK(j.get<ToyModelParams>() == p);
  auto bad = p;
  bad.policy_logits.pop_back();
  CHECK_THROWS_AS(bad.validate(), ArgumentError);
  bad = p;
  bad.meanfield_logits[0] = std::nan("");
  CHECK_THROWS_AS(bad.validate(), ArgumentError);
}

TEST_CASE("strip_think removes reasoning spans") {
  CHECK(strip_think("<think>x</think>Answer") == "Answer");
  CHECK(strip_think("reasoning here</think>\n Final") == "Final");
  CHECK(strip_think("a<think>b</think>c<think>d</think>e") == "ace");
  CHECK(strip_think("keep <think>unterminated") == "keep");
  CHECK(strip_think("  plain  ") == "plain");
}

TEST_CASE("tempered softmax and argmax") {
  const std::vector<double> l{1.0, 3.0, 3.0};
  const auto hot = tempered_softmax(l, 0.0);
  CHECK(hot == std::vector<double>{0.0, 1.0, 0.0});
  const auto p = tempered_softmax(l, 2.0);
  CHECK(p[1] == doctest::Approx(p[2]));
  CHECK(p[0] / p[1] == doctest::Approx(std::exp(-1.0)));
  CHECK_THROWS_AS(tempered_softmax(l, -1.0), ArgumentError);
  CHECK(argmax_lowest(l) == 1);
}
