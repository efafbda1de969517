#include <doctest.h>

#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "mfsim/core.hpp"
#include "mfsim/json_io.hpp"

using namespace mfsim;
using mfsim::testing::text_event;

TEST_CASE("validate_event accepts a well-formed event") {
  CHECK(validate_event(text_event(3)).empty());
}

TEST_CASE("validate_event flags an empty action at its step") {
  auto e = text_event(3);
  e.timeline[1].action.text = "   ";
  const auto v = validate_event(e);
  REQUIRE(v.size() == 1);
  CHECK(v[0].step == std::optional<std::size_t>(1));
}

TEST_CASE("validate_event flags the first step inversion only") {
  auto e = text_event(4);
  e.timeline[1].action.step = 2;
  e.timeline[2].action.step = 1;
  e.timeline[3].action.step = 0;
  const auto v = validate_event(e);
  REQUIRE(v.size() == 1);
  CHECK(v[0].message.find("not strictly increasing") != std::string::npos);
}

TEST_CASE("count buckets follow the published ranges") {
  CHECK(influence_level_from_count(250) == InfluenceLevel::low);
  CHECK(influence_level_from_count(100) == InfluenceLevel::very_low);
  CHECK(influence_level_from_count(101) == InfluenceLevel::low);
  CHECK(influence_level_from_count(10001) == InfluenceLevel::very_high);
  CHECK(friends_level_from_count(9) == FriendsLevel::very_few);
  CHECK(friends_level_from_count(30) == FriendsLevel::few);
  CHECK(activity_level_from_count(100) == ActivityLevel::moderately_active);
  for (auto l : {InfluenceLevel::very_low, InfluenceLevel::low, InfluenceLevel::moderate, InfluenceLevel::high,
                 InfluenceLevel::very_high}) {
    CHECK(influence_level_from_count(representative_count(l)) == l);
  }
  for (auto l : {FriendsLevel::very_few, FriendsLevel::few, FriendsLevel::moderate, FriendsLevel::many,
                 FriendsLevel::very_many}) {
    CHECK(friends_level_from_count(representative_count(l)) == l);
  }
}

TEST_CASE("render_profile mentions every bucket in words") {
  AgentProfile p;
  p.location = "Wuhan";
  p.description = "a nurse";
  p.gender = Gender::male;
  p.friends_level = FriendsLevel::very_many;
  p.influence_level = InfluenceLevel::high;
  p.activity_level = ActivityLevel::highly_active;
  p.verified = true;
  p.verification_type = 3;
  const auto s = render_profile(p);
  CHECK(s.find("Wuhan") != std::string::npos);
  CHECK(s.find("very many number of friends") != std::string::npos);
  CHECK(s.find("high level of influence") != std::string::npos);
  CHECK(s.find("highly active") != std::string::npos);
  CHECK(s.find("verified (verification type 3)") != std::string::npos);
}

TEST_CASE("enum names round-trip") {
  for (auto s : EnumNames<ContextStrategy>::names) {
    CHECK(to_string(parse_enum<ContextStrategy>(s, "strategy")) == s);
  }
  CHECK_THROWS_AS(parse_enum<ContextStrategy>("nearest", "strategy"), ArgumentError);
}

TEST_CASE("truncate_words keeps the first words with their spacing") {
  CHECK(truncate_words("a  b\tc d", 3) == "a  b\tc");
  CHECK(truncate_words("  a b", 1) == "  a");
  CHECK(truncate_words("a b", 5) == "a b");
  std::string long_text;
  for (int i = 0; i < 350; ++i) long_text += "w" + std::to_string(i) + " ";
  CHECK(word_count(truncate_words(long_text, kDefaultWordCap)) == kDefaultWordCap);
}

TEST_CASE("toy codecs round-trip and reject junk") {
  for (int s = 0; s < 20; ++s) {
    CHECK(toy::parse_action(toy::action_text(s)) == s);
    CHECK(toy::parse_mean_field(toy::mean_field_text(s)) == s);
  }
  CHECK_FALSE(toy::parse_action("act:").has_value());
  CHECK_FALSE(toy::parse_action("act:3x").has_value());
  CHECK_FALSE(toy::parse_action("hello").has_value());
  CHECK(toy::parse_action(" act:2\n") == 2);
}

TEST_CASE("SimulationConfig defaults and validation") {
  SimulationConfig c;
  c.horizon = 30;
  CHECK(c.effective_warmup() == 6);
  c.horizon = 7;
  CHECK(c.effective_warmup() == 2);  // ceil(1.4)
  c.validate();
  c.k = 3;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
  c.strategy = ContextStrategy::recent_k;
  c.validate();
  c.warmup_steps = 8;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
}

TEST_CASE("derive_seed separates streams, steps and agents") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t step = 0; step < 20; ++step) {
    for (std::uint64_t i = 0; i < 20; ++i) {
      for (auto s : {SeedStream::policy, SeedStream::mean_field, SeedStream::resample}) {
        seen.insert(derive_seed(7, step, i, s));
      }
    }
  }
  CHECK(seen.size() == 20 * 20 * 3);
  CHECK(derive_seed(7, 3, 4, SeedStream::policy) == derive_seed(7, 3, 4, SeedStream::policy));
}

TEST_CASE("Rng categorical matches its weights") {
  Rng rng(11);
  const std::vector<double> w{1.0, 0.0, 3.0};
  std::array<int, 3> counts{};
  const int n = 40000;
  for (int i = 0; i < n; ++i) ++counts[rng.categorical(w)];
  CHECK(counts[1] == 0);
  CHECK(static_cast<double>(counts[2]) / n == doctest::Approx(0.75).epsilon(0.02));
  CHECK_THROWS_AS(rng.categorical(std::vector<double>{0.0, 0.0}), ArgumentError);
}

TEST_CASE("trajectory JSONL round-trips byte-identically") {
  Trajectory t;
  t.event_id = "ev1";
  t.topic = "topic";
  t.config.horizon = 2;
  t.fork_step = 1;
  t.parent_run = "run-0001";
  for (std::size_t s = 0; s < 2; ++s) {
    StepRecord r;
    r.states.push_back(make_agent_state(mfsim::testing::profile(), "topic", 42));
    ActionText a;
    a.text = "line \"quoted\"\nsecond";
    a.step = s;
    a.provenance = s == 0 ? Provenance::ground_truth : Provenance::injected;
    r.actions.push_back(a);
    r.mean_field = s == 0 ? MeanFieldState::empty() : MeanFieldState::symbol(3, s);
    t.steps.push_back(r);
  }
  const auto text = serialize_trajectory(t);
  std::istringstream in(text);
  const auto back = parse_trajectory(in);
  CHECK(back == t);
  CHECK(serialize_trajectory(back) == text);
}

TEST_CASE("parse_trajectory rejects out-of-order steps") {
  Trajectory t;
  t.event_id = "e";
  t.steps.resize(1);
  auto text = trajectory_header(t).dump() + "\n" + step_line(t.steps[0], 1).dump() + "\n";
  std::istringstream in(text);
  CHECK_THROWS_AS(parse_trajectory(in), ParseError);
}
