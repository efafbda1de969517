#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "mfsim/corpus.hpp"

using namespace mfsim;
using mfsim::testing::text_event;

namespace {

std::string event_line(const std::string& id, std::int64_t followers = 10) {
  return R"({"event_id":")" + id +
         R"(","topic":"t","domain_tag":"health","timeline":[{"step":0,"text":"hello","profile":{"location":"X","followers_count":)" +
         std::to_string(followers) + R"(}},{"step":1,"text":"again","profile":{"location":"Y"}}]})";
}

Corpus n_events(std::size_t n) {
  Corpus c;
  for (std::size_t i = 0; i < n; ++i) c.events.push_back(text_event(2, "e" + std::to_string(i)));
  return c;
}

}  // namespace

TEST_CASE("parse_corpus ingests events and buckets raw counts") {
  std::istringstream in(event_line("a", 250) + "\n\n" + event_line("b") + "\n");
  const auto c = parse_corpus(in);
  REQUIRE(c.events.size() == 2);
  CHECK(c.events[0].domain_tag == DomainTag::health);
  CHECK(c.events[0].timeline[0].profile.influence_level == InfluenceLevel::low);
  CHECK(c.events[0].timeline[0].action.popularity.followers == 250);
  CHECK(c.find("b").event_id == "b");
  CHECK_THROWS_AS(c.find("zzz"), ArgumentError);
}

TEST_CASE("parse_corpus rejects duplicate ids and malformed lines") {
  std::istringstream dup(event_line("a") + "\n" + event_line("a") + "\n");
  CHECK_THROWS_AS(parse_corpus(dup), ValidationError);
  std::istringstream bad(event_line("a") + "\n{not json\n");
  try {
    parse_corpus(bad);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("serialize_corpus round-trips") {
  const auto syn = mfsim::testing::toy_corpus(3, 4, 5, 9);
  std::istringstream in(serialize_corpus(syn.corpus));
  auto back = parse_corpus(in, CorpusSource::synthetic);
  CHECK(back == syn.corpus);
}

TEST_CASE("split_corpus is a deterministic disjoint cover") {
  const auto c = n_events(5);
  const auto [train, test] = split_corpus(c, 0.8, 7);
  CHECK(train.events.size() == 4);
  CHECK(test.events.size() == 1);
  std::set<std::string> ids;
  for (const auto& e : train.events) ids.insert(e.event_id);
  for (const auto& e : test.events) CHECK(ids.insert(e.event_id).second);
  CHECK(ids.size() == 5);
  const auto again = split_corpus(c, 0.8, 7);
  CHECK(again.first == train);
  CHECK(again.second == test);

  const auto big = split_corpus(n_events(5000), 0.8, 1);
  CHECK(big.first.events.size() == 4000);
  CHECK(big.second.events.size() == 1000);
  CHECK_THROWS_AS(split_corpus(c, 1.0, 1), ArgumentError);
}

TEST_CASE("resample_states draws from the empirical profile distribution") {
  auto e = text_event(4);
  CHECK(resample_states(e, 0, 1).empty());

  auto single = text_event(1);
  const auto five = resample_states(single, 5, 3);
  REQUIRE(five.size() == 5);
  for (const auto& s : five) CHECK(s == five[0]);

  // Three Beijing entries and one Shanghai entry.
  e.timeline[2].profile = e.timeline[0].profile;
  e.timeline[1].profile = e.timeline[0].profile;
  e.timeline[3].profile = mfsim::testing::profile("Shanghai");
  const auto draws = resample_states(e, 10000, 5);
  const auto beijing = std::count_if(draws.begin(), draws.end(),
                                     [](const AgentState& s) { return s.profile.location == "Beijing"; });
  CHECK(static_cast<double>(beijing) / 10000.0 == doctest::Approx(0.75).epsilon(0.02 / 0.75));
  CHECK(resample_states(e, 10, 5) == resample_states(e, 10, 5));
}

TEST_CASE("latent-independent emission matches its rows") {
  auto cfg = SyntheticGenConfig::self_exciting(1, 625, 16, 4);
  const std::size_t A = cfg.action_alphabet;
  const std::vector<double> row{0.1, 0.2, 0.3, 0.4};
  for (std::size_t r = 0; r < cfg.state_alphabet * cfg.latent_alphabet; ++r) {
    std::copy(row.begin(), row.end(), cfg.emission.begin() + static_cast<std::ptrdiff_t>(r * A));
  }
  const auto syn = generate_synthetic(cfg);
  std::vector<double> freq(A, 0.0);
  for (const auto& entry : syn.corpus.events[0].timeline) freq[*toy::parse_action(entry.action.text)] += 1.0;
  for (std::size_t a = 0; a < A; ++a) CHECK(freq[a] / 10000.0 == doctest::Approx(row[a]).epsilon(0.02 / row[a]));
}

TEST_CASE("identity transition with a fixed start keeps the latent constant") {
  auto cfg = SyntheticGenConfig::self_exciting(3, 20, 4, 2);
  std::fill(cfg.latent_transition.begin(), cfg.latent_transition.end(), 0.0);
  for (std::size_t z = 0; z < cfg.latent_alphabet; ++z) {
    for (std::size_t m = 0; m < cfg.action_alphabet; ++m) {
      cfg.latent_transition[(z * cfg.action_alphabet + m) * cfg.latent_alphabet + z] = 1.0;
    }
  }
  cfg.initial_latent = 5;
  const auto syn = generate_synthetic(cfg);
  for (const auto& path : syn.latents) {
    CHECK(std::all_of(path.begin(), path.end(), [](int z) { return z == 5; }));
  }
}

TEST_CASE("self-exciting feedback raises the long-run majority share") {
  const auto share = [](const SyntheticGenConfig& cfg) {
    const auto syn = generate_synthetic(cfg);
    const auto& tl = syn.corpus.events[0].timeline;
    double total = 0.0;
    for (std::size_t t = 0; t < cfg.steps_per_event; ++t) {
      std::vector<int> acts;
      for (std::size_t i = 0; i < cfg.agents_per_step; ++i) {
        acts.push_back(*toy::parse_action(tl[t * cfg.agents_per_step + i].action.text));
      }
      const int maj = majority_symbol(acts, cfg.action_alphabet);
      total += static_cast<double>(std::count(acts.begin(), acts.end(), maj)) / static_cast<double>(acts.size());
    }
    return total / static_cast<double>(cfg.steps_per_event);
  };
  const auto cfg = SyntheticGenConfig::self_exciting(1, 10000, 16, 21);
  CHECK(share(cfg) > share(cfg.without_feedback()) + 0.05);
}

TEST_CASE("self-exciting rows are stochastic and the shape is validated") {
  const auto cfg = SyntheticGenConfig::self_exciting(1, 2, 2, 0);
  cfg.validate();
  SyntheticGenConfig::SelfExciting bad;
  bad.decay = 0.7;
  bad.volatility = 0.5;
  CHECK_THROWS_AS(SyntheticGenConfig::self_exciting(1, 2, 2, 0, bad), ArgumentError);
  auto broken = cfg;
  broken.emission[0] += 0.1;
  CHECK_THROWS_AS(broken.validate(), ArgumentError);
}

TEST_CASE("majority ties go to the lowest symbol") {
  CHECK(majority_symbol(std::vector<int>{2, 1, 2, 1}, 4) == 1);
  CHECK(majority_symbol(std::vector<int>{3, 3, 0}, 4) == 3);
}

TEST_CASE("step blocks partition the timeline") {
  const auto e = text_event(35);
  CHECK(step_count(e, 16) == 3);
  CHECK(step_block(e, 1, 16).front().action.text == "comment 16");
  CHECK(step_block(e, 2, 16).size() == 3);
  CHECK(step_block(e, 3, 16).empty());
}
