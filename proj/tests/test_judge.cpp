#include <doctest.h>

#include <atomic>

#include "mfsim/judge.hpp"

using namespace mfsim;

namespace {

// Replies with the same text every call and counts the calls.
class CannedBackend : public GenerativeBackend {
 public:
  explicit CannedBackend(std::string reply) : reply_(std::move(reply)) {}
  std::string generate(const GenerationRequest&, std::uint64_t, double) const override {
    ++calls_;
    return reply_;
  }
  Capabilities capabilities() const override { return {}; }
  std::string name() const override { return "canned"; }
  int calls() const { return calls_; }

 private:
  std::string reply_;
  mutable std::atomic<int> calls_{0};
};

class DownBackend : public GenerativeBackend {
 public:
  std::string generate(const GenerationRequest&, std::uint64_t, double) const override {
    throw BackendError("connection refused");
  }
  Capabilities capabilities() const override { return {}; }
  std::string name() const override { return "down"; }
};

std::vector<ActionText> texts(std::initializer_list<const char*> items) {
  std::vector<ActionText> out;
  for (const char* t : items) {
    ActionText a;
    a.text = t;
    out.push_back(a);
  }
  return out;
}

const char* kExample = R"([{"rumor":"spread","sentiment_state":"calm","sentiment_tendency":"neutral",
  "behavior_type":"share","stance":"neutral","belief_degree":"believe","keywords":["share","weibo"],
  "subjectivity":"objective","intent_classification":"promotion"}])";

}  // namespace

TEST_CASE("mock judge maps toy symbols by identity") {
  const auto schema = DimensionSchema::toy(4);
  const auto out = MockJudge().classify("t", texts({"act:2", "act:0", "act:9", "hello"}), schema);
  CHECK(out.labels[0].labels[0] == 2);
  CHECK(out.labels[1].labels[0] == 0);
  CHECK(out.labels[2].labels[0] == kUnknownLabel);
  CHECK(out.labels[3].labels[0] == kUnknownLabel);
  CHECK_THROWS_AS(MockJudge(3).classify("t", texts({"act:1"}), schema), ArgumentError);
}

TEST_CASE("mock judge keyword rules on the standard schema") {
  const auto schema = DimensionSchema::standard();
  const auto v = MockJudge().label_one("//@someone this is fake news, so angry!!", schema);
  CHECK(v.labels[*schema.find("rumor")] == *schema.label_index(*schema.find("rumor"), "counter"));
  CHECK(v.labels[*schema.find("behavior")] == *schema.label_index(*schema.find("behavior"), "share"));
  CHECK(v.labels[*schema.find("sentiment")] == *schema.label_index(*schema.find("sentiment"), "angry"));
  CHECK(v.labels[*schema.find("belief")] == *schema.label_index(*schema.find("belief"), "doubt"));
  const auto q = MockJudge().label_one("is the water safe?", schema);
  CHECK(q.labels[*schema.find("intent")] == *schema.label_index(*schema.find("intent"), "question"));
  for (int l : q.labels) CHECK(l != kUnknownLabel);
}

TEST_CASE("judge example output parses onto canonical dimensions") {
  const auto schema = DimensionSchema::standard();
  const auto parsed = parse_judge_reply(kExample, 1, schema);
  REQUIRE(parsed.has_value());
  const auto& v = (*parsed)[0];
  CHECK(v.labels[*schema.find("rumor")] == 0);
  CHECK(v.labels[*schema.find("stance")] == 2);
  CHECK(v.labels[*schema.find("behavior")] == 1);
  CHECK(v.labels[*schema.find("attitude")] == 2);
  CHECK(v.labels[*schema.find("intent")] == 1);
  CHECK(v.keywords == std::vector<std::string>{"share", "weibo"});

  CHECK(parse_judge_reply(std::string("```json\n") + kExample + "\n```", 1, schema).has_value());
  CHECK_FALSE(parse_judge_reply(kExample, 2, schema).has_value());
  CHECK_FALSE(parse_judge_reply("not json", 1, schema).has_value());
  const auto odd = parse_judge_reply(R"([{"rumor":"maybe","stance":"SUPPORT"}])", 1, schema);
  REQUIRE(odd.has_value());
  CHECK((*odd)[0].labels[*schema.find("rumor")] == kUnknownLabel);
  CHECK((*odd)[0].labels[*schema.find("stance")] == 0);
  CHECK(canonical_dimension("sentiment_tendency") == "attitude");
  CHECK(canonical_dimension("rumor") == "rumor");
}

TEST_CASE("malformed replies three times yield unknown labels and one failure") {
  auto backend = std::make_shared<CannedBackend>("{broken");
  LlmJudge judge(backend);
  const auto schema = DimensionSchema::standard();
  const auto out = judge.classify("t", texts({"a", "b"}), schema);
  CHECK(backend->calls() == 3);
  CHECK(out.failed_batches == 1);
  REQUIRE(out.labels.size() == 2);
  for (const auto& v : out.labels) {
    for (int l : v.labels) CHECK(l == kUnknownLabel);
  }
}

TEST_CASE("LLM judge batches and orders its output") {
  auto backend = std::make_shared<CannedBackend>(kExample);
  LlmJudgeOptions o;
  o.batch_size = 1;
  LlmJudge judge(backend, o);
  const auto out = judge.classify("t", texts({"a", "b", "c"}), DimensionSchema::standard());
  CHECK(backend->calls() == 3);
  CHECK(out.labels.size() == 3);
  CHECK(out.failed_batches == 0);
}

TEST_CASE("transport failure names the batch") {
  LlmJudge judge(std::make_shared<DownBackend>());
  try {
    judge.classify("t", texts({"a"}), DimensionSchema::standard());
    FAIL("expected ClassificationError");
  } catch (const ClassificationError& e) {
    CHECK(e.batch() == 0);
  }
  CHECK_THROWS_AS(classify_actions({}, MockJudge(), DimensionSchema::standard()), ArgumentError);
  CHECK_THROWS_AS(LlmJudge(nullptr), ArgumentError);
}

TEST_CASE("schemas validate and round-trip") {
  const auto s = DimensionSchema::standard();
  s.validate();
  CHECK(s.dimensions.size() == 8);
  const nlohmann::json j = s;
  CHECK(j.get<DimensionSchema>() == s);
  DimensionSchema dup{{{"a", {"x", "y"}}, {"a", {"x", "y"}}}};
  CHECK_THROWS_AS(dup.validate(), ArgumentError);
  DimensionSchema thin{{{"a", {"x"}}}};
  CHECK_THROWS_AS(thin.validate(), ArgumentError);
  CHECK(DimensionSchema::toy(3).dimensions[0].labels == std::vector<std::string>{"a0", "a1", "a2"});
}
