#include "mfsim/judge.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>

#include "mfsim/prompts.hpp"

namespace mfsim {

DimensionSchema DimensionSchema::standard() {
  return {{
      {"rumor", {"spread", "counter"}},
      {"sentiment", {"angry", "calm", "happy", "sad", "fear", "surprise"}},
      {"attitude", {"positive", "negative", "neutral"}},
      {"behavior", {"comment", "share"}},
      {"stance", {"support", "oppose", "neutral"}},
      {"belief", {"believe", "doubt"}},
      {"subjectivity", {"subjective", "objective"}},
      {"intent", {"question", "promotion", "opinion"}},
  }};
}

DimensionSchema DimensionSchema::toy(std::size_t actions) {
  if (actions < 2) throw ArgumentError("toy schema needs at least two actions");
  Dimension d{"action", {}};
  for (std::size_t a = 0; a < actions; ++a) d.labels.push_back("a" + std::to_string(a));
  return {{std::move(d)}};
}

void DimensionSchema::validate() const {
  if (dimensions.empty()) throw ArgumentError("schema has no dimensions");
  std::set<std::string> names;
  for (const auto& d : dimensions) {
    if (!names.insert(d.name).second) throw ArgumentError("duplicate dimension '" + d.name + "'");
    if (d.labels.size() < 2) throw ArgumentError("dimension '" + d.name + "' needs at least two labels");
    std::set<std::string> labels(d.labels.begin(), d.labels.end());
    if (labels.size() != d.labels.size()) throw ArgumentError("dimension '" + d.name + "' repeats a label");
  }
}

std::optional<std::size_t> DimensionSchema::find(std::string_view dimension) const {
  for (std::size_t i = 0; i < dimensions.size(); ++i) {
    if (dimensions[i].name == dimension) return i;
  }
  return std::nullopt;
}

std::optional<int> DimensionSchema::label_index(std::size_t dimension, std::string_view label) const {
  const auto& labels = dimensions.at(dimension).labels;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) return static_cast<int>(i);
  }
  return std::nullopt;
}

void to_json(nlohmann::json& j, const DimensionSchema& schema) {
  j = nlohmann::json::object();
  auto dims = nlohmann::json::array();
  for (const auto& d : schema.dimensions) dims.push_back({{"name", d.name}, {"labels", d.labels}});
  j["dimensions"] = std::move(dims);
}

void from_json(const nlohmann::json& j, DimensionSchema& schema) {
  schema.dimensions.clear();
  for (const auto& d : j.at("dimensions")) {
    schema.dimensions.push_back({d.at("name").get<std::string>(), d.at("labels").get<std::vector<std::string>>()});
  }
  schema.validate();
}

ClassificationResult classify_actions(std::span<const ActionText> actions, const Judge& judge,
                                      const DimensionSchema& schema, std::string_view topic) {
  if (actions.empty()) throw ArgumentError("classify_actions needs at least one action");
  schema.validate();
  auto result = judge.classify(topic, actions, schema);
  if (result.labels.size() != actions.size()) {
    throw ClassificationError("judge " + judge.name() + " returned " + std::to_string(result.labels.size()) +
                                  " label vectors for " + std::to_string(actions.size()) + " actions",
                              0);
  }
  return result;
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool has_any(const std::string& text, std::initializer_list<std::string_view> needles) {
  return std::any_of(needles.begin(), needles.end(),
                     [&](std::string_view n) { return text.find(n) != std::string::npos; });
}

LabelVector unknown_vector(const DimensionSchema& schema) {
  return {std::vector<int>(schema.dimensions.size(), kUnknownLabel), {}};
}

void set_label(LabelVector& v, const DimensionSchema& schema, std::string_view dim, std::string_view label) {
  const auto d = schema.find(dim);
  if (!d) return;
  if (const auto l = schema.label_index(*d, label)) v.labels[*d] = *l;
}

}  // namespace

LabelVector MockJudge::label_one(std::string_view text, const DimensionSchema& schema) const {
  auto v = unknown_vector(schema);
  if (const auto symbol = toy::parse_action(text)) {
    if (toy_dimension_ >= schema.dimensions.size()) {
      throw ArgumentError("mock judge toy dimension outside the schema");
    }
    if (static_cast<std::size_t>(*symbol) < schema.dimensions[toy_dimension_].labels.size()) {
      v.labels[toy_dimension_] = *symbol;
    }
    return v;
  }
  const std::string t = lower(text);
  const bool counter = has_any(t, {"fake", "rumor", "not true", "false", "debunk", "refute", "doubt", "really?"});
  const bool question = t.find('?') != std::string::npos;
  const bool share = t.rfind("//@", 0) == 0 || has_any(t, {"repost", "forward", "share", "rt @"});

  std::string_view sentiment = "calm";
  if (has_any(t, {"angry", "outrage", "furious", "disgust", "shame", "!!"})) {
    sentiment = "angry";
  } else if (has_any(t, {"@_@", "wow", "shocked", "unbelievable", "surpris"})) {
    sentiment = "surprise";
  } else if (has_any(t, {"scared", "afraid", "fear", "worried", "terrif"})) {
    sentiment = "fear";
  } else if (has_any(t, {"sad", "sorry", "pray", "rip", "tragic", "heartbreak"})) {
    sentiment = "sad";
  } else if (has_any(t, {"happy", "glad", "great", "love", "haha", "congrat"})) {
    sentiment = "happy";
  }
  const bool negative = counter || sentiment == "angry" || sentiment == "sad" || sentiment == "fear" ||
                        has_any(t, {"bad", "terrible", "against", "oppose"});
  const bool positive = !negative && (sentiment == "happy" || has_any(t, {"good", "support", "agree", "thank"}));

  set_label(v, schema, "rumor", counter ? "counter" : "spread");
  set_label(v, schema, "sentiment", sentiment);
  set_label(v, schema, "attitude", negative ? "negative" : positive ? "positive" : "neutral");
  set_label(v, schema, "behavior", share ? "share" : "comment");
  set_label(v, schema, "stance", negative ? "oppose" : positive ? "support" : "neutral");
  set_label(v, schema, "belief", counter ? "doubt" : "believe");
  set_label(v, schema, "subjectivity",
            has_any(t, {"i ", "i'm", "think", "feel", "!", "believe"}) ? "subjective" : "objective");
  set_label(v, schema, "intent",
            question ? "question" : (share || has_any(t, {"http", "#"})) ? "promotion" : "opinion");

  std::string word;
  auto flush = [&] {
    if (word.size() > 3 && v.keywords.size() < 3) v.keywords.push_back(word);
    word.clear();
  };
  for (char c : t) {
    if (std::isalnum(static_cast<unsigned char>(c)) != 0) {
      word.push_back(c);
    } else {
      flush();
    }
  }
  flush();
  return v;
}

ClassificationResult MockJudge::classify(std::string_view, std::span<const ActionText> actions,
                                         const DimensionSchema& schema) const {
  ClassificationResult out;
  out.labels.reserve(actions.size());
  for (const auto& a : actions) out.labels.push_back(label_one(a.text, schema));
  return out;
}

std::string canonical_dimension(std::string_view key) {
  static constexpr std::array<std::pair<std::string_view, std::string_view>, 5> kAliases{{
      {"sentiment_state", "sentiment"},
      {"sentiment_tendency", "attitude"},
      {"behavior_type", "behavior"},
      {"belief_degree", "belief"},
      {"intent_classification", "intent"},
  }};
  for (const auto& [from, to] : kAliases) {
    if (key == from) return std::string(to);
  }
  return std::string(key);
}

std::optional<std::vector<LabelVector>> parse_judge_reply(std::string_view reply, std::size_t expected,
                                                          const DimensionSchema& schema) {
  std::string text = strip_think(reply);
  // Tolerate a Markdown code fence around the array.
  if (text.rfind("```", 0) == 0) {
    const auto first_nl = text.find('\n');
    const auto last_fence = text.rfind("```");
    if (first_nl == std::string::npos || last_fence <= first_nl) return std::nullopt;
    text = text.substr(first_nl + 1, last_fence - first_nl - 1);
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
  if (!j.is_array() || j.size() != expected) return std::nullopt;
  std::vector<LabelVector> out;
  for (const auto& item : j) {
    if (!item.is_object()) return std::nullopt;
    auto v = unknown_vector(schema);
    for (const auto& [key, value] : item.items()) {
      if (key == "keywords") {
        if (value.is_array()) {
          for (const auto& k : value) {
            if (k.is_string() && !k.get<std::string>().empty()) v.keywords.push_back(k.get<std::string>());
          }
        }
        continue;
      }
      if (!value.is_string()) continue;
      const auto dim = schema.find(canonical_dimension(key));
      if (!dim) continue;
      if (const auto l = schema.label_index(*dim, lower(value.get<std::string>()))) v.labels[*dim] = *l;
    }
    out.push_back(std::move(v));
  }
  return out;
}

LlmJudge::LlmJudge(std::shared_ptr<const GenerativeBackend> backend, LlmJudgeOptions options)
    : backend_(std::move(backend)), options_(options) {
  if (!backend_) throw ArgumentError("LLM judge needs a backend");
  if (options_.batch_size < 1) throw ArgumentError("judge batch_size must be >= 1");
  if (options_.max_attempts < 1) throw ArgumentError("judge max_attempts must be >= 1");
}

ClassificationResult LlmJudge::classify(std::string_view topic, std::span<const ActionText> actions,
                                        const DimensionSchema& schema) const {
  ClassificationResult out;
  out.labels.reserve(actions.size());
  const std::size_t batches = (actions.size() + options_.batch_size - 1) / options_.batch_size;
  for (std::size_t b = 0; b < batches; ++b) {
    const auto chunk = actions.subspan(b * options_.batch_size,
                                       std::min(options_.batch_size, actions.size() - b * options_.batch_size));
    std::vector<std::string> comments;
    for (const auto& a : chunk) comments.push_back(a.text);
    GenerationRequest request;
    request.prompt = render_judge_prompt(topic, comments);
    std::optional<std::vector<LabelVector>> parsed;
    for (int attempt = 0; attempt < options_.max_attempts && !parsed; ++attempt) {
      std::string reply;
      try {
        reply = backend_->generate(request,
                                   derive_seed(options_.seed, b, static_cast<std::uint64_t>(attempt),
                                               SeedStream::judge),
                                   options_.temperature);
      } catch (const BackendError& e) {
        throw ClassificationError(e.what(), b);
      }
      parsed = parse_judge_reply(reply, chunk.size(), schema);
    }
    if (!parsed) {
      ++out.failed_batches;
      parsed.emplace(chunk.size(), unknown_vector(schema));
    }
    for (auto& v : *parsed) out.labels.push_back(std::move(v));
  }
  return out;
}

}  // namespace mfsim
