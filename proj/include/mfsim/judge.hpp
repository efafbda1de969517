#pragma once

// Decision dimensions and the classifiers that map action text onto them.

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mfsim/backends.hpp"
#include "mfsim/core.hpp"

namespace mfsim {

struct Dimension {
  std::string name;
  std::vector<std::string> labels;  // declared order doubles as the Wasserstein ground order
  bool operator==(const Dimension&) const = default;
};

struct DimensionSchema {
  std::vector<Dimension> dimensions;

  /// rumor, sentiment, attitude, behavior, stance, belief, subjectivity, intent.
  static DimensionSchema standard();
  /// One dimension "action" with labels a0 .. a{actions-1}, for symbolic corpora.
  static DimensionSchema toy(std::size_t actions);

  /// Throws ArgumentError on duplicate names or a dimension with fewer than two labels.
  void validate() const;
  std::optional<std::size_t> find(std::string_view dimension) const;
  std::optional<int> label_index(std::size_t dimension, std::string_view label) const;
  bool operator==(const DimensionSchema&) const = default;
};

void to_json(nlohmann::json& j, const DimensionSchema& schema);
void from_json(const nlohmann::json& j, DimensionSchema& schema);

inline constexpr int kUnknownLabel = -1;

struct LabelVector {
  std::vector<int> labels;  // one label index per dimension, or kUnknownLabel
  std::vector<std::string> keywords;
  bool operator==(const LabelVector&) const = default;
};

struct ClassificationResult {
  std::vector<LabelVector> labels;
  // Batches that never produced a parseable answer and were filled with `unknown`.
  std::size_t failed_batches = 0;
};

class Judge {
 public:
  virtual ~Judge() = default;
  /// One vector per action, order preserved. Implementations must be deterministic.
  virtual ClassificationResult classify(std::string_view topic, std::span<const ActionText> actions,
                                        const DimensionSchema& schema) const = 0;
  virtual std::string name() const = 0;
};

/// Throws ArgumentError on empty input.
ClassificationResult classify_actions(std::span<const ActionText> actions, const Judge& judge,
                                      const DimensionSchema& schema, std::string_view topic = {});

/// Rule-based stand-in. Toy actions "act:k" map to label k of `toy_dimension`; free text is
/// labelled by keyword rules on the standard dimensions.
class MockJudge : public Judge {
 public:
  explicit MockJudge(std::size_t toy_dimension = 0) : toy_dimension_(toy_dimension) {}
  ClassificationResult classify(std::string_view topic, std::span<const ActionText> actions,
                                const DimensionSchema& schema) const override;
  std::string name() const override { return "mock"; }

  LabelVector label_one(std::string_view text, const DimensionSchema& schema) const;

 private:
  std::size_t toy_dimension_;
};

struct LlmJudgeOptions {
  std::size_t batch_size = 10;
  int max_attempts = 3;
  std::uint64_t seed = 0;
  double temperature = 0.0;
};

/// Sends the judge prompt per batch and parses the JSON array it returns.
class LlmJudge : public Judge {
 public:
  LlmJudge(std::shared_ptr<const GenerativeBackend> backend, LlmJudgeOptions options = {});
  ClassificationResult classify(std::string_view topic, std::span<const ActionText> actions,
                                const DimensionSchema& schema) const override;
  std::string name() const override { return "llm:" + backend_->name(); }

 private:
  std::shared_ptr<const GenerativeBackend> backend_;
  LlmJudgeOptions options_;
};

/// Canonical dimension name for a judge response key ("sentiment_state" -> "sentiment").
std::string canonical_dimension(std::string_view key);

/// Parses a judge reply into `expected` label vectors. nullopt when the reply is not a JSON
/// array of `expected` objects.
std::optional<std::vector<LabelVector>> parse_judge_reply(std::string_view reply,
                                                          std::size_t expected,
                                                          const DimensionSchema& schema);

}  // namespace mfsim
