#pragma once

// The generative-model abstraction shared by the policy model and the mean-field model.

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mfsim/core.hpp"
#include "mfsim/prompts.hpp"

namespace mfsim {

struct Capabilities {
  bool supports_logprob = false;
  // Reads GenerationRequest::condition (toy symbols) instead of the prompt text.
  bool symbolic = false;
  // Policy prompts get the "final text only" instruction (closed chat models).
  bool final_text_only = false;
};

struct GenerationRequest {
  PromptText prompt;
  // Toy conditioning symbols: (state, mean field) for a policy, (previous mean field,
  // majority action) for a mean-field model. Empty for purely textual callers.
  std::vector<int> condition;
};

/// Implementations must tolerate concurrent generate() calls.
class GenerativeBackend {
 public:
  virtual ~GenerativeBackend() = default;

  /// Deterministic for temperature 0 or a fixed seed.
  virtual std::string generate(const GenerationRequest& request, std::uint64_t seed,
                               double temperature) const = 0;
  /// Natural-log probability of `output`; nullopt when the backend exposes none.
  virtual std::optional<double> logprob(std::string_view output,
                                        const GenerationRequest& request) const;
  virtual Capabilities capabilities() const = 0;
  virtual std::string name() const = 0;
};

/// Replays a fixed table of prompt -> completion. Unknown prompts are a ReplayMissError
/// unless a fallback completion is configured.
class ScriptedBackend : public GenerativeBackend {
 public:
  ScriptedBackend() = default;
  explicit ScriptedBackend(std::map<std::string, std::string> table,
                           std::optional<std::string> fallback = std::nullopt);
  static std::shared_ptr<ScriptedBackend> constant(std::string text);

  std::string generate(const GenerationRequest& request, std::uint64_t seed,
                       double temperature) const override;
  Capabilities capabilities() const override { return {}; }
  std::string name() const override { return "scripted"; }

  /// Every prompt seen so far, in call order.
  std::vector<std::string> prompts() const;

 private:
  std::map<std::string, std::string> table_;
  std::optional<std::string> fallback_;
  mutable std::mutex mu_;
  mutable std::vector<std::string> prompts_;
};

enum class ToyHead { policy, mean_field };

/// Categorical toy instantiation of the policy and the mean-field model.
struct ToyModelParams {
  std::size_t states = 0;
  std::size_t actions = 0;
  std::size_t mean_fields = 0;
  std::vector<double> policy_logits;     // [state][mean field][action]
  std::vector<double> meanfield_logits;  // [previous mean field][majority action][next mean field]

  static ToyModelParams zeros(std::size_t states, std::size_t actions, std::size_t mean_fields);
  /// i.i.d. normal logits with the given standard deviation.
  static ToyModelParams random(std::size_t states, std::size_t actions, std::size_t mean_fields,
                               std::uint64_t seed, double scale);

  std::size_t policy_index(std::size_t s, std::size_t m, std::size_t a) const {
    return (s * mean_fields + m) * actions + a;
  }
  std::size_t meanfield_index(std::size_t prev, std::size_t maj, std::size_t next) const {
    return (prev * actions + maj) * mean_fields + next;
  }
  std::span<const double> policy_row(std::size_t s, std::size_t m) const {
    return std::span<const double>(policy_logits).subspan(policy_index(s, m, 0), actions);
  }
  std::span<const double> meanfield_row(std::size_t prev, std::size_t maj) const {
    return std::span<const double>(meanfield_logits).subspan(meanfield_index(prev, maj, 0), mean_fields);
  }
  /// Number of (previous mean field, majority action) conditions.
  std::size_t conditions() const { return mean_fields * actions; }

  /// Throws ArgumentError on size mismatch or non-finite logits.
  void validate() const;
  bool same_alphabets(const ToyModelParams& other) const {
    return states == other.states && actions == other.actions && mean_fields == other.mean_fields;
  }
  bool operator==(const ToyModelParams&) const = default;
};

void to_json(nlohmann::json& j, const ToyModelParams& p);
void from_json(const nlohmann::json& j, ToyModelParams& p);

/// softmax(logits / temperature); temperature 0 gives a one-hot on the lowest-index argmax.
std::vector<double> tempered_softmax(std::span<const double> logits, double temperature);
std::vector<double> log_softmax(std::span<const double> logits);

/// Lowest index among the maxima. The one tie-break rule used everywhere.
std::size_t argmax_lowest(std::span<const double> values);

int toy_sample(const ToyModelParams& params, ToyHead head, std::span<const int> condition,
               std::uint64_t seed, double temperature);
double toy_logprob(const ToyModelParams& params, ToyHead head, std::span<const int> condition,
                   int symbol);

class ToyBackend : public GenerativeBackend {
 public:
  ToyBackend(std::shared_ptr<const ToyModelParams> params, ToyHead head);

  std::string generate(const GenerationRequest& request, std::uint64_t seed,
                       double temperature) const override;
  std::optional<double> logprob(std::string_view output,
                                const GenerationRequest& request) const override;
  Capabilities capabilities() const override { return {true, true}; }
  std::string name() const override;

  const ToyModelParams& params() const { return *params_; }
  ToyHead head() const { return head_; }

 private:
  std::shared_ptr<const ToyModelParams> params_;
  ToyHead head_;
};

/// Removes <think>...</think> spans (and an unopened leading "...</think>") and trims.
std::string strip_think(std::string_view text);

}  // namespace mfsim
