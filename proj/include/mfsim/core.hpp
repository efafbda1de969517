#pragma once

// Domain types shared by the simulator, the trainer and the evaluator.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mfsim/error.hpp"

namespace mfsim {

enum class Gender { male, female, unspecified };
enum class FriendsLevel { very_few, few, moderate, many, very_many };
enum class InfluenceLevel { very_low, low, moderate, high, very_high };
enum class ActivityLevel { inactive, moderately_active, highly_active };
enum class Provenance { ground_truth, generated, injected };
enum class DomainTag { crime, culture, health, news, politics, sports, technology, synthetic };
enum class ContextStrategy { mean_field, state_only, recent_k, popular_k, sft };

template <class E>
struct EnumNames;

template <>
struct EnumNames<Gender> {
  static constexpr std::array<std::string_view, 3> names{"male", "female", "unspecified"};
};
template <>
struct EnumNames<FriendsLevel> {
  static constexpr std::array<std::string_view, 5> names{"very_few", "few", "moderate", "many",
                                                          "very_many"};
};
template <>
struct EnumNames<InfluenceLevel> {
  static constexpr std::array<std::string_view, 5> names{"very_low", "low", "moderate", "high",
                                                          "very_high"};
};
template <>
struct EnumNames<ActivityLevel> {
  static constexpr std::array<std::string_view, 3> names{"inactive", "moderately_active",
                                                          "highly_active"};
};
template <>
struct EnumNames<Provenance> {
  static constexpr std::array<std::string_view, 3> names{"ground_truth", "generated", "injected"};
};
template <>
struct EnumNames<DomainTag> {
  static constexpr std::array<std::string_view, 8> names{
      "crime", "culture", "health", "news", "politics", "sports", "technology", "synthetic"};
};
template <>
struct EnumNames<ContextStrategy> {
  static constexpr std::array<std::string_view, 5> names{"mean_field", "state_only", "recent_k",
                                                          "popular_k", "sft"};
};

template <class E>
std::string_view to_string(E value) {
  return EnumNames<E>::names.at(static_cast<std::size_t>(value));
}

template <class E>
std::optional<E> enum_from_string(std::string_view name) {
  const auto& names = EnumNames<E>::names;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<E>(i);
  }
  return std::nullopt;
}

/// Throws ArgumentError naming `what` when `name` is not a category of E.
template <class E>
E parse_enum(std::string_view name, std::string_view what) {
  if (auto v = enum_from_string<E>(name)) return *v;
  throw ArgumentError("unknown " + std::string(what) + " '" + std::string(name) + "'");
}

// Raw counts are bucketed on ingest; models only ever see the buckets.
FriendsLevel friends_level_from_count(std::int64_t friends);
InfluenceLevel influence_level_from_count(std::int64_t followers);
ActivityLevel activity_level_from_count(std::int64_t interactions);

/// Smallest raw count that lands in the bucket (used when writing corpora back out).
std::int64_t representative_count(FriendsLevel level);
std::int64_t representative_count(InfluenceLevel level);
std::int64_t representative_count(ActivityLevel level);

struct AgentProfile {
  std::string location;
  std::string description;
  Gender gender = Gender::unspecified;
  FriendsLevel friends_level = FriendsLevel::very_few;
  InfluenceLevel influence_level = InfluenceLevel::very_low;
  ActivityLevel activity_level = ActivityLevel::inactive;
  bool verified = false;
  std::optional<std::int64_t> verification_type;

  bool operator==(const AgentProfile&) const = default;
};

/// The one-sentence profile description fed to the policy model.
std::string render_profile(const AgentProfile& profile);

struct AgentState {
  AgentProfile profile;
  std::string topic;
  std::string rendered_state;
  // Raw follower count, kept for popularity ranking only; never rendered.
  std::int64_t followers = 0;

  bool operator==(const AgentState&) const = default;
};

AgentState make_agent_state(const AgentProfile& profile, std::string topic,
                            std::int64_t followers = 0);

struct Popularity {
  std::int64_t followers = 0;
  std::int64_t replies = 0;
  std::int64_t likes = 0;
  bool operator==(const Popularity&) const = default;
};

struct ActionText {
  std::string text;
  std::size_t author_index = 0;
  std::size_t step = 0;
  Provenance provenance = Provenance::ground_truth;
  Popularity popularity;

  bool operator==(const ActionText&) const = default;
};

inline constexpr std::size_t kDefaultWordCap = 200;

/// Population summary m_t: free text for language backends, a symbol for the toy world.
struct MeanFieldState {
  std::variant<std::string, int> content = std::string{};
  std::size_t step = 0;

  static MeanFieldState empty() { return {}; }
  static MeanFieldState text(std::string s, std::size_t step) { return {std::move(s), step}; }
  static MeanFieldState symbol(int s, std::size_t step) { return {s, step}; }

  bool is_symbolic() const { return std::holds_alternative<int>(content); }
  int symbol_value() const { return std::get<int>(content); }
  const std::string& text_value() const { return std::get<std::string>(content); }
  /// Text as shown to a prompt; symbols render through the toy codec.
  std::string display() const;

  bool operator==(const MeanFieldState&) const = default;
};

std::size_t word_count(std::string_view text);
/// Keeps the first `cap` whitespace-delimited words, preserving their original spacing.
std::string truncate_words(std::string_view text, std::size_t cap);

struct TimelineEntry {
  AgentProfile profile;
  ActionText action;
  bool operator==(const TimelineEntry&) const = default;
};

struct Event {
  std::string event_id;
  std::string topic;
  DomainTag domain_tag = DomainTag::synthetic;
  std::vector<TimelineEntry> timeline;

  bool operator==(const Event&) const = default;
};

std::vector<Violation> validate_event(const Event& event);

struct SimulationConfig {
  std::size_t batch_size = 16;
  std::size_t horizon = 1;
  // Unset means ceil(0.2 * horizon).
  std::optional<std::size_t> warmup_steps;
  std::uint64_t seed = 0;
  ContextStrategy strategy = ContextStrategy::mean_field;
  std::size_t k = 0;
  double temperature = 1.0;
  bool resample_states = false;
  std::size_t word_cap = kDefaultWordCap;

  std::size_t effective_warmup() const;
  /// Throws ArgumentError on the first broken invariant.
  void validate() const;

  bool operator==(const SimulationConfig&) const = default;
};

struct StepRecord {
  std::vector<AgentState> states;
  std::vector<ActionText> actions;
  // Broadcast interventions: visible to the mean-field update, excluded from metrics.
  std::vector<ActionText> broadcasts;
  MeanFieldState mean_field;

  bool operator==(const StepRecord&) const = default;
};

struct Trajectory {
  std::string event_id;
  std::string topic;
  std::vector<StepRecord> steps;
  SimulationConfig config;
  std::optional<std::size_t> fork_step;
  std::optional<std::string> parent_run;

  bool operator==(const Trajectory&) const = default;
};

// Text encodings used by the symbolic toy world.
namespace toy {
std::string action_text(int symbol);
std::optional<int> parse_action(std::string_view text);
std::string state_description(int symbol);
std::optional<int> parse_state(const AgentProfile& profile);
std::string mean_field_text(int symbol);
std::optional<int> parse_mean_field(std::string_view text);
}  // namespace toy

/// Stream tags for derive_seed so policy, mean-field and resampling draws never collide.
enum class SeedStream : std::uint64_t { policy = 1, mean_field = 2, resample = 3, judge = 4 };

/// Order-independent per-(step, index) seed; the engine never shares an RNG across agents.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t step, std::uint64_t index,
                          SeedStream stream);

/// mt19937_64 with hand-rolled transforms so draws are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  double normal();
  std::size_t below(std::size_t n);
  /// Inverse-CDF draw from unnormalized non-negative weights.
  std::size_t categorical(std::span<const double> weights);

 private:
  std::mt19937_64 engine_;
};

}  // namespace mfsim
