#pragma once

// Event corpora: JSONL ingest/export, train/test splits, state resampling, and the
// synthetic population generator used for desk-scale experiments.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mfsim/core.hpp"

namespace mfsim {

enum class CorpusSource { file, synthetic };

struct Corpus {
  std::vector<Event> events;
  CorpusSource source = CorpusSource::file;

  /// Throws ArgumentError for unknown ids.
  const Event& find(const std::string& event_id) const;
  bool operator==(const Corpus&) const = default;
};

/// One event per line. Raw follower/friend/interaction counts are bucketed on ingest.
Corpus parse_corpus(std::istream& in, CorpusSource source = CorpusSource::file);
Corpus load_corpus(const std::filesystem::path& path);
std::string serialize_corpus(const Corpus& corpus);
void save_corpus(const std::filesystem::path& path, const Corpus& corpus);

/// Disjoint cover of the events; |train| = round(train_fraction * N).
std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double train_fraction,
                                       std::uint64_t seed);

/// i.i.d. draws with replacement from the event's empirical profile distribution.
std::vector<AgentState> resample_states(const Event& event, std::size_t count,
                                        std::uint64_t seed);

struct SyntheticGenConfig {
  std::size_t num_events = 10;
  std::size_t steps_per_event = 50;
  std::size_t agents_per_step = 16;
  std::size_t state_alphabet = 6;
  std::size_t action_alphabet = 4;
  std::size_t latent_alphabet = 8;
  // Row-stochastic over next latent, indexed [latent][majority action][next latent].
  std::vector<double> latent_transition;
  // Row-stochastic over actions, indexed [state][latent][action].
  std::vector<double> emission;
  // Unset: each event starts from a uniformly drawn latent.
  std::optional<int> initial_latent;
  std::uint64_t seed = 0;

  double transition_prob(std::size_t latent, std::size_t majority, std::size_t next) const {
    return latent_transition[(latent * action_alphabet + majority) * latent_alphabet + next];
  }
  double emission_prob(std::size_t state, std::size_t latent, std::size_t action) const {
    return emission[(state * latent_alphabet + latent) * action_alphabet + action];
  }
  std::span<const double> transition_row(std::size_t latent, std::size_t majority) const;
  std::span<const double> emission_row(std::size_t state, std::size_t latent) const;

  /// Throws ArgumentError on bad alphabets or rows that do not sum to 1 within 1e-12.
  void validate() const;

  /// Latent = (favoured action, intensity); a majority that agrees with the favoured action
  /// promotes the latent to high intensity, a disagreeing majority pulls it over.
  struct SelfExciting {
    std::size_t action_alphabet = 4;
    std::size_t state_alphabet = 6;
    double state_bias = 0.5;  // logit bonus on action s % A
    double weak = 0.8;        // logit bonus on the favoured action at low intensity
    double strong = 4.0;      // ... and at high intensity
    // While the majority agrees: probability of dropping back to low intensity, and of a
    // uniform latent jump.
    double decay = 0.01;
    double volatility = 0.005;
  };
  static SyntheticGenConfig self_exciting(std::size_t num_events, std::size_t steps_per_event,
                                          std::size_t agents_per_step, std::uint64_t seed,
                                          const SelfExciting& shape);
  static SyntheticGenConfig self_exciting(std::size_t num_events, std::size_t steps_per_event,
                                          std::size_t agents_per_step, std::uint64_t seed) {
    return self_exciting(num_events, steps_per_event, agents_per_step, seed, SelfExciting{});
  }
  /// Same config with the majority-action dependence averaged out of the transition.
  SyntheticGenConfig without_feedback() const;
};

struct SyntheticCorpus {
  Corpus corpus;
  // Hidden latent path per event (index-aligned with corpus.events). Oracle use only.
  std::vector<std::vector<int>> latents;
};

SyntheticCorpus generate_synthetic(const SyntheticGenConfig& cfg);

/// Profile used for toy state `symbol` and its raw follower count.
std::pair<AgentProfile, std::int64_t> synthetic_profile(int symbol);

/// Most frequent symbol; ties go to the lowest index.
int majority_symbol(std::span<const int> symbols, std::size_t alphabet);

/// Timeline block of simulation step `step` when each step holds `batch_size` entries.
std::span<const TimelineEntry> step_block(const Event& event, std::size_t step,
                                          std::size_t batch_size);
std::size_t step_count(const Event& event, std::size_t batch_size);

}  // namespace mfsim
