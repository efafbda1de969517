#pragma once

// The simulation loop: warm-up replay, per-agent policy fan-out, interventions, mean-field
// update and state transition, plus forks that restart a run from an observed prefix.

#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mfsim/backends.hpp"
#include "mfsim/core.hpp"
#include "mfsim/prompts.hpp"

namespace mfsim {

enum class InterventionKind { seed_agents, broadcast };

template <>
struct EnumNames<InterventionKind> {
  static constexpr std::array<std::string_view, 2> names{"seed_agents", "broadcast"};
};

struct InterventionEntry {
  std::size_t step = 0;
  InterventionKind kind = InterventionKind::seed_agents;
  std::vector<std::string> actions;
  // seed_agents: how many of the step's agents are replaced (texts are cycled).
  std::size_t count = 0;
  bool operator==(const InterventionEntry&) const = default;
};

struct InterventionSchedule {
  std::vector<InterventionEntry> entries;

  bool empty() const { return entries.empty(); }
  /// Throws ValidationError whose violations name the offending entry ("entries[i].step").
  void validate(std::size_t horizon, std::size_t batch_size, std::size_t first_step = 0) const;
  bool operator==(const InterventionSchedule&) const = default;
};

struct PopularityScore {
  double followers_weight = 1.0;
  double replies_weight = 1.0;
  double likes_weight = 1.0;

  double score(const Popularity& p) const {
    return followers_weight * static_cast<double>(p.followers) +
           replies_weight * static_cast<double>(p.replies) + likes_weight * static_cast<double>(p.likes);
  }
  void validate() const;
};

/// Peer context for one step. k larger than the history degrades to the whole history.
ContextText build_context(ContextStrategy strategy, std::span<const ActionText> history,
                          const MeanFieldState& mean_field, std::size_t k,
                          const PopularityScore& score = {});

/// States for step t + 1: the next timeline block, or resampled profiles when resampling
/// is enabled or the timeline is exhausted.
std::vector<AgentState> advance_states(const Event& event, std::size_t t, const SimulationConfig& cfg);

struct StepActions {
  std::vector<ActionText> actions;
  std::vector<ActionText> broadcasts;
};

StepActions apply_interventions(const InterventionSchedule& schedule, std::size_t t,
                                std::vector<ActionText> generated);

/// m_{t+1} from m_t and the step's actions (broadcasts included by the caller).
MeanFieldState update_mean_field(const MeanFieldState& prev, std::string_view topic,
                                 std::span<const AgentState> states,
                                 std::span<const ActionText> actions,
                                 const GenerativeBackend& backend, const SimulationConfig& cfg);

struct Backends {
  std::shared_ptr<const GenerativeBackend> policy;
  std::shared_ptr<const GenerativeBackend> mean_field;
};

struct RunOptions {
  // Width of the per-step policy fan-out; 1 runs the serial path.
  std::size_t fanout = 1;
  PopularityScore popularity;
  // Called after each completed step (persistence hook).
  std::function<void(const StepRecord&, std::size_t)> on_step;
};

/// Raised when a run aborts mid-way; carries the steps completed so far.
class SimulationError : public Error {
 public:
  SimulationError(const std::string& what, Trajectory partial, std::exception_ptr cause)
      : Error(what), partial_(std::move(partial)), cause_(std::move(cause)) {}
  const Trajectory& partial() const { return partial_; }
  [[noreturn]] void rethrow_cause() const { std::rethrow_exception(cause_); }

 private:
  Trajectory partial_;
  std::exception_ptr cause_;
};

Trajectory run_simulation(const Event& event, const SimulationConfig& cfg, const Backends& backends,
                          const InterventionSchedule& schedule = {}, const RunOptions& options = {});

/// Restart from an observed prefix: steps 0..start_step are replayed from `parent` when given
/// (byte-identical to it), otherwise from the event's ground truth; later steps are generated.
Trajectory fork_trajectory(const Event& event, const Trajectory* parent, std::size_t start_step,
                           const SimulationConfig& cfg, const Backends& backends,
                           const InterventionSchedule& schedule = {}, const RunOptions& options = {});

/// Pure replay of the event (warm-up covers the whole horizon). horizon 0 means every block.
Trajectory ground_truth_trajectory(const Event& event, std::size_t batch_size,
                                   std::size_t horizon = 0,
                                   std::shared_ptr<const GenerativeBackend> mean_field = nullptr,
                                   std::uint64_t seed = 0);

}  // namespace mfsim
