#include "mfsim/engine.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>

#include "mfsim/corpus.hpp"

namespace mfsim {

void InterventionSchedule::validate(std::size_t horizon, std::size_t batch_size,
                                    std::size_t first_step) const {
  std::vector<Violation> bad;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    const std::string at = "entries[" + std::to_string(i) + "]";
    if (e.step >= horizon) {
      bad.push_back({e.step, at + ".step: " + std::to_string(e.step) + " is outside the horizon " +
                                 std::to_string(horizon)});
    } else if (e.step < first_step) {
      bad.push_back({e.step, at + ".step: " + std::to_string(e.step) +
                                 " precedes the fork step " + std::to_string(first_step)});
    }
    if (e.actions.empty()) bad.push_back({e.step, at + ".actions: no intervention texts"});
    if (e.kind == InterventionKind::seed_agents) {
      if (e.count == 0) bad.push_back({e.step, at + ".count: seed_agents needs count >= 1"});
      if (e.count > batch_size) {
        bad.push_back({e.step, at + ".count: " + std::to_string(e.count) + " exceeds batch size " +
                                   std::to_string(batch_size)});
      }
    }
  }
  if (!bad.empty()) {
    std::string what = "invalid intervention schedule:";
    for (const auto& v : bad) what += " " + v.message + ";";
    throw ValidationError(what, std::move(bad));
  }
}

void PopularityScore::validate() const {
  if (followers_weight < 0 || replies_weight < 0 || likes_weight < 0) {
    throw ArgumentError("popularity weights must be non-negative");
  }
  if (followers_weight == 0 && replies_weight == 0 && likes_weight == 0) {
    throw ArgumentError("at least one popularity weight must be positive");
  }
}

ContextText build_context(ContextStrategy strategy, std::span<const ActionText> history,
                          const MeanFieldState& mean_field, std::size_t k,
                          const PopularityScore& score) {
  ContextText ctx;
  ctx.strategy = strategy;
  switch (strategy) {
    case ContextStrategy::state_only:
    case ContextStrategy::sft:
      break;
    case ContextStrategy::mean_field:
      ctx.summary = mean_field.display();
      break;
    case ContextStrategy::recent_k: {
      const std::size_t n = std::min(k, history.size());
      for (std::size_t i = history.size() - n; i < history.size(); ++i) {
        ctx.comments.push_back(history[i].text);
      }
      break;
    }
    case ContextStrategy::popular_k: {
      score.validate();
      std::vector<std::size_t> order(history.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      // Highest score first; among equal scores the most recent wins.
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double sa = score.score(history[a].popularity);
        const double sb = score.score(history[b].popularity);
        if (sa != sb) return sa > sb;
        return a > b;
      });
      const std::size_t n = std::min(k, history.size());
      for (std::size_t i = 0; i < n; ++i) ctx.comments.push_back(history[order[i]].text);
      break;
    }
  }
  return ctx;
}

namespace {

std::vector<AgentState> states_from_block(std::span<const TimelineEntry> block,
                                          const std::string& topic) {
  std::vector<AgentState> out;
  out.reserve(block.size());
  for (const auto& e : block) {
    out.push_back(make_agent_state(e.profile, topic, e.action.popularity.followers));
  }
  return out;
}

}  // namespace

std::vector<AgentState> advance_states(const Event& event, std::size_t t,
                                       const SimulationConfig& cfg) {
  if (t + 1 >= cfg.horizon) {
    throw ArgumentError("advance_states called at the final step " + std::to_string(t));
  }
  if (!cfg.resample_states) {
    const auto block = step_block(event, t + 1, cfg.batch_size);
    if (block.empty()) {
      throw HorizonError("event " + event.event_id + " has no agents for step " +
                         std::to_string(t + 1) + " and resampling is disabled");
    }
    return states_from_block(block, event.topic);
  }
  return resample_states(event, cfg.batch_size,
                         derive_seed(cfg.seed, t + 1, 0, SeedStream::resample));
}

StepActions apply_interventions(const InterventionSchedule& schedule, std::size_t t,
                                std::vector<ActionText> generated) {
  StepActions out;
  out.actions = std::move(generated);
  for (const auto& e : schedule.entries) {
    if (e.step != t) continue;
    if (e.actions.empty()) throw ArgumentError("intervention at step " + std::to_string(t) + " has no texts");
    if (e.kind == InterventionKind::seed_agents) {
      if (e.count > out.actions.size()) {
        throw ArgumentError("seed_agents count " + std::to_string(e.count) + " exceeds the " +
                            std::to_string(out.actions.size()) + " agents of step " + std::to_string(t));
      }
      for (std::size_t i = 0; i < e.count; ++i) {
        auto& a = out.actions[i];
        a.text = e.actions[i % e.actions.size()];
        a.provenance = Provenance::injected;
      }
    } else {
      for (const auto& text : e.actions) {
        ActionText b;
        b.text = text;
        b.author_index = out.broadcasts.size();
        b.step = t;
        b.provenance = Provenance::injected;
        out.broadcasts.push_back(std::move(b));
      }
    }
  }
  return out;
}

MeanFieldState update_mean_field(const MeanFieldState& prev, std::string_view topic,
                                 std::span<const AgentState>, std::span<const ActionText> actions,
                                 const GenerativeBackend& backend, const SimulationConfig& cfg) {
  if (actions.empty()) throw ArgumentError("mean-field update needs at least one action");
  const std::uint64_t seed = derive_seed(cfg.seed, prev.step, 0, SeedStream::mean_field);
  GenerationRequest request;
  request.prompt = render_meanfield_prompt(topic, prev, actions);
  if (backend.capabilities().symbolic) {
    if (!prev.is_symbolic()) throw ArgumentError("symbolic mean-field backend needs a symbolic m_t");
    std::vector<int> symbols;
    for (const auto& a : actions) {
      if (auto s = toy::parse_action(a.text)) symbols.push_back(*s);
    }
    if (symbols.empty()) throw BackendError("no symbolic actions to summarize at step " + std::to_string(prev.step));
    const auto alphabet = static_cast<std::size_t>(*std::max_element(symbols.begin(), symbols.end())) + 1;
    request.condition = {prev.symbol_value(), majority_symbol(symbols, alphabet)};
    const auto out = backend.generate(request, seed, cfg.temperature);
    const auto symbol = toy::parse_mean_field(out);
    if (!symbol) throw BackendError("symbolic mean-field backend returned '" + out + "'");
    return MeanFieldState::symbol(*symbol, prev.step + 1);
  }
  const auto out = backend.generate(request, seed, cfg.temperature);
  return MeanFieldState::text(truncate_words(out, cfg.word_cap), prev.step + 1);
}

namespace {

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

struct PolicyStep {
  const GenerativeBackend& backend;
  const SimulationConfig& cfg;
  const ContextText& context;
  const MeanFieldState& mean_field;
  std::size_t step;

  ActionText act(const AgentState& state, std::size_t agent) const {
    const auto caps = backend.capabilities();
    GenerationRequest request;
    request.prompt = render_policy_prompt(state, context, cfg.strategy, {caps.final_text_only});
    if (caps.symbolic) {
      const auto s = toy::parse_state(state.profile);
      if (!s) throw BackendError("agent profile carries no toy state symbol");
      int m = 0;
      if (cfg.strategy == ContextStrategy::mean_field) {
        if (!mean_field.is_symbolic()) throw ArgumentError("symbolic policy needs a symbolic mean field");
        m = mean_field.symbol_value();
      }
      request.condition = {*s, m};
    }
    const auto seed = derive_seed(cfg.seed, step, agent, SeedStream::policy);
    ActionText a;
    a.text = backend.generate(request, seed, cfg.temperature);
    if (blank(a.text)) throw BackendError("policy returned an empty action at step " + std::to_string(step));
    a.author_index = agent;
    a.step = step;
    a.provenance = Provenance::generated;
    a.popularity.followers = state.followers;
    return a;
  }
};

std::vector<ActionText> generate_actions(const PolicyStep& policy, std::span<const AgentState> states,
                                         std::size_t fanout) {
  std::vector<ActionText> out(states.size());
  if (fanout <= 1) {
    for (std::size_t i = 0; i < states.size(); ++i) out[i] = policy.act(states[i], i);
    return out;
  }
  std::exception_ptr failure;
  const auto n = static_cast<std::ptrdiff_t>(states.size());
#pragma omp parallel for num_threads(static_cast<int>(fanout)) schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = policy.act(states[static_cast<std::size_t>(i)], static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(mfsim_fanout_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

struct Prefix {
  const Trajectory* parent = nullptr;
  std::size_t last_step = 0;  // steps 0..last_step come from the prefix
};

Trajectory simulate(const Event& event, SimulationConfig cfg, const Backends& backends,
                    const InterventionSchedule& schedule, const RunOptions& options,
                    std::optional<std::size_t> fork_step, const Trajectory* parent) {
  cfg.validate();
  cfg.warmup_steps = cfg.effective_warmup();
  const std::size_t T = cfg.horizon;
  const std::size_t warm = *cfg.warmup_steps;
  schedule.validate(T, cfg.batch_size, fork_step.value_or(0));
  options.popularity.validate();
  if (options.fanout < 1) throw ArgumentError("fanout must be >= 1");
  if (event.timeline.empty()) throw ArgumentError("event " + event.event_id + " has an empty timeline");

  const bool generates = warm + 1 < T;
  if (generates && !backends.policy) throw ArgumentError("a policy backend is required past warm-up");
  if (cfg.strategy == ContextStrategy::mean_field && !backends.mean_field && generates) {
    throw ArgumentError("the mean_field strategy needs a mean-field backend");
  }
  if (backends.policy && backends.policy->capabilities().symbolic &&
      (cfg.strategy == ContextStrategy::recent_k || cfg.strategy == ContextStrategy::popular_k)) {
    throw ArgumentError("symbolic policies support mean_field, state_only and sft contexts only");
  }
  if (parent) {
    if (parent->event_id != event.event_id) throw ArgumentError("parent trajectory belongs to another event");
    if (parent->steps.size() < std::min(warm + 1, T)) {
      throw ArgumentError("parent trajectory is shorter than the fork prefix");
    }
  }

  const bool symbolic_mf = backends.mean_field && backends.mean_field->capabilities().symbolic;

  Trajectory traj;
  traj.event_id = event.event_id;
  traj.topic = event.topic;
  traj.config = cfg;
  traj.fork_step = fork_step;

  std::vector<ActionText> history;
  MeanFieldState m = symbolic_mf ? MeanFieldState::symbol(0, 0) : MeanFieldState::empty();
  std::vector<AgentState> states;

  try {
    for (std::size_t t = 0; t < T; ++t) {
      StepRecord record;
      std::vector<ActionText> actions;
      if (parent && t <= warm) {
        const auto& src = parent->steps[t];
        m = src.mean_field;
        states = src.states;
        actions = src.actions;
        record.broadcasts = src.broadcasts;
      } else if (t <= warm) {
        const auto block = step_block(event, t, cfg.batch_size);
        if (block.empty()) {
          throw HorizonError("event " + event.event_id + " has no ground truth for warm-up step " +
                             std::to_string(t));
        }
        states = states_from_block(block, event.topic);
        for (std::size_t i = 0; i < block.size(); ++i) {
          ActionText a = block[i].action;
          a.author_index = i;
          a.step = t;
          a.provenance = Provenance::ground_truth;
          actions.push_back(std::move(a));
        }
      } else {
        states = advance_states(event, t - 1, cfg);
        const auto context = build_context(cfg.strategy, history, m, cfg.k, options.popularity);
        const PolicyStep policy{*backends.policy, cfg, context, m, t};
        actions = generate_actions(policy, states, options.fanout);
      }
      auto applied = apply_interventions(schedule, t, std::move(actions));
      record.states = states;
      record.actions = std::move(applied.actions);
      for (auto& b : applied.broadcasts) record.broadcasts.push_back(std::move(b));
      record.mean_field = m;

      history.insert(history.end(), record.actions.begin(), record.actions.end());
      traj.steps.push_back(record);
      if (options.on_step) options.on_step(traj.steps.back(), t);

      if (t + 1 == T) break;
      if (parent && t < warm) continue;  // next m comes from the parent
      if (backends.mean_field) {
        std::vector<ActionText> observed = record.actions;
        observed.insert(observed.end(), record.broadcasts.begin(), record.broadcasts.end());
        m = update_mean_field(m, event.topic, record.states, observed, *backends.mean_field, cfg);
      } else {
        m = MeanFieldState::text({}, t + 1);
      }
    }
  } catch (const std::exception& e) {
    throw SimulationError("simulation of " + event.event_id + " aborted at step " +
                              std::to_string(traj.steps.size()) + ": " + e.what(),
                          std::move(traj), std::current_exception());
  }
  return traj;
}

}  // namespace

Trajectory run_simulation(const Event& event, const SimulationConfig& cfg, const Backends& backends,
                          const InterventionSchedule& schedule, const RunOptions& options) {
  return simulate(event, cfg, backends, schedule, options, std::nullopt, nullptr);
}

Trajectory fork_trajectory(const Event& event, const Trajectory* parent, std::size_t start_step,
                           const SimulationConfig& cfg, const Backends& backends,
                           const InterventionSchedule& schedule, const RunOptions& options) {
  if (start_step > cfg.horizon) {
    throw ArgumentError("fork step " + std::to_string(start_step) + " is beyond the horizon");
  }
  SimulationConfig forked = cfg;
  forked.warmup_steps = start_step;
  return simulate(event, forked, backends, schedule, options, start_step, parent);
}

Trajectory ground_truth_trajectory(const Event& event, std::size_t batch_size, std::size_t horizon,
                                   std::shared_ptr<const GenerativeBackend> mean_field,
                                   std::uint64_t seed) {
  SimulationConfig cfg;
  cfg.batch_size = batch_size;
  cfg.horizon = horizon == 0 ? step_count(event, batch_size) : horizon;
  cfg.warmup_steps = cfg.horizon;
  cfg.seed = seed;
  cfg.strategy = ContextStrategy::state_only;
  return run_simulation(event, cfg, Backends{nullptr, std::move(mean_field)});
}

}  // namespace mfsim
