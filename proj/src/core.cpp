#include "mfsim/core.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>

namespace mfsim {

FriendsLevel friends_level_from_count(std::int64_t friends) {
  if (friends < 10) return FriendsLevel::very_few;
  if (friends <= 30) return FriendsLevel::few;
  if (friends <= 1000) return FriendsLevel::moderate;
  if (friends <= 3000) return FriendsLevel::many;
  return FriendsLevel::very_many;
}

InfluenceLevel influence_level_from_count(std::int64_t followers) {
  // The published buckets leave exactly 100 unassigned; it joins "very low".
  if (followers <= 100) return InfluenceLevel::very_low;
  if (followers <= 500) return InfluenceLevel::low;
  if (followers <= 1000) return InfluenceLevel::moderate;
  if (followers <= 10000) return InfluenceLevel::high;
  return InfluenceLevel::very_high;
}

ActivityLevel activity_level_from_count(std::int64_t interactions) {
  if (interactions < 10) return ActivityLevel::inactive;
  if (interactions <= 100) return ActivityLevel::moderately_active;
  return ActivityLevel::highly_active;
}

std::int64_t representative_count(FriendsLevel level) {
  static constexpr std::array<std::int64_t, 5> kLow{0, 10, 31, 1001, 3001};
  return kLow[static_cast<std::size_t>(level)];
}

std::int64_t representative_count(InfluenceLevel level) {
  static constexpr std::array<std::int64_t, 5> kLow{0, 101, 501, 1001, 10001};
  return kLow[static_cast<std::size_t>(level)];
}

std::int64_t representative_count(ActivityLevel level) {
  static constexpr std::array<std::int64_t, 3> kLow{0, 10, 101};
  return kLow[static_cast<std::size_t>(level)];
}

namespace {

std::string words_of(std::string_view name) {
  std::string out(name);
  std::replace(out.begin(), out.end(), '_', ' ');
  return out;
}

}  // namespace

std::string render_profile(const AgentProfile& p) {
  std::string verified = "non-verified";
  if (p.verified) {
    verified = "verified";
    if (p.verification_type) {
      verified += " (verification type " + std::to_string(*p.verification_type) + ")";
    }
  }
  std::string out;
  out.reserve(256);
  out += "A user from ";
  out += p.location;
  out += ", described as ";
  out += p.description;
  out += ", identified as ";
  out += to_string(p.gender);
  out += ", with a ";
  out += words_of(to_string(p.friends_level));
  out += " number of friends and a ";
  out += words_of(to_string(p.influence_level));
  out += " level of influence based on followers. The user is ";
  out += words_of(to_string(p.activity_level));
  out += " in terms of interactions, and the account is ";
  out += verified;
  out += ".";
  return out;
}

AgentState make_agent_state(const AgentProfile& profile, std::string topic,
                            std::int64_t followers) {
  AgentState state;
  state.profile = profile;
  state.topic = std::move(topic);
  state.rendered_state = render_profile(profile);
  state.followers = followers;
  return state;
}

std::string MeanFieldState::display() const {
  if (is_symbolic()) return toy::mean_field_text(symbol_value());
  return text_value();
}

namespace {
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
}  // namespace

std::size_t word_count(std::string_view text) {
  std::size_t count = 0;
  bool in_word = false;
  for (char c : text) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++count;
    }
  }
  return count;
}

std::string truncate_words(std::string_view text, std::size_t cap) {
  std::size_t count = 0;
  bool in_word = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (is_space(text[i])) {
      if (in_word && count == cap) return std::string(text.substr(0, i));
      in_word = false;
    } else if (!in_word) {
      if (count == cap) return std::string(text.substr(0, i));
      in_word = true;
      ++count;
    }
  }
  return std::string(text);
}

namespace {

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return is_space(c); });
}

}  // namespace

std::vector<Violation> validate_event(const Event& event) {
  std::vector<Violation> out;
  if (event.event_id.empty()) out.push_back({std::nullopt, "event_id is empty"});
  bool inversion_reported = false;
  for (std::size_t i = 0; i < event.timeline.size(); ++i) {
    const auto& action = event.timeline[i].action;
    if (blank(action.text)) {
      out.push_back({action.step, "action text is empty"});
    }
    if (action.provenance != Provenance::ground_truth) {
      out.push_back({action.step, "timeline action is not ground truth"});
    }
    if (i > 0 && !inversion_reported && action.step <= event.timeline[i - 1].action.step) {
      out.push_back({action.step, "steps not strictly increasing (step " +
                                      std::to_string(action.step) + " follows step " +
                                      std::to_string(event.timeline[i - 1].action.step) + ")"});
      inversion_reported = true;
    }
  }
  return out;
}

std::size_t SimulationConfig::effective_warmup() const {
  if (warmup_steps) return *warmup_steps;
  return static_cast<std::size_t>(std::ceil(0.2 * static_cast<double>(horizon)));
}

void SimulationConfig::validate() const {
  if (batch_size < 1) throw ArgumentError("batch_size must be >= 1");
  if (horizon < 1) throw ArgumentError("horizon must be >= 1");
  if (effective_warmup() > horizon) throw ArgumentError("warmup_steps exceeds horizon");
  const bool uses_k = strategy == ContextStrategy::recent_k || strategy == ContextStrategy::popular_k;
  if (!uses_k && k != 0) throw ArgumentError("k must be 0 unless strategy is recent_k or popular_k");
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
    throw ArgumentError("temperature must be a non-negative finite number");
  }
  if (word_cap < 1) throw ArgumentError("word_cap must be >= 1");
}

namespace toy {

namespace {

std::optional<int> parse_prefixed(std::string_view text, std::string_view prefix) {
  while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
  while (!text.empty() && is_space(text.back())) text.remove_suffix(1);
  if (!text.starts_with(prefix)) return std::nullopt;
  text.remove_prefix(prefix.size());
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || value < 0) return std::nullopt;
  return value;
}

}  // namespace

std::string action_text(int symbol) { return "act:" + std::to_string(symbol); }
std::optional<int> parse_action(std::string_view text) { return parse_prefixed(text, "act:"); }
std::string state_description(int symbol) { return "state:" + std::to_string(symbol); }
std::optional<int> parse_state(const AgentProfile& profile) {
  return parse_prefixed(profile.description, "state:");
}
std::string mean_field_text(int symbol) { return "mf:" + std::to_string(symbol); }
std::optional<int> parse_mean_field(std::string_view text) { return parse_prefixed(text, "mf:"); }

}  // namespace toy

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t step, std::uint64_t index,
                          SeedStream stream) {
  std::uint64_t h = splitmix(base);
  h = splitmix(h ^ static_cast<std::uint64_t>(stream));
  h = splitmix(h ^ step);
  return splitmix(h ^ (index * 0x2545f4914f6cdd1dULL));
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  // Box-Muller; 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::below(std::size_t n) {
  if (n == 0) throw ArgumentError("Rng::below(0)");
  return static_cast<std::size_t>(uniform() * static_cast<double>(n));
}

std::size_t Rng::categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (weights.empty() || !(total > 0.0)) throw ArgumentError("categorical needs positive mass");
  const double target = uniform() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last_positive = i;
    acc += weights[i];
    if (target < acc) return i;
  }
  return last_positive;
}

}  // namespace mfsim
