#include "mfsim/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

namespace mfsim {

using json = nlohmann::json;

const Event& Corpus::find(const std::string& event_id) const {
  for (const auto& e : events) {
    if (e.event_id == event_id) return e;
  }
  throw ArgumentError("unknown event_id '" + event_id + "'");
}

namespace {

Gender gender_from_string(const std::string& s) {
  if (s == "male" || s == "m" || s == "M") return Gender::male;
  if (s == "female" || s == "f" || s == "F") return Gender::female;
  return Gender::unspecified;
}

TimelineEntry entry_from_json(const json& j) {
  TimelineEntry entry;
  const auto& p = j.at("profile");
  entry.profile.location = p.value("location", std::string{});
  entry.profile.description = p.value("description", std::string{});
  entry.profile.gender = gender_from_string(p.value("gender", std::string{}));
  const auto followers = p.value("followers_count", std::int64_t{0});
  entry.profile.friends_level = friends_level_from_count(p.value("friends_count", std::int64_t{0}));
  entry.profile.influence_level = influence_level_from_count(followers);
  entry.profile.activity_level =
      activity_level_from_count(p.value("interactions_count", std::int64_t{0}));
  entry.profile.verified = p.value("verified", false);
  if (p.contains("verification_type") && !p.at("verification_type").is_null()) {
    entry.profile.verification_type = p.at("verification_type").get<std::int64_t>();
  }
  entry.action.text = j.at("text").get<std::string>();
  entry.action.step = j.at("step").get<std::size_t>();
  entry.action.provenance = Provenance::ground_truth;
  entry.action.popularity.followers = followers;
  entry.action.popularity.replies = j.value("replies", std::int64_t{0});
  entry.action.popularity.likes = j.value("likes", std::int64_t{0});
  return entry;
}

json entry_to_json(const TimelineEntry& e) {
  const auto& p = e.profile;
  // Raw counts are not retained past ingest; emit counts that re-bucket identically.
  std::int64_t followers = e.action.popularity.followers;
  if (influence_level_from_count(followers) != p.influence_level) {
    followers = representative_count(p.influence_level);
  }
  json profile{{"location", p.location},
               {"description", p.description},
               {"gender", to_string(p.gender)},
               {"friends_count", representative_count(p.friends_level)},
               {"followers_count", followers},
               {"interactions_count", representative_count(p.activity_level)},
               {"verified", p.verified},
               {"verification_type",
                p.verification_type ? json(*p.verification_type) : json(nullptr)}};
  json j{{"step", e.action.step}, {"profile", std::move(profile)}, {"text", e.action.text}};
  if (e.action.popularity.replies != 0) j["replies"] = e.action.popularity.replies;
  if (e.action.popularity.likes != 0) j["likes"] = e.action.popularity.likes;
  return j;
}

}  // namespace

Corpus parse_corpus(std::istream& in, CorpusSource source) {
  Corpus corpus;
  corpus.source = source;
  std::vector<Violation> violations;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    Event event;
    try {
      event.event_id = j.at("event_id").get<std::string>();
      event.topic = j.at("topic").get<std::string>();
      event.domain_tag = parse_enum<DomainTag>(j.value("domain_tag", std::string("synthetic")),
                                               "domain_tag");
      for (const auto& entry : j.at("timeline")) event.timeline.push_back(entry_from_json(entry));
    } catch (const json::exception& e) {
      throw ParseError(std::string("schema: ") + e.what(), line_no);
    } catch (const ArgumentError& e) {
      throw ParseError(e.what(), line_no);
    }
    for (auto v : validate_event(event)) {
      v.message = "event " + event.event_id + " (line " + std::to_string(line_no) + "): " + v.message;
      violations.push_back(std::move(v));
    }
    if (!seen.insert(event.event_id).second) {
      violations.push_back({std::nullopt, "duplicate event_id '" + event.event_id + "' (line " +
                                              std::to_string(line_no) + ")"});
    }
    corpus.events.push_back(std::move(event));
  }
  if (!violations.empty()) {
    std::string what = "corpus validation failed:";
    for (const auto& v : violations) what += "\n  " + v.message;
    throw ValidationError(what, std::move(violations));
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open corpus " + path.string());
  return parse_corpus(in);
}

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& e : corpus.events) {
    json timeline = json::array();
    for (const auto& entry : e.timeline) timeline.push_back(entry_to_json(entry));
    json j{{"event_id", e.event_id},
           {"topic", e.topic},
           {"domain_tag", to_string(e.domain_tag)},
           {"timeline", std::move(timeline)}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw ArgumentError("cannot write corpus " + path.string());
  out << serialize_corpus(corpus);
}

std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double train_fraction,
                                       std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ArgumentError("train_fraction must lie in (0, 1)");
  }
  if (corpus.events.empty()) throw ArgumentError("cannot split an empty corpus");
  const std::size_t n = corpus.events.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test_idx(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  Corpus train{{}, corpus.source};
  Corpus test{{}, corpus.source};
  for (auto i : train_idx) train.events.push_back(corpus.events[i]);
  for (auto i : test_idx) test.events.push_back(corpus.events[i]);
  return {std::move(train), std::move(test)};
}

std::vector<AgentState> resample_states(const Event& event, std::size_t count,
                                        std::uint64_t seed) {
  if (count == 0) return {};
  if (event.timeline.empty()) throw ArgumentError("cannot resample states from an empty timeline");
  Rng rng(seed);
  std::vector<AgentState> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& entry = event.timeline[rng.below(event.timeline.size())];
    out.push_back(make_agent_state(entry.profile, event.topic, entry.action.popularity.followers));
  }
  return out;
}

std::span<const double> SyntheticGenConfig::transition_row(std::size_t latent,
                                                           std::size_t majority) const {
  return std::span<const double>(latent_transition)
      .subspan((latent * action_alphabet + majority) * latent_alphabet, latent_alphabet);
}

std::span<const double> SyntheticGenConfig::emission_row(std::size_t state,
                                                         std::size_t latent) const {
  return std::span<const double>(emission)
      .subspan((state * latent_alphabet + latent) * action_alphabet, action_alphabet);
}

namespace {

void check_rows(const std::vector<double>& table, std::size_t rows, std::size_t width,
                const char* name) {
  if (table.size() != rows * width) {
    throw ArgumentError(std::string(name) + " has " + std::to_string(table.size()) +
                        " entries, expected " + std::to_string(rows * width));
  }
  for (std::size_t r = 0; r < rows; ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < width; ++c) {
      const double v = table[r * width + c];
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw ArgumentError(std::string(name) + " row " + std::to_string(r) + " has a negative or non-finite entry");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
      throw ArgumentError(std::string(name) + " row " + std::to_string(r) + " sums to " +
                          std::to_string(sum));
    }
  }
}

std::vector<double> softmax(const std::vector<double>& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) z += (out[i] = std::exp(logits[i] - mx));
  for (auto& v : out) v /= z;
  return out;
}

/// Renormalize so the row sums to 1 to within rounding of a final correction.
void renormalize(std::span<double> row) {
  double sum = 0.0;
  for (double v : row) sum += v;
  for (double& v : row) v /= sum;
  double again = 0.0;
  for (double v : row) again += v;
  auto biggest = std::max_element(row.begin(), row.end());
  *biggest += 1.0 - again;
}

}  // namespace

void SyntheticGenConfig::validate() const {
  if (state_alphabet < 2 || action_alphabet < 2 || latent_alphabet < 2) {
    throw ArgumentError("synthetic alphabets must have at least 2 symbols");
  }
  if (agents_per_step < 1 || steps_per_event < 1) {
    throw ArgumentError("synthetic events need at least one step and one agent");
  }
  if (initial_latent &&
      (*initial_latent < 0 || static_cast<std::size_t>(*initial_latent) >= latent_alphabet)) {
    throw ArgumentError("initial_latent outside the latent alphabet");
  }
  check_rows(latent_transition, latent_alphabet * action_alphabet, latent_alphabet,
             "latent_transition");
  check_rows(emission, state_alphabet * latent_alphabet, action_alphabet, "emission");
}

SyntheticGenConfig SyntheticGenConfig::self_exciting(std::size_t num_events,
                                                     std::size_t steps_per_event,
                                                     std::size_t agents_per_step,
                                                     std::uint64_t seed,
                                                     const SelfExciting& shape) {
  if (!(shape.decay >= 0.0 && shape.volatility >= 0.0 && shape.decay + shape.volatility <= 1.0)) {
    throw ArgumentError("decay and volatility must be non-negative with a sum of at most 1");
  }
  SyntheticGenConfig cfg;
  cfg.num_events = num_events;
  cfg.steps_per_event = steps_per_event;
  cfg.agents_per_step = agents_per_step;
  cfg.seed = seed;
  cfg.action_alphabet = shape.action_alphabet;
  cfg.state_alphabet = shape.state_alphabet;
  cfg.latent_alphabet = 2 * shape.action_alphabet;
  const std::size_t A = shape.action_alphabet;
  const std::size_t M = cfg.latent_alphabet;
  // latent z: favoured action z % A, intensity z / A.
  cfg.emission.assign(cfg.state_alphabet * M * A, 0.0);
  for (std::size_t s = 0; s < cfg.state_alphabet; ++s) {
    for (std::size_t z = 0; z < M; ++z) {
      std::vector<double> logits(A, 0.0);
      logits[s % A] += shape.state_bias;
      logits[z % A] += (z / A == 0) ? shape.weak : shape.strong;
      const auto p = softmax(logits);
      std::span<double> row(cfg.emission.data() + (s * M + z) * A, A);
      std::copy(p.begin(), p.end(), row.begin());
      renormalize(row);
    }
  }
  cfg.latent_transition.assign(M * A * M, 0.0);
  for (std::size_t z = 0; z < M; ++z) {
    const std::size_t favoured = z % A;
    for (std::size_t maj = 0; maj < A; ++maj) {
      std::span<double> row(cfg.latent_transition.data() + (z * A + maj) * M, M);
      if (maj == favoured) {
        row[A + favoured] += 1.0 - shape.decay - shape.volatility;
        row[favoured] += shape.decay;
        for (auto& v : row) v += shape.volatility / static_cast<double>(M);
      } else {
        row[maj] += 0.60;
        row[z] += 0.30;
        for (auto& v : row) v += 0.10 / static_cast<double>(M);
      }
      renormalize(row);
    }
  }
  return cfg;
}

SyntheticGenConfig SyntheticGenConfig::without_feedback() const {
  SyntheticGenConfig out = *this;
  for (std::size_t z = 0; z < latent_alphabet; ++z) {
    std::vector<double> mean(latent_alphabet, 0.0);
    for (std::size_t maj = 0; maj < action_alphabet; ++maj) {
      auto row = transition_row(z, maj);
      for (std::size_t n = 0; n < latent_alphabet; ++n) mean[n] += row[n] / static_cast<double>(action_alphabet);
    }
    for (std::size_t maj = 0; maj < action_alphabet; ++maj) {
      std::span<double> row(out.latent_transition.data() + (z * action_alphabet + maj) * latent_alphabet,
                            latent_alphabet);
      std::copy(mean.begin(), mean.end(), row.begin());
      renormalize(row);
    }
  }
  return out;
}

std::pair<AgentProfile, std::int64_t> synthetic_profile(int symbol) {
  static constexpr std::array<const char*, 6> kRegions{"Beijing", "Shanghai", "Guangdong",
                                                       "Sichuan", "Zhejiang", "Hubei"};
  AgentProfile p;
  const auto s = static_cast<std::size_t>(symbol);
  p.location = kRegions[s % kRegions.size()];
  p.description = toy::state_description(symbol);
  p.gender = (s % 2 == 0) ? Gender::female : Gender::male;
  const std::int64_t friends = 5 + 400 * static_cast<std::int64_t>(s % 5);
  const std::int64_t followers = 60 + 700 * static_cast<std::int64_t>(s * s % 17);
  const std::int64_t interactions = 3 + 40 * static_cast<std::int64_t>(s % 4);
  p.friends_level = friends_level_from_count(friends);
  p.influence_level = influence_level_from_count(followers);
  p.activity_level = activity_level_from_count(interactions);
  p.verified = (s % 3 == 2);
  if (p.verified) p.verification_type = static_cast<std::int64_t>(s % 4);
  return {p, followers};
}

int majority_symbol(std::span<const int> symbols, std::size_t alphabet) {
  std::vector<std::size_t> counts(alphabet, 0);
  for (int s : symbols) {
    if (s >= 0 && static_cast<std::size_t>(s) < alphabet) ++counts[static_cast<std::size_t>(s)];
  }
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

SyntheticCorpus generate_synthetic(const SyntheticGenConfig& cfg) {
  cfg.validate();
  SyntheticCorpus out;
  out.corpus.source = CorpusSource::synthetic;
  Rng rng(cfg.seed);
  for (std::size_t e = 0; e < cfg.num_events; ++e) {
    Event event;
    event.event_id = "syn-" + std::to_string(cfg.seed) + "-" + std::to_string(e);
    event.topic = "Synthetic event " + std::to_string(e);
    event.domain_tag = DomainTag::synthetic;
    std::vector<int> latent_path;
    std::size_t latent = cfg.initial_latent ? static_cast<std::size_t>(*cfg.initial_latent)
                                             : rng.below(cfg.latent_alphabet);
    std::size_t seq = 0;
    std::vector<int> actions(cfg.agents_per_step);
    for (std::size_t t = 0; t < cfg.steps_per_event; ++t) {
      latent_path.push_back(static_cast<int>(latent));
      for (std::size_t i = 0; i < cfg.agents_per_step; ++i) {
        const auto state = static_cast<int>(rng.below(cfg.state_alphabet));
        const auto action = static_cast<int>(
            rng.categorical(cfg.emission_row(static_cast<std::size_t>(state), latent)));
        actions[i] = action;
        auto [profile, followers] = synthetic_profile(state);
        TimelineEntry entry;
        entry.profile = profile;
        entry.action.text = toy::action_text(action);
        entry.action.step = seq++;
        entry.action.provenance = Provenance::ground_truth;
        entry.action.popularity = {followers, static_cast<std::int64_t>(rng.below(20)),
                                   static_cast<std::int64_t>(rng.below(200))};
        event.timeline.push_back(std::move(entry));
      }
      const auto maj = static_cast<std::size_t>(majority_symbol(actions, cfg.action_alphabet));
      latent = rng.categorical(cfg.transition_row(latent, maj));
    }
    out.corpus.events.push_back(std::move(event));
    out.latents.push_back(std::move(latent_path));
  }
  return out;
}

std::size_t step_count(const Event& event, std::size_t batch_size) {
  return (event.timeline.size() + batch_size - 1) / batch_size;
}

std::span<const TimelineEntry> step_block(const Event& event, std::size_t step,
                                          std::size_t batch_size) {
  const std::size_t begin = step * batch_size;
  if (begin >= event.timeline.size()) return {};
  const std::size_t end = std::min(begin + batch_size, event.timeline.size());
  return std::span<const TimelineEntry>(event.timeline).subspan(begin, end - begin);
}

}  // namespace mfsim
