#include "mfsim/json_io.hpp"

#include <sstream>

namespace mfsim {

void to_json(json& j, const AgentProfile& p) {
  j = json{{"location", p.location},
           {"description", p.description},
           {"gender", to_string(p.gender)},
           {"friends_level", to_string(p.friends_level)},
           {"influence_level", to_string(p.influence_level)},
           {"activity_level", to_string(p.activity_level)},
           {"verified", p.verified},
           {"verification_type", p.verification_type ? json(*p.verification_type) : json(nullptr)}};
}

void from_json(const json& j, AgentProfile& p) {
  p.location = j.at("location").get<std::string>();
  p.description = j.at("description").get<std::string>();
  p.gender = parse_enum<Gender>(j.at("gender").get<std::string>(), "gender");
  p.friends_level = parse_enum<FriendsLevel>(j.at("friends_level").get<std::string>(), "friends_level");
  p.influence_level =
      parse_enum<InfluenceLevel>(j.at("influence_level").get<std::string>(), "influence_level");
  p.activity_level =
      parse_enum<ActivityLevel>(j.at("activity_level").get<std::string>(), "activity_level");
  p.verified = j.at("verified").get<bool>();
  const auto& vt = j.at("verification_type");
  p.verification_type = vt.is_null() ? std::nullopt : std::optional(vt.get<std::int64_t>());
}

void to_json(json& j, const AgentState& s) {
  j = json{{"profile", s.profile},
           {"topic", s.topic},
           {"rendered_state", s.rendered_state},
           {"followers", s.followers}};
}

void from_json(const json& j, AgentState& s) {
  s.profile = j.at("profile").get<AgentProfile>();
  s.topic = j.at("topic").get<std::string>();
  s.rendered_state = j.at("rendered_state").get<std::string>();
  s.followers = j.value("followers", std::int64_t{0});
}

void to_json(json& j, const Popularity& p) {
  j = json{{"followers", p.followers}, {"replies", p.replies}, {"likes", p.likes}};
}

void from_json(const json& j, Popularity& p) {
  p.followers = j.value("followers", std::int64_t{0});
  p.replies = j.value("replies", std::int64_t{0});
  p.likes = j.value("likes", std::int64_t{0});
}

void to_json(json& j, const ActionText& a) {
  j = json{{"text", a.text},
           {"author_index", a.author_index},
           {"step", a.step},
           {"provenance", to_string(a.provenance)},
           {"popularity", a.popularity}};
}

void from_json(const json& j, ActionText& a) {
  a.text = j.at("text").get<std::string>();
  a.author_index = j.at("author_index").get<std::size_t>();
  a.step = j.at("step").get<std::size_t>();
  a.provenance = parse_enum<Provenance>(j.at("provenance").get<std::string>(), "provenance");
  a.popularity = j.contains("popularity") ? j.at("popularity").get<Popularity>() : Popularity{};
}

void to_json(json& j, const MeanFieldState& m) {
  j = json{{"step", m.step}};
  if (m.is_symbolic()) {
    j["symbol"] = m.symbol_value();
  } else {
    j["text"] = m.text_value();
  }
}

void from_json(const json& j, MeanFieldState& m) {
  m.step = j.at("step").get<std::size_t>();
  if (j.contains("symbol")) {
    m.content = j.at("symbol").get<int>();
  } else {
    m.content = j.at("text").get<std::string>();
  }
}

void to_json(json& j, const SimulationConfig& c) {
  j = json{{"batch_size", c.batch_size},
           {"horizon", c.horizon},
           {"warmup_steps", c.warmup_steps ? json(*c.warmup_steps) : json(nullptr)},
           {"seed", c.seed},
           {"context_strategy", to_string(c.strategy)},
           {"k", c.k},
           {"temperature", c.temperature},
           {"resample_states", c.resample_states},
           {"word_cap", c.word_cap}};
}

void from_json(const json& j, SimulationConfig& c) {
  c.batch_size = j.value("batch_size", c.batch_size);
  c.horizon = j.value("horizon", c.horizon);
  if (j.contains("warmup_steps") && !j.at("warmup_steps").is_null()) {
    c.warmup_steps = j.at("warmup_steps").get<std::size_t>();
  }
  c.seed = j.value("seed", c.seed);
  if (j.contains("context_strategy")) {
    c.strategy = parse_enum<ContextStrategy>(j.at("context_strategy").get<std::string>(),
                                             "context_strategy");
  }
  c.k = j.value("k", c.k);
  c.temperature = j.value("temperature", c.temperature);
  c.resample_states = j.value("resample_states", c.resample_states);
  c.word_cap = j.value("word_cap", c.word_cap);
}

void to_json(json& j, const StepRecord& r) {
  j = json{{"states", r.states},
           {"actions", r.actions},
           {"broadcasts", r.broadcasts},
           {"mean_field", r.mean_field}};
}

void from_json(const json& j, StepRecord& r) {
  r.states = j.at("states").get<std::vector<AgentState>>();
  r.actions = j.at("actions").get<std::vector<ActionText>>();
  r.broadcasts = j.value("broadcasts", std::vector<ActionText>{});
  r.mean_field = j.at("mean_field").get<MeanFieldState>();
}

json trajectory_header(const Trajectory& t) {
  return json{{"kind", "header"},
              {"event_id", t.event_id},
              {"topic", t.topic},
              {"config", t.config},
              {"fork_step", t.fork_step ? json(*t.fork_step) : json(nullptr)},
              {"parent_run", t.parent_run ? json(*t.parent_run) : json(nullptr)}};
}

json step_line(const StepRecord& r, std::size_t step) {
  json j = r;
  j["kind"] = "step";
  j["step"] = step;
  return j;
}

std::string serialize_steps(const Trajectory& t) {
  std::string out;
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    out += step_line(t.steps[i], i).dump();
    out += '\n';
  }
  return out;
}

std::string serialize_trajectory(const Trajectory& t) {
  return trajectory_header(t).dump() + "\n" + serialize_steps(t);
}

Trajectory parse_trajectory(std::istream& in) {
  Trajectory t;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(e.what(), line_no);
    }
    try {
      const auto kind = j.at("kind").get<std::string>();
      if (kind == "header") {
        t.event_id = j.at("event_id").get<std::string>();
        t.topic = j.value("topic", std::string{});
        t.config = j.at("config").get<SimulationConfig>();
        if (!j.at("fork_step").is_null()) t.fork_step = j.at("fork_step").get<std::size_t>();
        if (!j.at("parent_run").is_null()) t.parent_run = j.at("parent_run").get<std::string>();
        have_header = true;
      } else if (kind == "step") {
        if (!have_header) throw ParseError("step line before header", line_no);
        if (j.at("step").get<std::size_t>() != t.steps.size()) {
          throw ParseError("step lines out of order", line_no);
        }
        t.steps.push_back(j.get<StepRecord>());
      } else {
        throw ParseError("unknown line kind '" + kind + "'", line_no);
      }
    } catch (const json::exception& e) {
      throw ParseError(e.what(), line_no);
    } catch (const ArgumentError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  if (!have_header) throw ParseError("missing trajectory header", line_no);
  return t;
}

Trajectory read_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open trajectory file " + path.string());
  return parse_trajectory(in);
}

void write_trajectory(const std::filesystem::path& path, const Trajectory& t) {
  write_text_file(path, serialize_trajectory(t));
}

TrajectoryWriter::TrajectoryWriter(const std::filesystem::path& path, const Trajectory& header)
    : out_(path, std::ios::trunc) {
  if (!out_) throw ArgumentError("cannot write trajectory file " + path.string());
  out_ << trajectory_header(header).dump() << '\n' << std::flush;
}

void TrajectoryWriter::append(const StepRecord& record, std::size_t step) {
  out_ << step_line(record, step).dump() << '\n' << std::flush;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(path.string()) + ": " + e.what(), 1);
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw ArgumentError("cannot write " + path.string());
  out << text;
}

}  // namespace mfsim
