#include "mfsim/config.hpp"

#include <algorithm>

#include "mfsim/json_io.hpp"
#include "mfsim/remote.hpp"

namespace mfsim {

void to_json(nlohmann::json& j, const InterventionEntry& e) {
  j = {{"step", e.step}, {"kind", to_string(e.kind)}, {"actions", e.actions}, {"count", e.count}};
}

void to_json(nlohmann::json& j, const InterventionSchedule& s) {
  j = nlohmann::json::array();
  for (const auto& e : s.entries) j.push_back(e);
}

namespace {

bool is_count(const nlohmann::json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
}

}  // namespace

InterventionSchedule parse_schedule(const nlohmann::json& j) {
  const nlohmann::json* list = &j;
  if (j.is_object()) {
    if (!j.contains("entries")) {
      throw ValidationError("schedule object has no entries", {{std::nullopt, "entries: missing"}});
    }
    list = &j.at("entries");
  }
  if (list->is_null()) return {};
  if (!list->is_array()) {
    throw ValidationError("schedule must be an array", {{std::nullopt, "entries: not an array"}});
  }

  InterventionSchedule s;
  std::vector<Violation> bad;
  for (std::size_t i = 0; i < list->size(); ++i) {
    const auto& item = (*list)[i];
    const std::string at = "entries[" + std::to_string(i) + "]";
    if (!item.is_object()) {
      bad.push_back({std::nullopt, at + ": not an object"});
      continue;
    }
    InterventionEntry e;
    if (!item.contains("step") || !is_count(item.at("step"))) {
      bad.push_back({std::nullopt, at + ".step: missing or not a non-negative integer"});
    } else {
      e.step = item.at("step").get<std::size_t>();
    }
    const auto kind = item.value("kind", std::string("seed_agents"));
    if (const auto k = enum_from_string<InterventionKind>(kind)) {
      e.kind = *k;
    } else {
      bad.push_back({e.step, at + ".kind: unknown kind '" + kind + "'"});
    }
    if (!item.contains("actions") || !item.at("actions").is_array()) {
      bad.push_back({e.step, at + ".actions: missing or not an array"});
    } else {
      for (const auto& a : item.at("actions")) {
        if (!a.is_string()) {
          bad.push_back({e.step, at + ".actions: entries must be strings"});
          break;
        }
        e.actions.push_back(a.get<std::string>());
      }
    }
    if (item.contains("count")) {
      if (is_count(item.at("count"))) {
        e.count = item.at("count").get<std::size_t>();
      } else {
        bad.push_back({e.step, at + ".count: not a non-negative integer"});
      }
    } else if (e.kind == InterventionKind::seed_agents) {
      e.count = e.actions.size();
    }
    s.entries.push_back(std::move(e));
  }
  if (!bad.empty()) {
    std::string what = "invalid intervention schedule:";
    for (const auto& v : bad) what += " " + v.message + ";";
    throw ValidationError(what, std::move(bad));
  }
  return s;
}

InterventionSchedule load_schedule(const std::filesystem::path& path) { return parse_schedule(read_json_file(path)); }

AppConfig AppConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ArgumentError("config must be a JSON object");
  AppConfig c;
  c.base_dir = base_dir;
  try {
    if (j.contains("simulation")) c.simulation = j.at("simulation").get<SimulationConfig>();
    if (j.contains("policy_backend")) c.policy_backend = j.at("policy_backend");
    if (j.contains("mean_field_backend")) c.mean_field_backend = j.at("mean_field_backend");
    if (j.contains("judge")) c.judge = j.at("judge");
    if (j.contains("schema")) c.schema = j.at("schema");
    c.fanout = j.value("fanout", c.fanout);
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("config: ") + e.what());
  }
  if (c.fanout < 1) throw ArgumentError("config: fanout must be >= 1");
  return c;
}

AppConfig AppConfig::load(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = read_json_file(path);
  } catch (const ParseError& e) {
    throw ArgumentError(e.what());
  }
  return from_json(j, path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

nlohmann::json AppConfig::to_json() const {
  return {{"simulation", simulation},
          {"policy_backend", policy_backend},
          {"mean_field_backend", mean_field_backend},
          {"judge", judge},
          {"schema", schema},
          {"fanout", fanout}};
}

namespace {

std::shared_ptr<const ToyModelParams> load_params(const nlohmann::json& ref, const std::filesystem::path& base) {
  nlohmann::json j = ref;
  if (ref.is_string()) {
    std::filesystem::path p = ref.get<std::string>();
    if (p.is_relative()) p = base / p;
    j = read_json_file(p);
  }
  auto params = std::make_shared<ToyModelParams>(j.get<ToyModelParams>());
  params->validate();
  return params;
}

}  // namespace

std::shared_ptr<const GenerativeBackend> make_backend(const nlohmann::json& spec, ToyHead head,
                                                      const std::filesystem::path& base_dir) {
  if (spec.is_null()) return nullptr;
  const auto kind = spec.value("kind", std::string("none"));
  try {
    if (kind == "none") return nullptr;
    if (kind == "toy") return std::make_shared<ToyBackend>(load_params(spec.at("params"), base_dir), head);
    if (kind == "scripted") {
      std::optional<std::string> fallback;
      if (spec.contains("fallback")) fallback = spec.at("fallback").get<std::string>();
      return std::make_shared<ScriptedBackend>(
          spec.value("table", std::map<std::string, std::string>{}), fallback);
    }
    if (kind == "remote") return std::make_shared<RemoteBackend>(RemoteConfig::from_json(spec));
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError("backend '" + kind + "': " + e.what());
  }
  throw ArgumentError("unknown backend kind '" + kind + "'");
}

Backends make_backends(const AppConfig& config) {
  return {make_backend(config.policy_backend, ToyHead::policy, config.base_dir),
          make_backend(config.mean_field_backend, ToyHead::mean_field, config.base_dir)};
}

std::unique_ptr<Judge> make_judge(const nlohmann::json& spec, const std::filesystem::path& base_dir,
                                  std::uint64_t seed) {
  const auto kind = spec.is_null() ? std::string("mock") : spec.value("kind", std::string("mock"));
  if (kind == "mock") {
    return std::make_unique<MockJudge>(spec.is_object() ? spec.value("toy_dimension", std::size_t{0}) : 0);
  }
  if (kind == "remote") {
    if (!spec.contains("backend")) throw ArgumentError("remote judge needs a \"backend\" object");
    auto backend = make_backend(spec.at("backend"), ToyHead::policy, base_dir);
    if (!backend) throw ArgumentError("remote judge backend is 'none'");
    LlmJudgeOptions opts;
    opts.batch_size = spec.value("batch_size", opts.batch_size);
    opts.max_attempts = spec.value("max_attempts", opts.max_attempts);
    opts.seed = seed;
    return std::make_unique<LlmJudge>(std::move(backend), opts);
  }
  throw ArgumentError("unknown judge kind '" + kind + "'");
}

namespace {

DimensionSchema schema_for_texts(const std::vector<const std::string*>& texts) {
  int top = -1;
  for (const auto* t : texts) {
    const auto s = toy::parse_action(*t);
    if (!s) return DimensionSchema::standard();
    top = std::max(top, *s);
  }
  if (top < 0) return DimensionSchema::standard();
  return DimensionSchema::toy(std::max<std::size_t>(2, static_cast<std::size_t>(top) + 1));
}

DimensionSchema resolve(const nlohmann::json& s, const DimensionSchema& fallback) {
  if (s.is_null()) return fallback;
  if (s.is_string()) {
    if (s == "standard") return DimensionSchema::standard();
    if (s == "toy") {
      if (fallback == DimensionSchema::standard()) throw ArgumentError("schema 'toy' needs symbolic actions");
      return fallback;
    }
    throw ArgumentError("unknown schema '" + s.get<std::string>() + "'");
  }
  try {
    return s.get<DimensionSchema>();
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("schema: ") + e.what());
  }
}

}  // namespace

DimensionSchema default_schema(const Corpus& corpus) {
  std::vector<const std::string*> texts;
  for (const auto& e : corpus.events) {
    for (const auto& entry : e.timeline) texts.push_back(&entry.action.text);
  }
  return schema_for_texts(texts);
}

DimensionSchema default_schema(const Trajectory& trajectory) {
  std::vector<const std::string*> texts;
  for (const auto& step : trajectory.steps) {
    for (const auto& a : step.actions) texts.push_back(&a.text);
  }
  return schema_for_texts(texts);
}

DimensionSchema resolve_schema(const AppConfig& config, const Corpus& corpus) {
  return resolve(config.schema, default_schema(corpus));
}

DimensionSchema resolve_schema(const AppConfig& config, const Trajectory& trajectory) {
  return resolve(config.schema, default_schema(trajectory));
}

SimulationConfig apply_overrides(const SimulationConfig& base, const nlohmann::json& overrides) {
  if (overrides.is_null()) return base;
  if (!overrides.is_object()) throw ArgumentError("config overrides must be an object");
  nlohmann::json j = base;
  j.merge_patch(overrides);
  SimulationConfig out;
  try {
    out = j.get<SimulationConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("config: ") + e.what());
  }
  return out;
}

}  // namespace mfsim
