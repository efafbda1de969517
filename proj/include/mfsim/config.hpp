#pragma once

// Run configuration files: simulation defaults, backend and judge selection, and the JSON
// form of intervention schedules.
//
//   {
//     "simulation": {"horizon": 30, "batch_size": 16, ...},
//     "policy_backend": {"kind": "toy", "params": "params.json"},
//     "mean_field_backend": {"kind": "toy", "params": "params.json"},
//     "judge": {"kind": "mock"},
//     "schema": "toy",
//     "fanout": 4
//   }
//
// Backend kinds: toy (params file or inline object), scripted (table + fallback),
// remote (see RemoteConfig::from_json), none. Relative paths resolve against the file.

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "mfsim/backends.hpp"
#include "mfsim/corpus.hpp"
#include "mfsim/engine.hpp"
#include "mfsim/judge.hpp"

namespace mfsim {

void to_json(nlohmann::json& j, const InterventionEntry& e);
void to_json(nlohmann::json& j, const InterventionSchedule& s);

/// Accepts an array of entries or {"entries": [...]}. Structural problems raise
/// ValidationError with "entries[i].field" paths, like InterventionSchedule::validate.
InterventionSchedule parse_schedule(const nlohmann::json& j);
InterventionSchedule load_schedule(const std::filesystem::path& path);

struct AppConfig {
  SimulationConfig simulation;
  nlohmann::json policy_backend = {{"kind", "none"}};
  nlohmann::json mean_field_backend = {{"kind", "none"}};
  nlohmann::json judge = {{"kind", "mock"}};
  // "standard", "toy", an inline schema object, or null to pick from the corpus.
  nlohmann::json schema;
  std::size_t fanout = 1;
  std::filesystem::path base_dir = ".";

  static AppConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
  /// Throws ArgumentError naming the file when it cannot be read or parsed.
  static AppConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

/// nullptr for kind "none".
std::shared_ptr<const GenerativeBackend> make_backend(const nlohmann::json& spec, ToyHead head,
                                                      const std::filesystem::path& base_dir);
Backends make_backends(const AppConfig& config);

/// kind "mock" or "remote" (the latter takes a "backend" object in make_backend form, plus
/// optional batch_size / max_attempts).
std::unique_ptr<Judge> make_judge(const nlohmann::json& spec, const std::filesystem::path& base_dir,
                                  std::uint64_t seed);

/// Toy schema sized to the largest action symbol when every action is a toy symbol, the
/// standard eight dimensions otherwise.
DimensionSchema default_schema(const Corpus& corpus);
DimensionSchema default_schema(const Trajectory& trajectory);
DimensionSchema resolve_schema(const AppConfig& config, const Corpus& corpus);
DimensionSchema resolve_schema(const AppConfig& config, const Trajectory& trajectory);

/// Applies a JSON merge patch to the config's JSON form and re-reads it.
SimulationConfig apply_overrides(const SimulationConfig& base, const nlohmann::json& overrides);

}  // namespace mfsim
