#pragma once

// JSON mappings for the core types and the trajectory JSONL format.
//
// A trajectory file is one header line followed by one line per step:
//   {"kind":"header","event_id":...,"topic":...,"config":{...},"fork_step":...,"parent_run":...}
//   {"kind":"step","step":t,"states":[...],"actions":[...],"broadcasts":[...],"mean_field":{...}}
// Keys are emitted in sorted order so equal trajectories serialize byte-identically.

#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "mfsim/core.hpp"

namespace mfsim {

using json = nlohmann::json;

void to_json(json& j, const AgentProfile& p);
void from_json(const json& j, AgentProfile& p);
void to_json(json& j, const AgentState& s);
void from_json(const json& j, AgentState& s);
void to_json(json& j, const Popularity& p);
void from_json(const json& j, Popularity& p);
void to_json(json& j, const ActionText& a);
void from_json(const json& j, ActionText& a);
void to_json(json& j, const MeanFieldState& m);
void from_json(const json& j, MeanFieldState& m);
void to_json(json& j, const SimulationConfig& c);
/// Missing keys keep their defaults, so partial config files are valid.
void from_json(const json& j, SimulationConfig& c);
void to_json(json& j, const StepRecord& r);
void from_json(const json& j, StepRecord& r);

json trajectory_header(const Trajectory& t);
json step_line(const StepRecord& r, std::size_t step);

std::string serialize_trajectory(const Trajectory& t);
/// Only the step lines; what prefix/equality checks compare.
std::string serialize_steps(const Trajectory& t);
Trajectory parse_trajectory(std::istream& in);
Trajectory read_trajectory(const std::filesystem::path& path);
void write_trajectory(const std::filesystem::path& path, const Trajectory& t);

/// Append-only writer: the header goes out on open and each step is flushed as it completes,
/// so an aborted run leaves a readable prefix.
class TrajectoryWriter {
 public:
  TrajectoryWriter(const std::filesystem::path& path, const Trajectory& header);
  void append(const StepRecord& record, std::size_t step);

 private:
  std::ofstream out_;
};

json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace mfsim
