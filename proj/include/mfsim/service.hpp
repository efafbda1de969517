#pragma once

// Filesystem run store and the HTTP service behind the intervention console.
//
// Layout: <run_dir>/<run_id>/record.json and <run_id>/trajectory.jsonl. Ids are sequential
// ("run-0001", ...) and never reused; records found on startup that were still pending or
// running are marked failed.

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "mfsim/config.hpp"
#include "mfsim/corpus.hpp"
#include "mfsim/engine.hpp"
#include "mfsim/judge.hpp"
#include "mfsim/metrics.hpp"

namespace httplib {
class Server;
}

namespace mfsim {

enum class RunStatus { pending, running, done, failed };

template <>
struct EnumNames<RunStatus> {
  static constexpr std::array<std::string_view, 4> names{"pending", "running", "done", "failed"};
};

struct RunRecord {
  std::string run_id;
  std::string event_id;
  SimulationConfig config;
  RunStatus status = RunStatus::pending;
  std::filesystem::path trajectory_path;
  std::optional<std::string> parent_run;
  std::optional<std::size_t> fork_step;
  std::optional<InterventionSchedule> schedule;
  std::string error;  // set when failed

  /// Throws ArgumentError when fork_step and parent_run disagree on presence.
  void validate() const;
  nlohmann::json to_json() const;
  static RunRecord from_json(const nlohmann::json& j);
};

/// A request the service rejects; `status` is the HTTP code to answer with.
class RequestError : public Error {
 public:
  struct Field {
    std::string path;
    std::string message;
  };
  RequestError(int status, const std::string& what, std::vector<Field> fields = {})
      : Error(what), status_(status), fields_(std::move(fields)) {}
  int status() const { return status_; }
  const std::vector<Field>& fields() const { return fields_; }
  nlohmann::json body() const;

 private:
  int status_;
  std::vector<Field> fields_;
};

struct ServiceOptions {
  std::filesystem::path run_dir = "runs";
  std::size_t workers = 2;
};

class Service {
 public:
  Service(Corpus corpus, AppConfig config, ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Queues a run. `config` is merged over the configured simulation defaults.
  std::string submit(const std::string& event_id, const nlohmann::json& config,
                     const nlohmann::json& schedule);
  /// Queues a child run replaying the parent's steps 0..start_step. The parent must be done,
  /// or still running with that prefix already persisted.
  std::string fork(const std::string& parent_id, std::size_t start_step, const nlohmann::json& schedule,
                   const nlohmann::json& config_overrides);

  RunRecord get(const std::string& run_id) const;
  std::vector<RunRecord> list() const;
  /// Steps persisted so far (the whole run once done).
  Trajectory trajectory(const std::string& run_id) const;
  /// Against `baseline` when given, else against the event's ground truth. 409 until done.
  MetricReport metrics(const std::string& run_id, const std::optional<std::string>& baseline) const;
  nlohmann::json events() const;
  const DimensionSchema& schema() const { return schema_; }

  /// Blocks until the run leaves pending/running or the timeout passes; true when it did.
  bool wait(const std::string& run_id, std::chrono::milliseconds timeout) const;

  /// Registers the /api routes.
  void mount(httplib::Server& server);

 private:
  struct Job {
    std::string run_id;
    InterventionSchedule schedule;
    std::optional<Trajectory> parent_prefix;
  };

  std::string next_id();
  void save(const RunRecord& record) const;
  void set_status(const std::string& run_id, RunStatus status, const std::string& error = {});
  std::string enqueue(RunRecord record, Job job);
  void worker_loop();
  void execute(const Job& job);
  const Event& event(const std::string& event_id) const;

  Corpus corpus_;
  AppConfig config_;
  ServiceOptions options_;
  Backends backends_;
  std::unique_ptr<Judge> judge_;
  DimensionSchema schema_;

  mutable std::mutex mu_;
  mutable std::condition_variable changed_;
  std::condition_variable queued_;
  std::map<std::string, RunRecord> runs_;
  std::deque<Job> queue_;
  std::size_t last_id_ = 0;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
};

/// Binds host:port (Error when the port is taken), then serves until the server is stopped.
void serve(Service& service, httplib::Server& server, const std::string& host, int port);

}  // namespace mfsim
