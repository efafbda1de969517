#include "mfsim/service.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <httplib.h>

#include "mfsim/json_io.hpp"

namespace mfsim {

void RunRecord::validate() const {
  if (fork_step.has_value() != parent_run.has_value()) {
    throw ArgumentError("run " + run_id + ": fork_step and parent_run must be set together");
  }
}

nlohmann::json RunRecord::to_json() const {
  nlohmann::json j{{"run_id", run_id},
                   {"event_id", event_id},
                   {"config", config},
                   {"status", to_string(status)},
                   {"trajectory_path", trajectory_path.string()},
                   {"parent_run", parent_run ? nlohmann::json(*parent_run) : nlohmann::json(nullptr)},
                   {"fork_step", fork_step ? nlohmann::json(*fork_step) : nlohmann::json(nullptr)},
                   {"schedule", schedule ? nlohmann::json(*schedule) : nlohmann::json(nullptr)}};
  if (!error.empty()) j["error"] = error;
  return j;
}

RunRecord RunRecord::from_json(const nlohmann::json& j) {
  RunRecord r;
  r.run_id = j.at("run_id").get<std::string>();
  r.event_id = j.at("event_id").get<std::string>();
  r.config = j.at("config").get<SimulationConfig>();
  r.status = parse_enum<RunStatus>(j.at("status").get<std::string>(), "run status");
  r.trajectory_path = j.at("trajectory_path").get<std::string>();
  if (!j.value("parent_run", nlohmann::json()).is_null()) r.parent_run = j.at("parent_run").get<std::string>();
  if (!j.value("fork_step", nlohmann::json()).is_null()) r.fork_step = j.at("fork_step").get<std::size_t>();
  if (!j.value("schedule", nlohmann::json()).is_null()) r.schedule = parse_schedule(j.at("schedule"));
  r.error = j.value("error", std::string{});
  r.validate();
  return r;
}

nlohmann::json RequestError::body() const {
  nlohmann::json j{{"error", what()}};
  if (!fields_.empty()) {
    auto arr = nlohmann::json::array();
    for (const auto& f : fields_) arr.push_back({{"path", f.path}, {"message", f.message}});
    j["fields"] = std::move(arr);
  }
  return j;
}

namespace {

RequestError not_found(const std::string& what) { return RequestError(404, what); }

RequestError bad_field(const std::string& path, const std::string& message) {
  return RequestError(400, path + ": " + message, {{path, message}});
}

// "entries[0].step: ..." -> {"<prefix>.entries[0].step", "..."}.
RequestError schedule_error(const ValidationError& e, const std::string& prefix) {
  std::vector<RequestError::Field> fields;
  for (const auto& v : e.violations()) {
    const auto colon = v.message.find(": ");
    if (colon == std::string::npos) {
      fields.push_back({prefix, v.message});
    } else {
      fields.push_back({prefix + "." + v.message.substr(0, colon), v.message.substr(colon + 2)});
    }
  }
  return RequestError(400, e.what(), std::move(fields));
}

// Tolerates a trailing half-written line from a run still in progress.
Trajectory read_complete_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  const auto last_nl = text.rfind('\n');
  text.resize(last_nl == std::string::npos ? 0 : last_nl + 1);
  std::istringstream lines(text);
  return parse_trajectory(lines);
}

std::string format_id(std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "run-%04zu", n);
  return buf;
}

std::optional<std::size_t> parse_id(const std::string& id) {
  if (id.rfind("run-", 0) != 0 || id.size() <= 4) return std::nullopt;
  std::size_t n = 0;
  for (char c : id.substr(4)) {
    if (c < '0' || c > '9') return std::nullopt;
    n = n * 10 + static_cast<std::size_t>(c - '0');
  }
  return n;
}

bool pure_replay(const Trajectory& t) { return t.config.effective_warmup() + 1 >= t.steps.size(); }

}  // namespace

Service::Service(Corpus corpus, AppConfig config, ServiceOptions options)
    : corpus_(std::move(corpus)), config_(std::move(config)), options_(std::move(options)) {
  if (options_.workers < 1) throw ArgumentError("service needs at least one worker");
  backends_ = make_backends(config_);
  judge_ = make_judge(config_.judge, config_.base_dir, config_.simulation.seed);
  schema_ = resolve_schema(config_, corpus_);
  std::filesystem::create_directories(options_.run_dir);

  for (const auto& entry : std::filesystem::directory_iterator(options_.run_dir)) {
    const auto id = parse_id(entry.path().filename().string());
    const auto record_path = entry.path() / "record.json";
    if (!id || !std::filesystem::exists(record_path)) continue;
    last_id_ = std::max(last_id_, *id);
    auto record = RunRecord::from_json(read_json_file(record_path));
    if (record.status == RunStatus::pending || record.status == RunStatus::running) {
      record.status = RunStatus::failed;
      record.error = "interrupted by a service restart";
      save(record);
    }
    runs_.emplace(record.run_id, std::move(record));
  }
  for (std::size_t i = 0; i < options_.workers; ++i) workers_.emplace_back([this] { worker_loop(); });
}

Service::~Service() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  queued_.notify_all();
  for (auto& w : workers_) w.join();
}

std::string Service::next_id() { return format_id(++last_id_); }

void Service::save(const RunRecord& record) const {
  const auto dir = options_.run_dir / record.run_id;
  std::filesystem::create_directories(dir);
  const auto tmp = dir / "record.json.tmp";
  write_text_file(tmp, record.to_json().dump(2) + "\n");
  std::filesystem::rename(tmp, dir / "record.json");
}

void Service::set_status(const std::string& run_id, RunStatus status, const std::string& error) {
  {
    std::lock_guard lock(mu_);
    auto& r = runs_.at(run_id);
    r.status = status;
    r.error = error;
    save(r);
  }
  changed_.notify_all();
}

const Event& Service::event(const std::string& event_id) const {
  for (const auto& e : corpus_.events) {
    if (e.event_id == event_id) return e;
  }
  throw bad_field("event_id", "unknown event '" + event_id + "'");
}

std::string Service::enqueue(RunRecord record, Job job) {
  std::string id;
  {
    std::lock_guard lock(mu_);
    id = next_id();
    record.run_id = id;
    record.trajectory_path = options_.run_dir / id / "trajectory.jsonl";
    record.status = RunStatus::pending;
    save(record);
    runs_.emplace(id, std::move(record));
    job.run_id = id;
    queue_.push_back(std::move(job));
  }
  queued_.notify_one();
  return id;
}

std::string Service::submit(const std::string& event_id, const nlohmann::json& config,
                            const nlohmann::json& schedule) {
  const auto& ev = event(event_id);
  SimulationConfig cfg;
  try {
    cfg = apply_overrides(config_.simulation, config);
    cfg.validate();
  } catch (const ArgumentError& e) {
    throw bad_field("config", e.what());
  }
  cfg.warmup_steps = cfg.effective_warmup();
  InterventionSchedule s;
  try {
    s = parse_schedule(schedule);
    s.validate(cfg.horizon, cfg.batch_size);
  } catch (const ValidationError& e) {
    throw schedule_error(e, "schedule");
  }
  RunRecord r;
  r.event_id = ev.event_id;
  r.config = cfg;
  if (!s.empty()) r.schedule = s;
  return enqueue(std::move(r), Job{{}, std::move(s), std::nullopt});
}

std::string Service::fork(const std::string& parent_id, std::size_t start_step, const nlohmann::json& schedule,
                          const nlohmann::json& config_overrides) {
  const RunRecord parent = get(parent_id);
  if (config_overrides.is_object() && config_overrides.contains("batch_size")) {
    throw bad_field("config_overrides.batch_size", "a fork keeps its parent's batch size");
  }
  SimulationConfig cfg;
  try {
    nlohmann::json overrides = config_overrides.is_null() ? nlohmann::json::object() : config_overrides;
    if (!overrides.contains("warmup_steps")) overrides["warmup_steps"] = nullptr;
    cfg = apply_overrides(parent.config, overrides);
    cfg.validate();
  } catch (const ArgumentError& e) {
    throw bad_field("config_overrides", e.what());
  }
  if (start_step > cfg.horizon) {
    throw bad_field("start_step", std::to_string(start_step) + " is beyond the horizon " + std::to_string(cfg.horizon));
  }
  InterventionSchedule s;
  try {
    s = parse_schedule(schedule);
    s.validate(cfg.horizon, cfg.batch_size, start_step);
  } catch (const ValidationError& e) {
    throw schedule_error(e, "schedule");
  }

  const std::size_t needed = std::min(start_step + 1, cfg.horizon);
  Trajectory prefix;
  if (std::filesystem::exists(parent.trajectory_path)) prefix = read_complete_lines(parent.trajectory_path);
  if (prefix.steps.size() < needed) {
    if (parent.status == RunStatus::pending || parent.status == RunStatus::running) {
      throw RequestError(409, "run " + parent_id + " has not reached step " + std::to_string(start_step) + " yet");
    }
    throw bad_field("start_step", "parent run " + parent_id + " has only " + std::to_string(prefix.steps.size()) +
                                      " steps");
  }
  prefix.steps.resize(needed);

  RunRecord r;
  r.event_id = parent.event_id;
  cfg.warmup_steps = start_step;
  r.config = cfg;
  r.parent_run = parent_id;
  r.fork_step = start_step;
  if (!s.empty()) r.schedule = s;
  return enqueue(std::move(r), Job{{}, std::move(s), std::move(prefix)});
}

RunRecord Service::get(const std::string& run_id) const {
  std::lock_guard lock(mu_);
  const auto it = runs_.find(run_id);
  if (it == runs_.end()) throw not_found("unknown run '" + run_id + "'");
  return it->second;
}

std::vector<RunRecord> Service::list() const {
  std::lock_guard lock(mu_);
  std::vector<RunRecord> out;
  for (const auto& [id, r] : runs_) out.push_back(r);
  return out;
}

Trajectory Service::trajectory(const std::string& run_id) const {
  const auto r = get(run_id);
  if (!std::filesystem::exists(r.trajectory_path)) {
    Trajectory empty;
    empty.event_id = r.event_id;
    empty.config = r.config;
    return empty;
  }
  return read_complete_lines(r.trajectory_path);
}

MetricReport Service::metrics(const std::string& run_id, const std::optional<std::string>& baseline) const {
  const auto r = get(run_id);
  if (r.status != RunStatus::done) {
    throw RequestError(409, "run " + run_id + " is " + std::string(to_string(r.status)) + ", not done");
  }
  const Trajectory generated = read_trajectory(r.trajectory_path);
  Trajectory real;
  std::string label = "ground_truth";
  if (baseline) {
    const auto b = get(*baseline);
    if (b.event_id != r.event_id) {
      throw bad_field("baseline", "run " + *baseline + " simulates event " + b.event_id + ", not " + r.event_id);
    }
    if (b.status != RunStatus::done) {
      throw RequestError(409, "baseline run " + *baseline + " is " + std::string(to_string(b.status)) + ", not done");
    }
    real = read_trajectory(b.trajectory_path);
    label = *baseline;
  } else {
    const auto& ev = event(r.event_id);
    const std::size_t horizon = std::min(r.config.horizon, step_count(ev, r.config.batch_size));
    // Only a symbolic mean field is worth recomputing for the NLL conditioning.
    auto mf = backends_.mean_field && backends_.mean_field->capabilities().symbolic ? backends_.mean_field : nullptr;
    real = ground_truth_trajectory(ev, r.config.batch_size, horizon, mf, r.config.seed);
  }
  EvalOptions opts;
  if (pure_replay(generated)) opts.first_step = 0;
  const GenerativeBackend* policy = pure_replay(generated) ? nullptr : backends_.policy.get();
  try {
    auto report = evaluate_run(real, generated, *judge_, schema_, policy, opts);
    report.label = run_id + " vs " + label;
    return report;
  } catch (const ArgumentError& e) {
    throw RequestError(422, e.what());
  }
}

nlohmann::json Service::events() const {
  auto arr = nlohmann::json::array();
  for (const auto& e : corpus_.events) {
    arr.push_back({{"event_id", e.event_id},
                   {"topic", e.topic},
                   {"domain_tag", to_string(e.domain_tag)},
                   {"timeline_length", e.timeline.size()},
                   {"steps", step_count(e, config_.simulation.batch_size)}});
  }
  return arr;
}

bool Service::wait(const std::string& run_id, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mu_);
  return changed_.wait_for(lock, timeout, [&] {
    const auto it = runs_.find(run_id);
    return it == runs_.end() || (it->second.status != RunStatus::pending && it->second.status != RunStatus::running);
  });
}

void Service::worker_loop() {
  for (;;) {
    Job job;
    {
      std::unique_lock lock(mu_);
      queued_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      job = std::move(queue_.front());
      queue_.pop_front();
    }
    execute(job);
  }
}

void Service::execute(const Job& job) {
  const RunRecord record = get(job.run_id);
  set_status(job.run_id, RunStatus::running);
  try {
    const auto& ev = event(record.event_id);
    Trajectory header;
    header.event_id = ev.event_id;
    header.topic = ev.topic;
    header.config = record.config;
    header.fork_step = record.fork_step;
    header.parent_run = record.parent_run;
    TrajectoryWriter writer(record.trajectory_path, header);
    RunOptions opts;
    opts.fanout = config_.fanout;
    opts.on_step = [&](const StepRecord& step, std::size_t t) { writer.append(step, t); };
    if (record.fork_step) {
      fork_trajectory(ev, &*job.parent_prefix, *record.fork_step, record.config, backends_, job.schedule, opts);
    } else {
      run_simulation(ev, record.config, backends_, job.schedule, opts);
    }
    set_status(job.run_id, RunStatus::done);
  } catch (const std::exception& e) {
    set_status(job.run_id, RunStatus::failed, e.what());
  }
}

namespace {

void reply(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <class F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const RequestError& e) {
      reply(res, e.status(), e.body());
    } catch (const nlohmann::json::exception& e) {
      reply(res, 400, {{"error", std::string("malformed request: ") + e.what()}});
    } catch (const ArgumentError& e) {
      reply(res, 400, {{"error", e.what()}});
    } catch (const std::exception& e) {
      reply(res, 500, {{"error", e.what()}});
    }
  };
}

nlohmann::json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  auto j = nlohmann::json::parse(req.body);
  if (!j.is_object()) throw RequestError(400, "request body must be a JSON object");
  return j;
}

}  // namespace

void Service::mount(httplib::Server& server) {
  server.Post("/api/runs", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    if (!body.contains("event_id") || !body.at("event_id").is_string()) {
      throw bad_field("event_id", "missing or not a string");
    }
    const auto id = submit(body.at("event_id").get<std::string>(), body.value("config", nlohmann::json()),
                           body.value("schedule", nlohmann::json()));
    reply(res, 201, {{"run_id", id}});
  }));
  server.Get("/api/runs", guarded([this](const httplib::Request&, httplib::Response& res) {
    auto arr = nlohmann::json::array();
    for (const auto& r : list()) arr.push_back(r.to_json());
    reply(res, 200, arr);
  }));
  server.Get(R"(/api/runs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    reply(res, 200, get(req.matches[1]).to_json());
  }));
  server.Get(R"(/api/runs/([^/]+)/trajectory)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto t = trajectory(req.matches[1]);
    auto arr = nlohmann::json::array();
    for (std::size_t i = 0; i < t.steps.size(); ++i) arr.push_back(step_line(t.steps[i], i));
    reply(res, 200, arr);
  }));
  server.Get(R"(/api/runs/([^/]+)/metrics)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    std::optional<std::string> baseline;
    if (req.has_param("baseline")) baseline = req.get_param_value("baseline");
    reply(res, 200, metrics(req.matches[1], baseline).to_json());
  }));
  server.Post(R"(/api/runs/([^/]+)/fork)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    if (!body.contains("start_step") || !body.at("start_step").is_number_integer() ||
        body.at("start_step").get<long long>() < 0) {
      throw bad_field("start_step", "missing or not a non-negative integer");
    }
    const auto id = fork(req.matches[1], body.at("start_step").get<std::size_t>(),
                         body.value("schedule", nlohmann::json()), body.value("config_overrides", nlohmann::json()));
    reply(res, 201, {{"run_id", id}});
  }));
  server.Get("/api/events", guarded([this](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, events());
  }));
  server.Get("/api/schema", guarded([this](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, nlohmann::json(schema_));
  }));
}

void serve(Service& service, httplib::Server& server, const std::string& host, int port) {
  service.mount(server);
  // httplib defaults to SO_REUSEPORT, which lets a second instance share a taken port.
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  if (!server.bind_to_port(host, port)) {
    throw Error("cannot listen on " + host + ":" + std::to_string(port) + " (port in use?)");
  }
  server.listen_after_bind();
}

}  // namespace mfsim
