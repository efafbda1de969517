#include "mfsim/remote.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

#include <httplib.h>

namespace mfsim {

namespace {

thread_local int g_last_attempts = 0;

class InFlightSlot {
 public:
  explicit InFlightSlot(std::counting_semaphore<1024>& sem) : sem_(sem) { sem_.acquire(); }
  ~InFlightSlot() { sem_.release(); }
  InFlightSlot(const InFlightSlot&) = delete;
  InFlightSlot& operator=(const InFlightSlot&) = delete;

 private:
  std::counting_semaphore<1024>& sem_;
};

}  // namespace

nlohmann::json chat_request_body(const ChatRequest& request) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", m.role}, {"content", m.content}});
  }
  nlohmann::json body{{"model", request.model},
                      {"messages", std::move(messages)},
                      {"temperature", request.temperature}};
  if (request.seed) body["seed"] = *request.seed;
  return body;
}

RemoteConfig RemoteConfig::from_json(const nlohmann::json& j) {
  RemoteConfig c;
  c.endpoint = j.at("endpoint").get<std::string>();
  c.model = j.at("model").get<std::string>();
  c.max_attempts = j.value("max_attempts", c.max_attempts);
  c.initial_backoff = std::chrono::milliseconds(j.value("initial_backoff_ms", c.initial_backoff.count()));
  c.backoff_factor = j.value("backoff_factor", c.backoff_factor);
  c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
  c.timeout = std::chrono::seconds(j.value("timeout_s", c.timeout.count()));
  c.send_seed = j.value("send_seed", c.send_seed);
  c.final_text_only = j.value("final_text_only", c.final_text_only);
  const auto env = j.value("auth_env", std::string("MFSIM_API_KEY"));
  if (const char* token = std::getenv(env.c_str())) c.auth_token = token;
  return c;
}

RemoteBackend::RemoteBackend(RemoteConfig config)
    : config_(std::move(config)),
      in_flight_(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(config_.max_in_flight, 1, 1024))) {
  if (config_.max_attempts < 1) throw ArgumentError("max_attempts must be >= 1");
  const auto scheme_end = config_.endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw ArgumentError("endpoint must be an absolute http(s) URL: " + config_.endpoint);
  }
  const auto path_start = config_.endpoint.find('/', scheme_end + 3);
  target_.scheme_host_port = config_.endpoint.substr(0, path_start);
  target_.path = path_start == std::string::npos ? "/" : config_.endpoint.substr(path_start);
}

RemoteBackend::~RemoteBackend() = default;

int RemoteBackend::last_attempts() { return g_last_attempts; }

std::string RemoteBackend::complete(const ChatRequest& request) const {
  InFlightSlot slot(in_flight_);
  const std::string body = chat_request_body(request).dump();
  httplib::Client client(target_.scheme_host_port);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  client.set_write_timeout(config_.timeout);
  httplib::Headers headers;
  if (!config_.auth_token.empty()) headers.emplace("Authorization", "Bearer " + config_.auth_token);

  auto backoff = config_.initial_backoff;
  std::string last_error;
  g_last_attempts = 0;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    g_last_attempts = attempt;
    auto res = client.Post(target_.path, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
    } else if (res->status < 200 || res->status >= 300) {
      last_error = "HTTP " + std::to_string(res->status);
    } else {
      std::string content;
      try {
        const auto reply = nlohmann::json::parse(res->body);
        const auto& msg = reply.at("choices").at(0).at("message").at("content");
        if (msg.is_string()) content = msg.get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw BackendError(std::string("malformed completion response: ") + e.what());
      }
      auto text = strip_think(content);
      if (text.empty()) throw BackendError("empty completion from " + config_.endpoint);
      return text;
    }
    if (attempt < config_.max_attempts) {
      std::this_thread::sleep_for(backoff);
      backoff = std::chrono::milliseconds(
          static_cast<std::int64_t>(static_cast<double>(backoff.count()) * config_.backoff_factor));
    }
  }
  throw BackendError("chat completion failed after " + std::to_string(config_.max_attempts) +
                     " attempts: " + last_error);
}

std::string RemoteBackend::generate(const GenerationRequest& request, std::uint64_t seed,
                                    double temperature) const {
  ChatRequest chat;
  chat.model = config_.model;
  chat.messages.push_back({"user", request.prompt.text});
  chat.temperature = temperature;
  if (config_.send_seed) chat.seed = seed;
  return complete(chat);
}

}  // namespace mfsim
