#pragma once

// Chat-completions client. Exposes no token log-probabilities, so reports built on a
// remote policy carry no NLL.

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfsim/backends.hpp"

namespace mfsim {

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 1.0;
  std::optional<std::uint64_t> seed;
};

nlohmann::json chat_request_body(const ChatRequest& request);

struct RemoteConfig {
  // Full URL, e.g. http://127.0.0.1:8000/v1/chat/completions
  std::string endpoint;
  std::string model;
  std::string auth_token;
  int max_attempts = 4;
  std::chrono::milliseconds initial_backoff{250};
  double backoff_factor = 2.0;
  std::size_t max_in_flight = 8;
  std::chrono::seconds timeout{120};
  bool send_seed = true;
  bool final_text_only = true;

  /// Reads endpoint/model/limits from JSON; the token comes from the environment variable
  /// named by "auth_env" (default MFSIM_API_KEY).
  static RemoteConfig from_json(const nlohmann::json& j);
};

class RemoteBackend : public GenerativeBackend {
 public:
  explicit RemoteBackend(RemoteConfig config);
  ~RemoteBackend() override;

  /// POSTs the request, retrying non-2xx and transport failures with exponential backoff.
  /// Returns the assistant text with reasoning spans stripped.
  std::string complete(const ChatRequest& request) const;

  std::string generate(const GenerationRequest& request, std::uint64_t seed,
                       double temperature) const override;
  Capabilities capabilities() const override { return {false, false, config_.final_text_only}; }
  std::string name() const override { return "remote:" + config_.model; }

  const RemoteConfig& config() const { return config_; }
  /// Attempts made by the most recent complete() call on this thread.
  static int last_attempts();

 private:
  struct Target {
    std::string scheme_host_port;
    std::string path;
  };

  RemoteConfig config_;
  Target target_;
  mutable std::counting_semaphore<1024> in_flight_;
};

}  // namespace mfsim
