#include "mfsim/backends.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

namespace mfsim {

std::optional<double> GenerativeBackend::logprob(std::string_view, const GenerationRequest&) const {
  return std::nullopt;
}

ScriptedBackend::ScriptedBackend(std::map<std::string, std::string> table,
                                 std::optional<std::string> fallback)
    : table_(std::move(table)), fallback_(std::move(fallback)) {}

std::shared_ptr<ScriptedBackend> ScriptedBackend::constant(std::string text) {
  return std::make_shared<ScriptedBackend>(std::map<std::string, std::string>{}, std::move(text));
}

std::string ScriptedBackend::generate(const GenerationRequest& request, std::uint64_t,
                                      double) const {
  {
    std::lock_guard lock(mu_);
    prompts_.push_back(request.prompt.text);
  }
  if (auto it = table_.find(request.prompt.text); it != table_.end()) return it->second;
  if (fallback_) return *fallback_;
  throw ReplayMissError("scripted backend has no entry for prompt: " +
                        request.prompt.text.substr(0, 120));
}

std::vector<std::string> ScriptedBackend::prompts() const {
  std::lock_guard lock(mu_);
  return prompts_;
}

ToyModelParams ToyModelParams::zeros(std::size_t states, std::size_t actions,
                                     std::size_t mean_fields) {
  if (states < 1 || actions < 1 || mean_fields < 1) throw ArgumentError("toy alphabets must be non-empty");
  ToyModelParams p;
  p.states = states;
  p.actions = actions;
  p.mean_fields = mean_fields;
  p.policy_logits.assign(states * mean_fields * actions, 0.0);
  p.meanfield_logits.assign(mean_fields * actions * mean_fields, 0.0);
  return p;
}

ToyModelParams ToyModelParams::random(std::size_t states, std::size_t actions,
                                      std::size_t mean_fields, std::uint64_t seed, double scale) {
  auto p = zeros(states, actions, mean_fields);
  Rng rng(seed);
  for (auto& v : p.policy_logits) v = scale * rng.normal();
  for (auto& v : p.meanfield_logits) v = scale * rng.normal();
  return p;
}

void ToyModelParams::validate() const {
  if (states < 1 || actions < 1 || mean_fields < 1) throw ArgumentError("toy alphabets must be non-empty");
  if (policy_logits.size() != states * mean_fields * actions) {
    throw ArgumentError("policy_logits size does not match alphabets");
  }
  if (meanfield_logits.size() != mean_fields * actions * mean_fields) {
    throw ArgumentError("meanfield_logits size does not match alphabets");
  }
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(policy_logits.begin(), policy_logits.end(), finite) ||
      !std::all_of(meanfield_logits.begin(), meanfield_logits.end(), finite)) {
    throw ArgumentError("toy logits must be finite");
  }
}

void to_json(nlohmann::json& j, const ToyModelParams& p) {
  j = nlohmann::json{{"format", "mfsim-toy-params/1"},
                     {"alphabets", {{"states", p.states}, {"actions", p.actions}, {"mean_fields", p.mean_fields}}},
                     {"policy_logits",
                      {{"shape", {p.states, p.mean_fields, p.actions}}, {"data", p.policy_logits}}},
                     {"meanfield_logits",
                      {{"shape", {p.mean_fields, p.actions, p.mean_fields}}, {"data", p.meanfield_logits}}}};
}

void from_json(const nlohmann::json& j, ToyModelParams& p) {
  const auto& a = j.at("alphabets");
  p.states = a.at("states").get<std::size_t>();
  p.actions = a.at("actions").get<std::size_t>();
  p.mean_fields = a.at("mean_fields").get<std::size_t>();
  p.policy_logits = j.at("policy_logits").at("data").get<std::vector<double>>();
  p.meanfield_logits = j.at("meanfield_logits").at("data").get<std::vector<double>>();
  p.validate();
}

std::size_t argmax_lowest(std::span<const double> values) {
  if (values.empty()) throw ArgumentError("argmax of an empty range");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::vector<double> tempered_softmax(std::span<const double> logits, double temperature) {
  std::vector<double> out(logits.size(), 0.0);
  if (temperature == 0.0) {
    out[argmax_lowest(logits)] = 1.0;
    return out;
  }
  if (!(temperature > 0.0)) throw ArgumentError("temperature must be non-negative");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp((logits[i] - mx) / temperature);
    z += out[i];
  }
  for (auto& v : out) v /= z;
  return out;
}

std::vector<double> log_softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - mx);
  const double lse = mx + std::log(z);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

namespace {

std::span<const double> toy_row(const ToyModelParams& params, ToyHead head,
                                 std::span<const int> condition) {
  if (condition.size() != 2) throw ArgumentError("toy condition must hold exactly two symbols");
  const auto in_range = [](int v, std::size_t n) { return v >= 0 && static_cast<std::size_t>(v) < n; };
  if (head == ToyHead::policy) {
    if (!in_range(condition[0], params.states) || !in_range(condition[1], params.mean_fields)) {
      throw ArgumentError("policy condition (" + std::to_string(condition[0]) + ", " +
                          std::to_string(condition[1]) + ") outside alphabets");
    }
    return params.policy_row(static_cast<std::size_t>(condition[0]),
                             static_cast<std::size_t>(condition[1]));
  }
  if (!in_range(condition[0], params.mean_fields) || !in_range(condition[1], params.actions)) {
    throw ArgumentError("mean-field condition (" + std::to_string(condition[0]) + ", " +
                        std::to_string(condition[1]) + ") outside alphabets");
  }
  return params.meanfield_row(static_cast<std::size_t>(condition[0]),
                              static_cast<std::size_t>(condition[1]));
}

}  // namespace

int toy_sample(const ToyModelParams& params, ToyHead head, std::span<const int> condition,
               std::uint64_t seed, double temperature) {
  const auto probs = tempered_softmax(toy_row(params, head, condition), temperature);
  if (temperature == 0.0) return static_cast<int>(argmax_lowest(probs));
  Rng rng(seed);
  return static_cast<int>(rng.categorical(probs));
}

double toy_logprob(const ToyModelParams& params, ToyHead head, std::span<const int> condition,
                   int symbol) {
  const auto row = toy_row(params, head, condition);
  if (symbol < 0 || static_cast<std::size_t>(symbol) >= row.size()) {
    throw ArgumentError("symbol " + std::to_string(symbol) + " outside alphabet");
  }
  return log_softmax(row)[static_cast<std::size_t>(symbol)];
}

ToyBackend::ToyBackend(std::shared_ptr<const ToyModelParams> params, ToyHead head)
    : params_(std::move(params)), head_(head) {
  if (!params_) throw ArgumentError("toy backend needs parameters");
  params_->validate();
}

std::string ToyBackend::generate(const GenerationRequest& request, std::uint64_t seed,
                                 double temperature) const {
  const int symbol = toy_sample(*params_, head_, request.condition, seed, temperature);
  return head_ == ToyHead::policy ? toy::action_text(symbol) : toy::mean_field_text(symbol);
}

std::optional<double> ToyBackend::logprob(std::string_view output,
                                          const GenerationRequest& request) const {
  const auto symbol = head_ == ToyHead::policy ? toy::parse_action(output) : toy::parse_mean_field(output);
  const std::size_t alphabet = head_ == ToyHead::policy ? params_->actions : params_->mean_fields;
  if (!symbol || static_cast<std::size_t>(*symbol) >= alphabet) {
    return -std::numeric_limits<double>::infinity();
  }
  return toy_logprob(*params_, head_, request.condition, *symbol);
}

std::string ToyBackend::name() const {
  return head_ == ToyHead::policy ? "toy-policy" : "toy-mean-field";
}

std::string strip_think(std::string_view text) {
  std::string out;
  constexpr std::string_view kOpen = "<think>";
  constexpr std::string_view kClose = "</think>";
  // A reasoning model may omit the opening tag; everything before a stray close is reasoning.
  const auto first_open = text.find(kOpen);
  const auto first_close = text.find(kClose);
  if (first_close != std::string_view::npos &&
      (first_open == std::string_view::npos || first_close < first_open)) {
    text.remove_prefix(first_close + kClose.size());
  }
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto open = text.find(kOpen, pos);
    if (open == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    out.append(text.substr(pos, open - pos));
    const auto close = text.find(kClose, open + kOpen.size());
    if (close == std::string_view::npos) break;  // unterminated: drop the rest
    pos = close + kClose.size();
  }
  const auto not_space = [](unsigned char c) { return std::isspace(c) == 0; };
  auto b = std::find_if(out.begin(), out.end(), not_space);
  auto e = std::find_if(out.rbegin(), out.rend(), not_space).base();
  return b < e ? std::string(b, e) : std::string{};
}

}  // namespace mfsim
