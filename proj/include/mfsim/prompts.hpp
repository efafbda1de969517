#pragma once

// Prompt rendering for the policy model, the mean-field model and the judge.

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mfsim/core.hpp"

namespace mfsim {

enum class TemplateId { policy, mean_field, judge };

struct PromptText {
  std::string text;
  TemplateId template_id = TemplateId::policy;
  bool operator==(const PromptText&) const = default;
};

/// What a policy sees about its peers, shaped by the context strategy.
struct ContextText {
  ContextStrategy strategy = ContextStrategy::state_only;
  std::string summary;                // mean_field only
  std::vector<std::string> comments;  // recent_k / popular_k only

  /// Flat text form: the summary, or "Comment i: ..." lines.
  std::string payload() const;
  bool operator==(const ContextText&) const = default;
};

/// Substitutes `{name}` placeholders. A placeholder without a value is a RenderError;
/// substituted values are not rescanned.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& values);

/// "Comment 1: ...\nComment 2: ..." with optional quoting of each comment.
std::string numbered_comments(std::span<const std::string> comments, bool quoted);

struct PolicyPromptOptions {
  // Closed chat models get an explicit "final text only" instruction.
  bool final_text_only = false;
};

PromptText render_policy_prompt(const AgentState& state, const ContextText& context,
                                ContextStrategy strategy, PolicyPromptOptions options = {});

PromptText render_meanfield_prompt(std::string_view topic, const MeanFieldState& previous,
                                   std::span<const ActionText> actions);

PromptText render_judge_prompt(std::string_view topic, std::span<const std::string> comments);

/// The six aspects a mean-field summary covers, in template order.
std::span<const std::string_view> meanfield_aspects();

}  // namespace mfsim
