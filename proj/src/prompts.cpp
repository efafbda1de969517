#include "mfsim/prompts.hpp"

#include <array>
#include <cctype>

namespace mfsim {

namespace {

constexpr std::string_view kPolicyTemplate =
    "You are tasked with simulating a plausible user action (reposting or commenting) based on "
    "their profile and the current population information.\n"
    "\n"
    "Inputs:\n"
    "- Discussion Topic: {topic}\n"
    "{context_block}"
    "- User Profile: {user_profile}\n"
    "\n"
    "Write the single repost or comment this user would publish next.\n"
    "{final_text_only}";

constexpr std::string_view kRecentBlock = "- Recent Comments:\n{comments}\n";
constexpr std::string_view kPopularBlock = "- Popular Comments:\n{comments}\n";
constexpr std::string_view kMeanFieldBlock = "- Current Mean Field: {mean_field}\n";
constexpr std::string_view kFinalTextOnly =
    "Output only the final simulated text without any intermediate reasoning process.\n";

constexpr std::array<std::string_view, 6> kAspects{
    "Stance Distribution: Are users predominantly supportive or oppositional?",
    "Opinion Distribution: What are the major viewpoints expressed?",
    "Emotion Distribution: Are emotions primarily anger, excitement, doubt, or anxiety? Overall, "
    "are sentiments positive, negative, or neutral?",
    "Behavior Distribution: Are users more inclined to repost or to comment?",
    "Perception of Topic Authenticity: To what extent do users believe or doubt the authenticity "
    "of the topic?",
    "Intent of Comments: Are users primarily asking questions, expressing opinions, or "
    "disseminating information?"};

constexpr std::string_view kMeanFieldTemplate =
    "You are tasked with summarizing the distribution of user comments regarding a specific "
    "discussion topic.\n"
    "\n"
    "Inputs:\n"
    "- Discussion Topic: {topic}\n"
    "- Previous Mean Field: {previous_mean_field}\n"
    "- Recent User Comments:\n"
    "{comments}\n"
    "\n"
    "Instructions:\n"
    "Based on the provided information, summarize the overall user discussion by addressing the "
    "following six aspects in order of importance:\n"
    "{aspects}"
    "\n"
    "Response Requirements:\n"
    "Provide a concise summary in English, approximately {word_target} words in length. Ensure "
    "the response is structured clearly, focuses on key points, and remains easy to "
    "comprehend.\n";

constexpr std::string_view kJudgeTemplate = R"(Role: You are an expert in public opinion content analysis.
Task: Analyze multiple user comments objectively to evaluate the sentiment, stance, and opinion orientation regarding the following topic:

Discussion Topic: {topic}

Instructions:
For each comment, perform analysis according to the following nine dimensions and strictly return the results in JSON format.
Special Note: The emoji "@_@" typically conveys feelings of "surprise, confusion, or being stunned".

1. rumor (Rumor propagation): Select from ["spread", "counter"].
   - "counter": Comments that aim to refute, disbelieve, question the authenticity, expect further clarification, or directly point out the falsity of the topic.
   - "spread": All other comments, including those expressing belief in the topic, reposting content, tagging usernames, repeating topic content, or expressing emotional reactions to the topic.
2. sentiment (Emotional state): Capture the user's emotional state conveyed through the comment (including punctuation and tone). Choose from ["angry", "calm", "happy", "sad", "fear", "surprise"].
   Note: Simple reposts are categorized as "calm".
3. attitude (Attitude polarity): Determine whether the user's sentiment is positive, negative, or neutral. Choose from ["positive", "negative", "neutral"].
   Note: Pay close attention to any implicit negative sentiment (e.g., sarcasm, criticism).
4. behavior (Behavior type): Select from ["comment", "share"].
   - "share": The comment is primarily forwarding or reposting content.
   - "comment": The comment expresses an evaluation, opinion, or reaction.
5. stance (Stance towards the topic): Select from ["support", "oppose", "neutral"].
   Note: Pay attention to implicit opposition, dissatisfaction, or criticism.
6. belief (Belief in the topic): Select from ["believe", "doubt"].
   - "believe": The comment expresses belief in the topic (including reposting).
   - "doubt": The comment questions, refutes, or expresses skepticism towards the topic.
7. keywords (Keyword extraction): Extract important keywords from the comment and return them as an array (e.g., ["policy", "economy"]).
   If the comment is meaningless, return [""].
8. subjectivity (Subjectivity): Determine whether the comment is based on subjective opinions or objective facts. Select from ["subjective", "objective"].
9. intent (Intent classification): Select from ["question", "promotion", "opinion"].
   - "question": The comment primarily asks a question.
   - "promotion": The comment primarily disseminates or promotes information.
   - "opinion": The comment primarily expresses an opinion or viewpoint.

Input Format:
The following are {comment_count} user comments:

{comments}

Output Format:
Strictly return a JSON array evaluating the {comment_count} comments.
Do not output anything other than the JSON array.

Example Output:
[
  {
    "rumor": "spread",
    "sentiment_state": "calm",
    "sentiment_tendency": "neutral",
    "behavior_type": "share",
    "stance": "neutral",
    "belief_degree": "believe",
    "keywords": ["share", "weibo"],
    "subjectivity": "objective",
    "intent_classification": "promotion"
  },
  {
    "rumor": "counter",
    "sentiment_state": "angry",
    "sentiment_tendency": "negative",
    "behavior_type": "comment",
    "stance": "oppose",
    "belief_degree": "doubt",
    "keywords": ["fake", "impossible"],
    "subjectivity": "subjective",
    "intent_classification": "opinion"
  }
]
)";

bool is_ident(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

}  // namespace

std::string ContextText::payload() const {
  switch (strategy) {
    case ContextStrategy::mean_field:
      return summary;
    case ContextStrategy::recent_k:
    case ContextStrategy::popular_k:
      return numbered_comments(comments, false);
    case ContextStrategy::state_only:
    case ContextStrategy::sft:
      return {};
  }
  return {};
}

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size() + 256);
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      std::size_t j = i + 1;
      while (j < tmpl.size() && is_ident(tmpl[j])) ++j;
      if (j > i + 1 && j < tmpl.size() && tmpl[j] == '}' &&
          std::isalpha(static_cast<unsigned char>(tmpl[i + 1])) != 0) {
        const std::string name(tmpl.substr(i + 1, j - i - 1));
        auto it = values.find(name);
        if (it == values.end()) throw RenderError("no value for placeholder {" + name + "}");
        out += it->second;
        i = j + 1;
        continue;
      }
    }
    out += tmpl[i++];
  }
  return out;
}

std::string numbered_comments(std::span<const std::string> comments, bool quoted) {
  std::string out;
  for (std::size_t i = 0; i < comments.size(); ++i) {
    if (i > 0) out += '\n';
    out += "Comment " + std::to_string(i + 1) + ": ";
    if (quoted) out += '"';
    out += comments[i];
    if (quoted) out += '"';
  }
  return out;
}

PromptText render_policy_prompt(const AgentState& state, const ContextText& context,
                                ContextStrategy strategy, PolicyPromptOptions options) {
  const bool sees_comments = strategy == ContextStrategy::recent_k || strategy == ContextStrategy::popular_k;
  if (context.strategy != strategy) {
    throw ArgumentError("context built for " + std::string(to_string(context.strategy)) +
                        " used with strategy " + std::string(to_string(strategy)));
  }
  if (!sees_comments && !context.comments.empty()) {
    throw ArgumentError("strategy " + std::string(to_string(strategy)) + " does not accept comments");
  }
  if (strategy != ContextStrategy::mean_field && !context.summary.empty()) {
    throw ArgumentError("only the mean_field strategy carries a summary");
  }
  std::string block;
  switch (strategy) {
    case ContextStrategy::recent_k:
      block = render_template(kRecentBlock, {{"comments", numbered_comments(context.comments, false)}});
      break;
    case ContextStrategy::popular_k:
      block = render_template(kPopularBlock, {{"comments", numbered_comments(context.comments, false)}});
      break;
    case ContextStrategy::mean_field:
      block = render_template(kMeanFieldBlock, {{"mean_field", context.summary}});
      break;
    case ContextStrategy::state_only:
    case ContextStrategy::sft:
      break;
  }
  return {render_template(kPolicyTemplate,
                          {{"topic", state.topic},
                           {"context_block", block},
                           {"user_profile", state.rendered_state},
                           {"final_text_only", options.final_text_only ? std::string(kFinalTextOnly) : ""}}),
          TemplateId::policy};
}

PromptText render_meanfield_prompt(std::string_view topic, const MeanFieldState& previous,
                                   std::span<const ActionText> actions) {
  if (actions.empty()) throw ArgumentError("mean-field prompt needs at least one action");
  std::vector<std::string> comments;
  comments.reserve(actions.size());
  for (const auto& a : actions) comments.push_back(a.text);
  std::string aspects;
  for (std::size_t i = 0; i < kAspects.size(); ++i) {
    aspects += std::to_string(i + 1) + ". " + std::string(kAspects[i]) + "\n";
  }
  return {render_template(kMeanFieldTemplate,
                          {{"topic", std::string(topic)},
                           {"previous_mean_field", previous.display()},
                           {"comments", numbered_comments(comments, false)},
                           {"aspects", aspects},
                           {"word_target", std::to_string(kDefaultWordCap)}}),
          TemplateId::mean_field};
}

PromptText render_judge_prompt(std::string_view topic, std::span<const std::string> comments) {
  if (comments.empty()) throw ArgumentError("judge prompt needs at least one comment");
  return {render_template(kJudgeTemplate, {{"topic", std::string(topic)},
                                           {"comment_count", std::to_string(comments.size())},
                                           {"comments", numbered_comments(comments, true)}}),
          TemplateId::judge};
}

std::span<const std::string_view> meanfield_aspects() { return kAspects; }

}  // namespace mfsim
