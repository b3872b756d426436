#pragma once

/// The agent-environment loop. Drives a policy client turn by turn, parses
/// each round, executes tool calls against a backend, and enforces the
/// episode budgets: a global tool-call cap, a turn cap, a per-turn image
/// cap, a context-length cap, and a per-turn response-length cap. When a
/// budget runs out the loop injects a FINAL STEP message demanding an
/// immediate answer; episodes that cannot produce a valid answer fall back
/// to the original prompt.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "gensearch/common.hpp"
#include "gensearch/protocol.hpp"
#include "gensearch/toolkit.hpp"

namespace gensearch::episode {

using Json = nlohmann::json;
using protocol::AnswerPayload;
using protocol::ParsedRound;
using protocol::ParseMode;

// ---------------------------------------------------------------------------
// Token counting
// ---------------------------------------------------------------------------

/// Approximate token count: whitespace-delimited pieces, each charged one
/// token per started 4-character chunk. Deterministic and monotone in text
/// length; backends with exact tokenizers can substitute their own counts.
inline long count_tokens(std::string_view text) {
  long tokens = 0;
  size_t piece_len = 0;
  for (char c : text) {
    if (is_space(c)) {
      if (piece_len > 0) {
        tokens += static_cast<long>((piece_len + 3) / 4);
        piece_len = 0;
      }
    } else {
      ++piece_len;
    }
  }
  if (piece_len > 0) tokens += static_cast<long>((piece_len + 3) / 4);
  return tokens;
}

// ---------------------------------------------------------------------------
// Conversation
// ---------------------------------------------------------------------------

enum class Role { System, User, Assistant, Tool };

inline const char* to_string(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
    case Role::Tool: return "tool";
  }
  return "?";
}

struct Message {
  Role role;
  std::string content;

  bool operator==(const Message&) const = default;
};

// ---------------------------------------------------------------------------
// Configuration and state
// ---------------------------------------------------------------------------

struct Decoding {
  double temperature = 0.6;
  double top_p = 0.9;
};

struct EpisodeConfig {
  int max_tool_calls = 8;
  int max_turns = 10;
  int max_images_per_turn = 5;
  long max_context_tokens = 36000;  // training cap; evaluation runs use 64000
  int max_response_tokens_per_turn = 4000;
  Decoding decoding;
  int policy_retries = 2;  // transport retries per request before giving up
  bool final_step_on_context_overflow = true;  // false: fall back immediately
  std::uint64_t image_id_start = 1;
  std::string system_prompt;  // prepended as the system message when non-empty
  // Budget accounting uses the approximate counter unless a backend supplies
  // an exact tokenizer here.
  std::function<long(std::string_view)> token_counter;

  long tokens_of(std::string_view text) const {
    return token_counter ? token_counter(text) : count_tokens(text);
  }

  static EpisodeConfig train_defaults() { return EpisodeConfig{}; }
  static EpisodeConfig eval_defaults() {
    EpisodeConfig cfg;
    cfg.max_context_tokens = 64000;
    return cfg;
  }
};

enum class TerminalOutcome {
  Answered,
  FallbackBudget,
  FallbackContext,
  FallbackMalformed,
  FallbackValidation,
};

inline const char* to_string(TerminalOutcome outcome) {
  switch (outcome) {
    case TerminalOutcome::Answered: return "answered";
    case TerminalOutcome::FallbackBudget: return "fallback_budget";
    case TerminalOutcome::FallbackContext: return "fallback_context";
    case TerminalOutcome::FallbackMalformed: return "fallback_malformed";
    case TerminalOutcome::FallbackValidation: return "fallback_validation";
  }
  return "?";
}

inline std::optional<TerminalOutcome> outcome_from_string(std::string_view s) {
  for (TerminalOutcome o :
       {TerminalOutcome::Answered, TerminalOutcome::FallbackBudget, TerminalOutcome::FallbackContext,
        TerminalOutcome::FallbackMalformed, TerminalOutcome::FallbackValidation}) {
    if (s == to_string(o)) return o;
  }
  return std::nullopt;
}

struct EpisodeState {
  std::string original_prompt;
  std::vector<Message> conversation;
  int tool_calls_used = 0;
  int turns_used = 0;
  long context_tokens_used = 0;
  toolkit::ImageRegistry registry;
  std::optional<TerminalOutcome> terminal;
};

// ---------------------------------------------------------------------------
// Control messages
// ---------------------------------------------------------------------------

inline const std::string& final_step_message() {
  static const std::string text =
      "FINAL STEP: Final Step Reached. Tool calls are forbidden now. Output ONLY "
      "<answer>...</answer> with the best grounded prompt and reference images you can "
      "produce from the information collected so far.";
  return text;
}

inline const std::string& truncated_message() {
  static const std::string text =
      "RESPONSE TOO LONG: your previous response exceeded the length limit and was TRUNCATED. "
      "Do NOT write <think>. Output ONLY a single <tool_call>{...}</tool_call> or "
      "<answer>{...}</answer>, as concisely as possible.";
  return text;
}

inline std::string retry_message(const protocol::ParseError& error, bool final_step_armed) {
  std::string text = "Your previous response could not be processed (" + protocol::describe(error) +
                     "). ";
  if (final_step_armed) {
    text += "Tool calls are still forbidden: output ONLY <answer>...</answer>.";
  } else {
    text +=
        "Follow the round format exactly: <think>...</think> followed by exactly one "
        "<tool_call>...</tool_call> or <answer>...</answer>.";
  }
  return text;
}

// ---------------------------------------------------------------------------
// Budget decisions
// ---------------------------------------------------------------------------

enum class ControlAction { Proceed, InjectFinalStep, InjectTruncated, Terminate };

struct ControlDecision {
  ControlAction action = ControlAction::Proceed;
  std::optional<TerminalOutcome> reason;  // set when action == Terminate
};

/// What enforce_budgets is looking at: the checkpoint before requesting the
/// next response, a raw response (length check), or a parsed round about to
/// be acted on.
struct IncomingRound {
  enum class Kind { NextRequest, RawResponse, Parsed };
  Kind kind = Kind::NextRequest;
  long response_tokens = 0;
  const ParsedRound* round = nullptr;

  static IncomingRound next_request() { return IncomingRound{}; }
  static IncomingRound raw_response(long tokens) {
    return IncomingRound{Kind::RawResponse, tokens, nullptr};
  }
  static IncomingRound parsed(const ParsedRound& round, long tokens) {
    return IncomingRound{Kind::Parsed, tokens, &round};
  }
};

/// Single decision point for every budget rule. FINAL STEP fires when the
/// tool-call budget is exhausted, when only one turn remains, or when the
/// context cap is reached (configurable to fall back instead); TRUNCATED
/// fires when a response exceeds the per-turn length cap.
inline ControlDecision enforce_budgets(const EpisodeState& state, const EpisodeConfig& cfg,
                                       const IncomingRound& incoming) {
  switch (incoming.kind) {
    case IncomingRound::Kind::NextRequest: {
      if (state.turns_used >= cfg.max_turns) {
        return {ControlAction::Terminate, TerminalOutcome::FallbackBudget};
      }
      bool budget_exhausted = state.tool_calls_used >= cfg.max_tool_calls ||
                              state.turns_used >= cfg.max_turns - 1;
      bool context_exhausted = state.context_tokens_used >= cfg.max_context_tokens;
      if (context_exhausted && !budget_exhausted && !cfg.final_step_on_context_overflow) {
        return {ControlAction::Terminate, TerminalOutcome::FallbackContext};
      }
      if (budget_exhausted || context_exhausted) return {ControlAction::InjectFinalStep, std::nullopt};
      return {ControlAction::Proceed, std::nullopt};
    }
    case IncomingRound::Kind::RawResponse: {
      if (incoming.response_tokens > cfg.max_response_tokens_per_turn) {
        return {ControlAction::InjectTruncated, std::nullopt};
      }
      return {ControlAction::Proceed, std::nullopt};
    }
    case IncomingRound::Kind::Parsed: {
      if (incoming.response_tokens > cfg.max_response_tokens_per_turn) {
        return {ControlAction::InjectTruncated, std::nullopt};
      }
      if (incoming.round != nullptr && incoming.round->is_tool_call()) {
        if (state.tool_calls_used >= cfg.max_tool_calls) {
          return {ControlAction::InjectFinalStep, std::nullopt};
        }
        if (state.context_tokens_used >= cfg.max_context_tokens) {
          if (cfg.final_step_on_context_overflow) return {ControlAction::InjectFinalStep, std::nullopt};
          return {ControlAction::Terminate, TerminalOutcome::FallbackContext};
        }
      }
      return {ControlAction::Proceed, std::nullopt};
    }
  }
  return {ControlAction::Proceed, std::nullopt};
}

// ---------------------------------------------------------------------------
// Policy client
// ---------------------------------------------------------------------------

struct PolicyError {
  std::string message;
};

class PolicyClient {
 public:
  virtual ~PolicyClient() = default;
  virtual Expected<std::string, PolicyError> complete(const std::vector<Message>& conversation,
                                                      const Decoding& decoding,
                                                      int max_response_tokens) = 0;
};

/// Replays a fixed list of responses in order; used by tests and the
/// fixture-driven CLI mode. Exhausting the script is a transport error.
class ScriptedPolicy : public PolicyClient {
 public:
  explicit ScriptedPolicy(std::vector<std::string> responses)
      : responses_(std::move(responses)) {}

  Expected<std::string, PolicyError> complete(const std::vector<Message>&, const Decoding&,
                                              int) override {
    if (next_ >= responses_.size()) {
      return PolicyError{"scripted policy has no more responses"};
    }
    return responses_[next_++];
  }

  size_t remaining() const { return responses_.size() - next_; }

 private:
  std::vector<std::string> responses_;
  size_t next_ = 0;
};

// ---------------------------------------------------------------------------
// Trajectory
// ---------------------------------------------------------------------------

struct RoundRecord {
  std::string raw;  // model output, verbatim
  ParseMode mode = ParseMode::Normal;
  std::vector<std::string> injected;  // control tags appended before this request
  std::optional<ParsedRound> round;
  std::optional<protocol::ParseError> error;
  std::optional<std::string> feedback;  // tool feedback returned for this round
};

struct Trajectory {
  std::string original_prompt;
  std::vector<RoundRecord> rounds;
  TerminalOutcome outcome = TerminalOutcome::FallbackMalformed;
  std::optional<protocol::ValidationReport> validation;  // present when an answer parsed
  std::optional<AnswerPayload> answer;
  int tool_calls_used = 0;
  int turns_used = 0;
  long context_tokens_used = 0;
};

struct GenerationRequest {
  std::string grounded_prompt;
  std::vector<toolkit::ImageResult> references;  // sorted by img_id
  bool fallback_used = false;
};

/// Resolves a violation-free answer into a generation request; anything
/// else falls back to the original prompt with no references.
inline GenerationRequest finalize(const EpisodeState& state,
                                  const std::optional<AnswerPayload>& answer) {
  GenerationRequest request;
  if (answer.has_value() &&
      protocol::validate_answer(*answer, state.registry.known_ids()).clean()) {
    request.grounded_prompt = answer->gen_prompt;
    for (const protocol::AnswerReference& ref : answer->references) {
      request.references.push_back(*state.registry.lookup(ref.img_id));
    }
    request.fallback_used = false;
    return request;
  }
  request.grounded_prompt = state.original_prompt;
  request.fallback_used = true;
  return request;
}

// ---------------------------------------------------------------------------
// Tool dispatch
// ---------------------------------------------------------------------------

namespace detail {

inline int requested_top_k(const Json& args) {
  if (args.contains("top_k") && args["top_k"].is_number_integer()) {
    int k = args["top_k"].get<int>();
    if (k >= 1) return k;
  }
  return toolkit::kDefaultTopK;
}

}  // namespace detail

/// Runs one tool call and renders its feedback text. Backend failures come
/// back as "tool error: ..." feedback rather than ending the episode.
inline std::string execute_tool_call(const protocol::ToolCallRequest& call,
                                     toolkit::ToolBackend& tools,
                                     toolkit::ImageRegistry& registry,
                                     const EpisodeConfig& cfg) {
  const Json& args = call.arguments;
  switch (call.name) {
    case protocol::ToolName::Search: {
      std::vector<std::string> queries;
      for (const Json& q : args["queries"]) {
        if (q.is_string()) queries.push_back(q.get<std::string>());
      }
      auto results = toolkit::search(queries, detail::requested_top_k(args), tools);
      if (!results.ok()) return toolkit::render_tool_error(results.error());
      return toolkit::render_search_feedback(queries, results.value());
    }
    case protocol::ToolName::ImageSearch: {
      int top_k = std::min(detail::requested_top_k(args), cfg.max_images_per_turn);
      auto results =
          toolkit::image_search(args["query"].get<std::string>(), top_k, tools, registry);
      if (!results.ok()) return toolkit::render_tool_error(results.error());
      return toolkit::render_image_feedback(results.value());
    }
    case protocol::ToolName::Browse: {
      std::string url = args["url"].get<std::string>();
      auto summary = toolkit::browse(url, args["query"].get<std::string>(), tools);
      if (!summary.ok()) return toolkit::render_tool_error(summary.error());
      return toolkit::render_browse_feedback(url, summary.value());
    }
  }
  return "tool error: unknown tool";
}

// ---------------------------------------------------------------------------
// Episode loop
// ---------------------------------------------------------------------------

struct EpisodeResult {
  Trajectory trajectory;
  EpisodeState state;
};

inline EpisodeResult run_episode_full(const std::string& prompt, PolicyClient& policy,
                                      toolkit::ToolBackend& tools, const EpisodeConfig& cfg) {
  EpisodeResult result;
  EpisodeState& state = result.state;
  Trajectory& traj = result.trajectory;

  auto append = [&](Role role, std::string content) {
    state.context_tokens_used += cfg.tokens_of(content);
    state.conversation.push_back(Message{role, std::move(content)});
  };

  state.original_prompt = prompt;
  state.registry = toolkit::ImageRegistry(cfg.image_id_start);
  if (!cfg.system_prompt.empty()) append(Role::System, cfg.system_prompt);
  append(Role::User, prompt);
  traj.original_prompt = prompt;

  bool final_step_armed = false;
  TerminalOutcome final_step_outcome = TerminalOutcome::FallbackBudget;
  bool truncated_pending = false;
  bool retry_used = false;
  std::vector<std::string> pending_injections;

  auto arm_final_step = [&]() {
    if (final_step_armed) return;
    final_step_armed = true;
    bool budget_trigger = state.tool_calls_used >= cfg.max_tool_calls ||
                          state.turns_used >= cfg.max_turns - 1;
    final_step_outcome =
        budget_trigger ? TerminalOutcome::FallbackBudget : TerminalOutcome::FallbackContext;
    append(Role::User, final_step_message());
    pending_injections.push_back("final_step");
  };

  while (!state.terminal) {
    auto checkpoint = enforce_budgets(state, cfg, IncomingRound::next_request());
    if (checkpoint.action == ControlAction::Terminate) {
      state.terminal = *checkpoint.reason;
      break;
    }
    if (checkpoint.action == ControlAction::InjectFinalStep) arm_final_step();

    ParseMode mode = final_step_armed ? ParseMode::FinalStepOverride
                     : truncated_pending ? ParseMode::TruncationRecovery
                                         : ParseMode::Normal;
    truncated_pending = false;

    std::optional<std::string> response;
    for (int attempt = 0; attempt <= cfg.policy_retries && !response; ++attempt) {
      auto r = policy.complete(state.conversation, cfg.decoding, cfg.max_response_tokens_per_turn);
      if (r.ok()) response = std::move(r).value();
    }
    if (!response) {
      state.terminal = TerminalOutcome::FallbackMalformed;
      break;
    }

    state.turns_used += 1;
    append(Role::Assistant, *response);

    RoundRecord record;
    record.raw = *response;
    record.mode = mode;
    record.injected = pending_injections;
    pending_injections.clear();

    long response_tokens = cfg.tokens_of(*response);
    auto length_check = enforce_budgets(state, cfg, IncomingRound::raw_response(response_tokens));
    if (length_check.action == ControlAction::InjectTruncated) {
      traj.rounds.push_back(std::move(record));
      append(Role::User, truncated_message());
      truncated_pending = true;
      pending_injections.push_back("truncated");
      continue;
    }

    auto parsed = protocol::parse_round(*response, mode);
    if (!parsed.ok()) {
      record.error = parsed.error();
      traj.rounds.push_back(std::move(record));
      if (mode == ParseMode::FinalStepOverride &&
          parsed.error().code == protocol::ParseErrorCode::ToolCallInFinalStep) {
        state.terminal = final_step_outcome;
        break;
      }
      if (!retry_used) {
        retry_used = true;
        append(Role::User, retry_message(parsed.error(), final_step_armed));
        pending_injections.push_back("retry");
        continue;
      }
      state.terminal = TerminalOutcome::FallbackMalformed;
      break;
    }
    retry_used = false;

    const ParsedRound& round = parsed.value();
    record.round = round;

    if (round.is_answer()) {
      auto report = protocol::validate_answer(round.answer(), state.registry.known_ids());
      traj.validation = report;
      traj.answer = round.answer();
      traj.rounds.push_back(std::move(record));
      state.terminal =
          report.clean() ? TerminalOutcome::Answered : TerminalOutcome::FallbackValidation;
      break;
    }

    auto guard = enforce_budgets(state, cfg, IncomingRound::parsed(round, response_tokens));
    if (guard.action == ControlAction::Terminate) {
      traj.rounds.push_back(std::move(record));
      state.terminal = *guard.reason;
      break;
    }
    if (guard.action == ControlAction::InjectFinalStep) {
      // The call cannot run within budget; demand the answer instead.
      traj.rounds.push_back(std::move(record));
      arm_final_step();
      continue;
    }

    state.tool_calls_used += 1;
    std::string feedback = execute_tool_call(round.tool_call(), tools, state.registry, cfg);
    record.feedback = feedback;
    traj.rounds.push_back(std::move(record));
    append(Role::Tool, std::move(feedback));
  }

  traj.outcome = *state.terminal;
  traj.tool_calls_used = state.tool_calls_used;
  traj.turns_used = state.turns_used;
  traj.context_tokens_used = state.context_tokens_used;
  return result;
}

inline Trajectory run_episode(const std::string& prompt, PolicyClient& policy,
                              toolkit::ToolBackend& tools, const EpisodeConfig& cfg) {
  return run_episode_full(prompt, policy, tools, cfg).trajectory;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

inline Json parsed_round_to_json(const ParsedRound& round) {
  Json doc;
  doc["think"] = round.think.has_value() ? Json(*round.think) : Json(nullptr);
  if (round.is_tool_call()) {
    doc["action"] = "tool_call";
    doc["tool"] = protocol::to_string(round.tool_call().name);
    doc["arguments"] = round.tool_call().arguments;
  } else {
    doc["action"] = "answer";
    doc["gen_prompt"] = round.answer().gen_prompt;
    Json refs = Json::array();
    for (const auto& ref : round.answer().references) {
      refs.push_back({{"img_id", ref.img_id.text()}, {"note", ref.note}});
    }
    doc["reference_images"] = refs;
  }
  return doc;
}

inline Json validation_to_json(const protocol::ValidationReport& report) {
  Json list = Json::array();
  for (const auto& violation : report.violations) {
    list.push_back({{"kind", protocol::to_string(violation.kind)}, {"detail", violation.detail}});
  }
  return list;
}

inline Json trajectory_to_json(const Trajectory& traj) {
  Json doc;
  doc["version"] = 1;
  doc["prompt"] = traj.original_prompt;
  doc["outcome"] = to_string(traj.outcome);
  doc["turns_used"] = traj.turns_used;
  doc["tool_calls_used"] = traj.tool_calls_used;
  doc["context_tokens_used"] = traj.context_tokens_used;
  Json rounds = Json::array();
  for (const RoundRecord& record : traj.rounds) {
    Json r;
    r["raw"] = record.raw;
    r["mode"] = record.mode == ParseMode::Normal              ? "normal"
                : record.mode == ParseMode::FinalStepOverride ? "final_step"
                                                              : "truncation_recovery";
    r["injected"] = record.injected;
    r["parsed"] = record.round.has_value() ? parsed_round_to_json(*record.round) : Json(nullptr);
    r["parse_error"] = record.error.has_value()
                           ? Json{{"code", protocol::to_string(record.error->code)},
                                  {"message", record.error->message}}
                           : Json(nullptr);
    r["feedback"] = record.feedback.has_value() ? Json(*record.feedback) : Json(nullptr);
    rounds.push_back(std::move(r));
  }
  doc["rounds"] = std::move(rounds);
  doc["validation"] =
      traj.validation.has_value() ? validation_to_json(*traj.validation) : Json(nullptr);
  return doc;
}

inline Json generation_request_to_json(const GenerationRequest& request) {
  Json doc;
  doc["version"] = 1;
  doc["grounded_prompt"] = request.grounded_prompt;
  doc["fallback_used"] = request.fallback_used;
  Json refs = Json::array();
  for (const toolkit::ImageResult& image : request.references) {
    refs.push_back({{"img_id", image.img_id.text()},
                    {"title", image.title},
                    {"url", image.url},
                    {"local_path", image.local_path}});
  }
  doc["references"] = std::move(refs);
  return doc;
}

}  // namespace gensearch::episode
