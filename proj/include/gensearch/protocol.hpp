#pragma once

/// Round format for the search agent: each model turn carries an optional
/// <think> block plus exactly one action, either a <tool_call> or an
/// <answer>. Parsing is strict about actions and tolerant about text
/// outside the recognized tags.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

#include "gensearch/common.hpp"

namespace gensearch::protocol {

using Json = nlohmann::json;

enum class ParseMode {
  Normal,             // <think> required, one tool call or answer
  FinalStepOverride,  // answer only, tool calls rejected, think optional
  TruncationRecovery, // bare tool call or answer, think optional
};

enum class ParseErrorCode {
  MissingThink,
  MultipleToolCalls,
  MultipleAnswers,
  BothActionAndAnswer,
  NoAction,
  MalformedJson,
  ToolCallInFinalStep,
  UnknownTool,
  MissingKey,
  ExtraKey,
  EmptyReferences,
  TooManyReferences,
  BadImageIdSyntax,
};

inline const char* to_string(ParseErrorCode code) {
  switch (code) {
    case ParseErrorCode::MissingThink: return "MissingThink";
    case ParseErrorCode::MultipleToolCalls: return "MultipleToolCalls";
    case ParseErrorCode::MultipleAnswers: return "MultipleAnswers";
    case ParseErrorCode::BothActionAndAnswer: return "BothActionAndAnswer";
    case ParseErrorCode::NoAction: return "NoAction";
    case ParseErrorCode::MalformedJson: return "MalformedJson";
    case ParseErrorCode::ToolCallInFinalStep: return "ToolCallInFinalStep";
    case ParseErrorCode::UnknownTool: return "UnknownTool";
    case ParseErrorCode::MissingKey: return "MissingKey";
    case ParseErrorCode::ExtraKey: return "ExtraKey";
    case ParseErrorCode::EmptyReferences: return "EmptyReferences";
    case ParseErrorCode::TooManyReferences: return "TooManyReferences";
    case ParseErrorCode::BadImageIdSyntax: return "BadImageIdSyntax";
  }
  return "UnknownError";
}

struct ParseError {
  ParseErrorCode code;
  std::string message;
};

inline std::string describe(const ParseError& e) {
  return std::string(to_string(e.code)) + ": " + e.message;
}

/// Image identifier: positive ordinal rendered as IMG_ plus at least three
/// digits (IMG_007, IMG_1234). Only the canonical rendering parses, so the
/// text and ordinal forms are in bijection.
class ImageId {
 public:
  static std::optional<ImageId> from_ordinal(std::uint64_t ordinal) {
    if (ordinal == 0) return std::nullopt;
    return ImageId(ordinal);
  }

  static std::optional<ImageId> parse(std::string_view text) {
    if (text.substr(0, 4) != "IMG_") return std::nullopt;
    std::string_view digits = text.substr(4);
    if (digits.size() < 3) return std::nullopt;
    if (digits.size() > 3 && digits.front() == '0') return std::nullopt;
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (ec != std::errc() || ptr != digits.data() + digits.size()) return std::nullopt;
    if (value == 0) return std::nullopt;
    return ImageId(value);
  }

  std::uint64_t ordinal() const { return ordinal_; }

  std::string text() const {
    std::string digits = std::to_string(ordinal_);
    if (digits.size() < 3) digits.insert(0, 3 - digits.size(), '0');
    return "IMG_" + digits;
  }

  auto operator<=>(const ImageId&) const = default;

 private:
  explicit ImageId(std::uint64_t ordinal) : ordinal_(ordinal) {}
  std::uint64_t ordinal_ = 1;
};

enum class ToolName { Search, ImageSearch, Browse };

inline const char* to_string(ToolName name) {
  switch (name) {
    case ToolName::Search: return "search";
    case ToolName::ImageSearch: return "image_search";
    case ToolName::Browse: return "browse";
  }
  return "?";
}

inline std::optional<ToolName> tool_from_string(std::string_view s) {
  if (s == "search") return ToolName::Search;
  if (s == "image_search") return ToolName::ImageSearch;
  if (s == "browse") return ToolName::Browse;
  return std::nullopt;
}

struct ToolCallRequest {
  ToolName name;
  Json arguments;  // key-value document; required keys depend on the tool

  bool operator==(const ToolCallRequest& other) const {
    return name == other.name && arguments == other.arguments;
  }
};

struct AnswerReference {
  ImageId img_id;
  std::string note;

  bool operator==(const AnswerReference&) const = default;
};

struct AnswerPayload {
  std::string gen_prompt;
  std::vector<AnswerReference> references;  // 1..=5 entries

  bool operator==(const AnswerPayload&) const = default;
};

struct ParsedRound {
  std::optional<std::string> think;
  std::variant<ToolCallRequest, AnswerPayload> action;
  ParseMode mode = ParseMode::Normal;

  bool is_tool_call() const { return std::holds_alternative<ToolCallRequest>(action); }
  bool is_answer() const { return std::holds_alternative<AnswerPayload>(action); }
  const ToolCallRequest& tool_call() const { return std::get<ToolCallRequest>(action); }
  const AnswerPayload& answer() const { return std::get<AnswerPayload>(action); }

  bool operator==(const ParsedRound& other) const {
    return think == other.think && mode == other.mode && action == other.action;
  }
};

namespace detail {

// Extracts the bodies of every <tag>...</tag> pair, scanning left to right.
// Unclosed tags are ignored rather than treated as errors.
inline std::vector<std::string> extract_blocks(std::string_view text, std::string_view tag) {
  std::vector<std::string> bodies;
  const std::string open = "<" + std::string(tag) + ">";
  const std::string close = "</" + std::string(tag) + ">";
  size_t pos = 0;
  while (true) {
    size_t start = text.find(open, pos);
    if (start == std::string_view::npos) break;
    size_t body_start = start + open.size();
    size_t end = text.find(close, body_start);
    if (end == std::string_view::npos) break;
    bodies.emplace_back(text.substr(body_start, end - body_start));
    pos = end + close.size();
  }
  return bodies;
}

inline Expected<Json, ParseError> parse_json_body(const std::string& body) {
  std::string cleaned = strip_code_fences(body);
  Json parsed = Json::parse(cleaned, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded()) {
    return ParseError{ParseErrorCode::MalformedJson, "body is not valid JSON"};
  }
  return parsed;
}

}  // namespace detail

/// Validates the wire form {"name": ..., "arguments": {...}} and the
/// per-tool required argument keys (search: queries; image_search: query;
/// browse: url, query). Optional keys such as top_k pass through.
inline Expected<ToolCallRequest, ParseError> tool_call_from_json(const Json& doc) {
  if (!doc.is_object()) {
    return ParseError{ParseErrorCode::MalformedJson, "tool call body must be a JSON object"};
  }
  if (!doc.contains("name")) {
    return ParseError{ParseErrorCode::MissingKey, "tool call is missing 'name'"};
  }
  if (!doc["name"].is_string()) {
    return ParseError{ParseErrorCode::MalformedJson, "'name' must be a string"};
  }
  auto name = tool_from_string(doc["name"].get<std::string>());
  if (!name) {
    return ParseError{ParseErrorCode::UnknownTool,
                      "unknown tool '" + doc["name"].get<std::string>() + "'"};
  }
  if (!doc.contains("arguments")) {
    return ParseError{ParseErrorCode::MissingKey, "tool call is missing 'arguments'"};
  }
  const Json& args = doc["arguments"];
  if (!args.is_object()) {
    return ParseError{ParseErrorCode::MalformedJson, "'arguments' must be an object"};
  }

  auto require = [&](const char* key, bool want_array) -> std::optional<ParseError> {
    if (!args.contains(key)) {
      return ParseError{ParseErrorCode::MissingKey,
                        std::string("'") + to_string(*name) + "' requires argument '" + key + "'"};
    }
    if (want_array ? !args[key].is_array() : !args[key].is_string()) {
      return ParseError{ParseErrorCode::MalformedJson,
                        std::string("argument '") + key + "' has the wrong type"};
    }
    return std::nullopt;
  };

  std::optional<ParseError> err;
  switch (*name) {
    case ToolName::Search: err = require("queries", true); break;
    case ToolName::ImageSearch: err = require("query", false); break;
    case ToolName::Browse:
      err = require("url", false);
      if (!err) err = require("query", false);
      break;
  }
  if (err) return *err;
  return ToolCallRequest{*name, args};
}

/// Parses the answer JSON: exactly {gen_prompt, reference_images}, each
/// reference exactly {img_id, note}, 1..=5 references. Sort order is not
/// checked here; validate_answer reports it separately.
inline Expected<AnswerPayload, ParseError> parse_answer_payload(const Json& doc) {
  if (!doc.is_object()) {
    return ParseError{ParseErrorCode::MalformedJson, "answer body must be a JSON object"};
  }
  for (const char* key : {"gen_prompt", "reference_images"}) {
    if (!doc.contains(key)) {
      return ParseError{ParseErrorCode::MissingKey, std::string("answer is missing '") + key + "'"};
    }
  }
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (it.key() != "gen_prompt" && it.key() != "reference_images") {
      return ParseError{ParseErrorCode::ExtraKey, "unexpected answer key '" + it.key() + "'"};
    }
  }
  if (!doc["gen_prompt"].is_string()) {
    return ParseError{ParseErrorCode::MalformedJson, "'gen_prompt' must be a string"};
  }
  if (!doc["reference_images"].is_array()) {
    return ParseError{ParseErrorCode::MalformedJson, "'reference_images' must be an array"};
  }

  const Json& refs = doc["reference_images"];
  if (refs.empty()) {
    return ParseError{ParseErrorCode::EmptyReferences, "reference_images is empty"};
  }
  if (refs.size() > 5) {
    return ParseError{ParseErrorCode::TooManyReferences,
                      "reference_images has " + std::to_string(refs.size()) + " entries (max 5)"};
  }

  AnswerPayload payload;
  payload.gen_prompt = doc["gen_prompt"].get<std::string>();
  for (const Json& item : refs) {
    if (!item.is_object()) {
      return ParseError{ParseErrorCode::MalformedJson, "reference entry must be an object"};
    }
    for (const char* key : {"img_id", "note"}) {
      if (!item.contains(key)) {
        return ParseError{ParseErrorCode::MissingKey,
                          std::string("reference entry is missing '") + key + "'"};
      }
    }
    for (auto it = item.begin(); it != item.end(); ++it) {
      if (it.key() != "img_id" && it.key() != "note") {
        return ParseError{ParseErrorCode::ExtraKey, "unexpected reference key '" + it.key() + "'"};
      }
    }
    if (!item["img_id"].is_string()) {
      return ParseError{ParseErrorCode::BadImageIdSyntax, "'img_id' must be a string"};
    }
    if (!item["note"].is_string()) {
      return ParseError{ParseErrorCode::MalformedJson, "'note' must be a string"};
    }
    auto id = ImageId::parse(item["img_id"].get<std::string>());
    if (!id) {
      return ParseError{ParseErrorCode::BadImageIdSyntax,
                        "bad image id '" + item["img_id"].get<std::string>() + "'"};
    }
    payload.references.push_back(AnswerReference{*id, item["note"].get<std::string>()});
  }
  return payload;
}

/// Parses one complete model response. Text outside the recognized tags is
/// ignored; action violations are hard errors.
inline Expected<ParsedRound, ParseError> parse_round(std::string_view text, ParseMode mode) {
  auto thinks = detail::extract_blocks(text, "think");
  auto tool_bodies = detail::extract_blocks(text, "tool_call");
  auto answer_bodies = detail::extract_blocks(text, "answer");

  if (mode == ParseMode::FinalStepOverride && !tool_bodies.empty()) {
    return ParseError{ParseErrorCode::ToolCallInFinalStep,
                      "tool calls are forbidden in the final step"};
  }
  if (tool_bodies.size() > 1) {
    return ParseError{ParseErrorCode::MultipleToolCalls,
                      std::to_string(tool_bodies.size()) + " tool_call blocks in one round"};
  }
  if (answer_bodies.size() > 1) {
    return ParseError{ParseErrorCode::MultipleAnswers,
                      std::to_string(answer_bodies.size()) + " answer blocks in one round"};
  }
  if (!tool_bodies.empty() && !answer_bodies.empty()) {
    return ParseError{ParseErrorCode::BothActionAndAnswer,
                      "round contains both a tool call and an answer"};
  }
  if (tool_bodies.empty() && answer_bodies.empty()) {
    return ParseError{ParseErrorCode::NoAction, "round contains neither a tool call nor an answer"};
  }
  if (mode == ParseMode::Normal && thinks.empty()) {
    return ParseError{ParseErrorCode::MissingThink, "round is missing the <think> block"};
  }

  ParsedRound round;
  round.mode = mode;
  if (!thinks.empty()) round.think = thinks.front();

  if (!tool_bodies.empty()) {
    auto body = detail::parse_json_body(tool_bodies.front());
    if (!body.ok()) return body.error();
    auto call = tool_call_from_json(body.value());
    if (!call.ok()) return call.error();
    round.action = std::move(call).value();
  } else {
    auto body = detail::parse_json_body(answer_bodies.front());
    if (!body.ok()) return body.error();
    auto payload = parse_answer_payload(body.value());
    if (!payload.ok()) return payload.error();
    round.action = std::move(payload).value();
  }
  return round;
}

// ---------------------------------------------------------------------------
// Answer validation
// ---------------------------------------------------------------------------

enum class ViolationKind {
  UnsortedIds,
  UnknownImageId,
  ImgIdInPrompt,
  UrlInPrompt,
  OrdinalMismatch,
  NoOrdinalReference,
};

inline const char* to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::UnsortedIds: return "UnsortedIds";
    case ViolationKind::UnknownImageId: return "UnknownImageId";
    case ViolationKind::ImgIdInPrompt: return "ImgIdInPrompt";
    case ViolationKind::UrlInPrompt: return "UrlInPrompt";
    case ViolationKind::OrdinalMismatch: return "OrdinalMismatch";
    case ViolationKind::NoOrdinalReference: return "NoOrdinalReference";
  }
  return "?";
}

struct Violation {
  ViolationKind kind;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool clean() const { return violations.empty(); }
  bool has(ViolationKind kind) const {
    return std::any_of(violations.begin(), violations.end(),
                       [&](const Violation& v) { return v.kind == kind; });
  }
};

namespace detail {

inline bool contains_img_id_pattern(std::string_view text) {
  size_t pos = 0;
  while ((pos = text.find("IMG_", pos)) != std::string_view::npos) {
    size_t digit = pos + 4;
    if (digit < text.size() && std::isdigit(static_cast<unsigned char>(text[digit]))) {
      return true;
    }
    pos += 4;
  }
  return false;
}

inline bool contains_url_scheme(std::string_view text) {
  std::string lowered = to_lower(text);
  return lowered.find("http://") != std::string::npos ||
         lowered.find("https://") != std::string::npos;
}

// Recognized ordinal phrases, bounded by the five-reference cap; "the only
// reference image" counts as the first.
inline std::vector<size_t> ordinal_mentions(std::string_view gen_prompt) {
  static const std::pair<const char*, size_t> kPhrases[] = {
      {"the first reference image", 1},  {"the second reference image", 2},
      {"the third reference image", 3},  {"the fourth reference image", 4},
      {"the fifth reference image", 5},  {"the only reference image", 1},
  };
  std::string lowered = to_lower(gen_prompt);
  std::vector<size_t> mentioned;
  for (const auto& [phrase, n] : kPhrases) {
    if (lowered.find(phrase) != std::string::npos) mentioned.push_back(n);
  }
  std::sort(mentioned.begin(), mentioned.end());
  mentioned.erase(std::unique(mentioned.begin(), mentioned.end()), mentioned.end());
  return mentioned;
}

}  // namespace detail

/// Checks an answer against the ids allocated during the episode. Violations
/// are reported as data; an empty report means the answer is usable.
inline ValidationReport validate_answer(const AnswerPayload& payload,
                                        const std::set<ImageId>& known_ids) {
  ValidationReport report;

  for (size_t i = 1; i < payload.references.size(); ++i) {
    if (!(payload.references[i - 1].img_id < payload.references[i].img_id)) {
      report.violations.push_back(
          {ViolationKind::UnsortedIds,
           payload.references[i - 1].img_id.text() + " is not before " +
               payload.references[i].img_id.text()});
      break;
    }
  }

  for (const AnswerReference& ref : payload.references) {
    if (!known_ids.contains(ref.img_id)) {
      report.violations.push_back(
          {ViolationKind::UnknownImageId, ref.img_id.text() + " was never returned by image_search"});
    }
  }

  if (detail::contains_img_id_pattern(payload.gen_prompt)) {
    report.violations.push_back({ViolationKind::ImgIdInPrompt, "gen_prompt mentions an IMG_ id"});
  }
  if (detail::contains_url_scheme(payload.gen_prompt)) {
    report.violations.push_back({ViolationKind::UrlInPrompt, "gen_prompt contains a URL"});
  }

  auto mentioned = detail::ordinal_mentions(payload.gen_prompt);
  if (mentioned.empty()) {
    report.violations.push_back(
        {ViolationKind::NoOrdinalReference, "gen_prompt mentions no ordinal reference phrase"});
  } else {
    for (size_t n : mentioned) {
      if (n > payload.references.size()) {
        report.violations.push_back(
            {ViolationKind::OrdinalMismatch,
             "gen_prompt mentions reference " + std::to_string(n) + " but only " +
                 std::to_string(payload.references.size()) + " are listed"});
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline std::string answer_payload_to_json_text(const AnswerPayload& payload) {
  // Keys emitted in canonical order: gen_prompt, then reference_images.
  std::string out = "{\"gen_prompt\": " + Json(payload.gen_prompt).dump() +
                    ", \"reference_images\": [";
  for (size_t i = 0; i < payload.references.size(); ++i) {
    if (i > 0) out += ", ";
    out += "{\"img_id\": \"" + payload.references[i].img_id.text() +
           "\", \"note\": " + Json(payload.references[i].note).dump() + "}";
  }
  out += "]}";
  return out;
}

inline std::string tool_call_to_json_text(const ToolCallRequest& call) {
  return std::string("{\"name\": \"") + to_string(call.name) +
         "\", \"arguments\": " + call.arguments.dump() + "}";
}

/// Canonical text rendering: think tag first, then the single action tag.
/// parse_round(serialize_round(r), r.mode) == r for every valid round.
inline std::string serialize_round(const ParsedRound& round) {
  std::string out;
  if (round.think) {
    out += "<think>" + *round.think + "</think>\n";
  }
  if (round.is_tool_call()) {
    out += "<tool_call>\n" + tool_call_to_json_text(round.tool_call()) + "\n</tool_call>";
  } else {
    out += "<answer>\n" + answer_payload_to_json_text(round.answer()) + "\n</answer>";
  }
  return out;
}

}  // namespace gensearch::protocol
