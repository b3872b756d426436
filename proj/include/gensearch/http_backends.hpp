#pragma once

/// HTTP implementations of the pluggable backends: the three tool endpoints,
/// the chat-completion policy endpoint, and the judge endpoint. All speak
/// JSON over POST. Wire formats are documented in docs/fixtures.md and
/// docs/trajectory.md. Clients are created per request, so one backend
/// object can serve concurrent episodes.

#include <chrono>
#include <memory>
#include <optional>
#include <string>

#include "httplib.h"
#include "json.hpp"

#include "gensearch/common.hpp"
#include "gensearch/episode.hpp"
#include "gensearch/scoring.hpp"
#include "gensearch/toolkit.hpp"

namespace gensearch::http {

using Json = nlohmann::json;

struct Endpoint {
  std::string host;  // scheme://host[:port]
  std::string path;  // leading slash
};

/// Splits "http://host:port/some/path" into the client base and path.
inline std::optional<Endpoint> split_url(const std::string& url) {
  size_t scheme = url.find("://");
  if (scheme == std::string::npos) return std::nullopt;
  size_t path_start = url.find('/', scheme + 3);
  if (path_start == std::string::npos) return Endpoint{url, "/"};
  return Endpoint{url.substr(0, path_start), url.substr(path_start)};
}

struct HttpOptions {
  std::string api_key;  // sent as a bearer token when non-empty
  int retries = 2;
  std::chrono::seconds connect_timeout{10};
  std::chrono::seconds read_timeout{120};
};

namespace detail {

inline Expected<Json, std::string> post_json(const std::string& url, const Json& body,
                                             const HttpOptions& options) {
  auto endpoint = split_url(url);
  if (!endpoint) return std::string("bad endpoint URL: " + url);

  std::string last_error = "no attempts made";
  for (int attempt = 0; attempt <= options.retries; ++attempt) {
    httplib::Client client(endpoint->host);
    client.set_connection_timeout(options.connect_timeout);
    client.set_read_timeout(options.read_timeout);
    httplib::Headers headers;
    if (!options.api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + options.api_key);
    }
    auto result = client.Post(endpoint->path, headers, body.dump(), "application/json");
    if (!result) {
      last_error = "transport failure contacting " + url;
      continue;
    }
    if (result->status != 200) {
      last_error = url + " returned status " + std::to_string(result->status);
      if (result->status >= 400 && result->status < 500) break;  // not retryable
      continue;
    }
    Json doc = Json::parse(result->body, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded()) {
      last_error = url + " returned invalid JSON";
      continue;
    }
    return doc;
  }
  return last_error;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Tools
// ---------------------------------------------------------------------------

/// POST {search_url} {"query", "top_k"} -> {"results": [{title,url,snippet}]}
/// POST {image_url}  {"query", "top_k"} -> {"results": [{title,url,local_path}]}
/// POST {browse_url} {"url", "query"}   -> {"summary": "..."}
class HttpToolBackend : public toolkit::ToolBackend {
 public:
  HttpToolBackend(std::string search_url, std::string image_url, std::string browse_url,
                  HttpOptions options = {})
      : search_url_(std::move(search_url)),
        image_url_(std::move(image_url)),
        browse_url_(std::move(browse_url)),
        options_(std::move(options)) {}

  Expected<std::vector<toolkit::SearchResult>, toolkit::ToolError> search(const std::string& query,
                                                                          int top_k) override {
    auto doc = detail::post_json(search_url_, Json{{"query", query}, {"top_k", top_k}}, options_);
    if (!doc.ok()) {
      return toolkit::ToolError{toolkit::ToolErrorCode::BackendUnavailable, doc.error()};
    }
    std::vector<toolkit::SearchResult> out;
    if (doc->contains("results") && (*doc)["results"].is_array()) {
      for (const Json& item : (*doc)["results"]) {
        out.push_back({item.value("title", ""), item.value("url", ""), item.value("snippet", "")});
      }
    }
    return out;
  }

  Expected<std::vector<toolkit::RawImage>, toolkit::ToolError> image_search(
      const std::string& query, int top_k) override {
    auto doc = detail::post_json(image_url_, Json{{"query", query}, {"top_k", top_k}}, options_);
    if (!doc.ok()) {
      return toolkit::ToolError{toolkit::ToolErrorCode::BackendUnavailable, doc.error()};
    }
    std::vector<toolkit::RawImage> out;
    if (doc->contains("results") && (*doc)["results"].is_array()) {
      for (const Json& item : (*doc)["results"]) {
        out.push_back(
            {item.value("title", ""), item.value("url", ""), item.value("local_path", "")});
      }
    }
    return out;
  }

  Expected<std::string, toolkit::ToolError> browse(const std::string& url,
                                                   const std::string& query) override {
    auto doc = detail::post_json(browse_url_, Json{{"url", url}, {"query", query}}, options_);
    if (!doc.ok()) {
      return toolkit::ToolError{toolkit::ToolErrorCode::BackendUnavailable, doc.error()};
    }
    if (!doc->contains("summary") || !(*doc)["summary"].is_string()) {
      return toolkit::ToolError{toolkit::ToolErrorCode::PageFetchFailed,
                                "summarizer returned no summary for " + url};
    }
    return (*doc)["summary"].get<std::string>();
  }

 private:
  std::string search_url_;
  std::string image_url_;
  std::string browse_url_;
  HttpOptions options_;
};

// ---------------------------------------------------------------------------
// Policy
// ---------------------------------------------------------------------------

/// Chat-completion style endpoint: POST {policy_url}
/// {"model", "messages": [{"role","content"}], "temperature", "top_p",
///  "max_tokens"} -> {"choices": [{"message": {"content": "..."}}]}.
class HttpPolicyClient : public episode::PolicyClient {
 public:
  HttpPolicyClient(std::string url, std::string model = "", HttpOptions options = {})
      : url_(std::move(url)), model_(std::move(model)), options_(std::move(options)) {}

  Expected<std::string, episode::PolicyError> complete(
      const std::vector<episode::Message>& conversation, const episode::Decoding& decoding,
      int max_response_tokens) override {
    Json messages = Json::array();
    for (const episode::Message& message : conversation) {
      messages.push_back({{"role", episode::to_string(message.role)}, {"content", message.content}});
    }
    Json body{{"messages", messages},
              {"temperature", decoding.temperature},
              {"top_p", decoding.top_p},
              {"max_tokens", max_response_tokens}};
    if (!model_.empty()) body["model"] = model_;

    auto doc = detail::post_json(url_, body, options_);
    if (!doc.ok()) return episode::PolicyError{doc.error()};
    if (!doc->contains("choices") || !(*doc)["choices"].is_array() || (*doc)["choices"].empty()) {
      return episode::PolicyError{"policy endpoint returned no choices"};
    }
    const Json& first = (*doc)["choices"][0];
    if (!first.contains("message") || !first["message"].contains("content") ||
        !first["message"]["content"].is_string()) {
      return episode::PolicyError{"policy endpoint returned no message content"};
    }
    return first["message"]["content"].get<std::string>();
  }

 private:
  std::string url_;
  std::string model_;
  HttpOptions options_;
};

// ---------------------------------------------------------------------------
// Judge
// ---------------------------------------------------------------------------

/// Judge endpoint, same chat-completion shape as the policy. The system
/// message is the evaluation template; the user message carries the sample
/// fields (image references passed through opaquely) plus any retry hint.
class HttpJudgeClient : public scoring::JudgeClient {
 public:
  HttpJudgeClient(std::string url, std::string model = "", HttpOptions options = {})
      : url_(std::move(url)), model_(std::move(model)), options_(std::move(options)) {}

  Expected<std::string, scoring::ScoreError> complete(const std::string& prompt_template,
                                                      const scoring::JudgeRequestContext& ctx,
                                                      const std::string& retry_hint) override {
    Json sample{{"sample_id", ctx.sample_id},
                {"task_prompt", ctx.task_prompt},
                {"gt_image", ctx.gt_image_ref}};
    if (!ctx.gen_image_ref.empty()) sample["generated_image"] = ctx.gen_image_ref;
    if (!ctx.answer_text.empty()) sample["answer"] = ctx.answer_text;
    std::string user = sample.dump(2);
    if (!retry_hint.empty()) user += "\n\n" + retry_hint;

    Json body{{"messages", Json::array({Json{{"role", "system"}, {"content", prompt_template}},
                                        Json{{"role", "user"}, {"content", user}}})},
              {"temperature", 0.0}};
    if (!model_.empty()) body["model"] = model_;

    auto doc = detail::post_json(url_, body, options_);
    if (!doc.ok()) {
      return scoring::ScoreError{scoring::ScoreErrorCode::JudgeUnavailable, doc.error()};
    }
    if (!doc->contains("choices") || !(*doc)["choices"].is_array() || (*doc)["choices"].empty() ||
        !(*doc)["choices"][0].contains("message")) {
      return scoring::ScoreError{scoring::ScoreErrorCode::JudgeUnavailable,
                                 "judge endpoint returned no choices"};
    }
    const Json& message = (*doc)["choices"][0]["message"];
    if (!message.contains("content") || !message["content"].is_string()) {
      return scoring::ScoreError{scoring::ScoreErrorCode::JudgeUnavailable,
                                 "judge endpoint returned no content"};
    }
    return message["content"].get<std::string>();
  }

 private:
  std::string url_;
  std::string model_;
  HttpOptions options_;
};

}  // namespace gensearch::http
