#pragma once

/// Tool registry for the three search tools plus the episode-scoped image
/// id allocator. Backends are pluggable; the mock backend replays fixture
/// files so whole episodes run offline and deterministically.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "gensearch/common.hpp"
#include "gensearch/protocol.hpp"

namespace gensearch::toolkit {

using Json = nlohmann::json;
using protocol::ImageId;

enum class ToolErrorCode {
  BackendUnavailable,
  EmptyQueryList,
  EmptyQuery,
  InvalidUrl,
  PageFetchFailed,
};

inline const char* to_string(ToolErrorCode code) {
  switch (code) {
    case ToolErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ToolErrorCode::EmptyQueryList: return "EmptyQueryList";
    case ToolErrorCode::EmptyQuery: return "EmptyQuery";
    case ToolErrorCode::InvalidUrl: return "InvalidUrl";
    case ToolErrorCode::PageFetchFailed: return "PageFetchFailed";
  }
  return "?";
}

struct ToolError {
  ToolErrorCode code;
  std::string message;
};

struct SearchResult {
  std::string title;
  std::string url;
  std::string snippet;

  bool operator==(const SearchResult&) const = default;
};

/// An image hit before id assignment: what the backend knows about it.
struct RawImage {
  std::string title;
  std::string url;
  std::string local_path;  // relative path where the backend stored the file
};

struct ImageResult {
  ImageId img_id;
  std::string title;
  std::string url;
  std::string local_path;

  bool operator==(const ImageResult&) const = default;
};

/// Allocates IMG_### ids for one episode. Ordinals strictly increase and are
/// never reissued; the starting ordinal is configurable so ids need not
/// begin at 001.
class ImageRegistry {
 public:
  explicit ImageRegistry(std::uint64_t start_ordinal = 1) : next_ordinal_(start_ordinal) {}

  ImageResult allocate(const RawImage& raw) {
    ImageId id = *ImageId::from_ordinal(next_ordinal_);
    ++next_ordinal_;
    ImageResult result{id, raw.title, raw.url, raw.local_path};
    entries_.emplace(id, result);
    return result;
  }

  bool contains(ImageId id) const { return entries_.contains(id); }

  std::optional<ImageResult> lookup(ImageId id) const {
    auto it = entries_.find(id);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  std::set<ImageId> known_ids() const {
    std::set<ImageId> ids;
    for (const auto& [id, _] : entries_) ids.insert(id);
    return ids;
  }

  std::uint64_t next_ordinal() const { return next_ordinal_; }
  const std::map<ImageId, ImageResult>& entries() const { return entries_; }

 private:
  std::uint64_t next_ordinal_;
  std::map<ImageId, ImageResult> entries_;
};

/// Transport interface for the three tools. Implementations must tolerate
/// concurrent calls; image ids are assigned by the caller's registry, not
/// by the backend.
class ToolBackend {
 public:
  virtual ~ToolBackend() = default;

  virtual Expected<std::vector<SearchResult>, ToolError> search(const std::string& query,
                                                                int top_k) = 0;
  virtual Expected<std::vector<RawImage>, ToolError> image_search(const std::string& query,
                                                                  int top_k) = 0;
  virtual Expected<std::string, ToolError> browse(const std::string& url,
                                                  const std::string& query) = 0;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

inline constexpr int kDefaultTopK = 5;

inline bool looks_like_url(std::string_view url) {
  return url.substr(0, 7) == "http://" || url.substr(0, 8) == "https://";
}

/// Batched text search: one result list per query, order preserved,
/// truncated to top_k.
inline Expected<std::vector<std::vector<SearchResult>>, ToolError> search(
    const std::vector<std::string>& queries, int top_k, ToolBackend& backend) {
  if (queries.empty()) {
    return ToolError{ToolErrorCode::EmptyQueryList, "search requires at least one query"};
  }
  if (top_k < 1) top_k = kDefaultTopK;
  std::vector<std::vector<SearchResult>> out;
  out.reserve(queries.size());
  for (const std::string& query : queries) {
    auto results = backend.search(query, top_k);
    if (!results.ok()) return results.error();
    auto list = std::move(results).value();
    if (list.size() > static_cast<size_t>(top_k)) list.resize(top_k);
    out.push_back(std::move(list));
  }
  return out;
}

/// Image search with id assignment: results are truncated to top_k first,
/// then each surviving image gets the next fresh id from the registry.
inline Expected<std::vector<ImageResult>, ToolError> image_search(const std::string& query,
                                                                  int top_k, ToolBackend& backend,
                                                                  ImageRegistry& registry) {
  if (trim_view(query).empty()) {
    return ToolError{ToolErrorCode::EmptyQuery, "image_search requires a non-empty query"};
  }
  if (top_k < 1) top_k = kDefaultTopK;
  auto raw = backend.image_search(query, top_k);
  if (!raw.ok()) return raw.error();
  auto images = std::move(raw).value();
  if (images.size() > static_cast<size_t>(top_k)) images.resize(top_k);
  std::vector<ImageResult> out;
  out.reserve(images.size());
  for (const RawImage& image : images) {
    out.push_back(registry.allocate(image));
  }
  return out;
}

inline Expected<std::string, ToolError> browse(const std::string& url, const std::string& query,
                                               ToolBackend& backend) {
  if (!looks_like_url(url)) {
    return ToolError{ToolErrorCode::InvalidUrl, "'" + url + "' is not an http(s) URL"};
  }
  return backend.browse(url, query);
}

// ---------------------------------------------------------------------------
// Feedback rendering
// ---------------------------------------------------------------------------

inline std::string render_search_feedback(const std::vector<std::string>& queries,
                                          const std::vector<std::vector<SearchResult>>& results) {
  std::string out;
  for (size_t q = 0; q < queries.size(); ++q) {
    if (q > 0) out += "\n";
    out += "Results for \"" + queries[q] + "\":\n";
    if (q < results.size() && !results[q].empty()) {
      for (size_t i = 0; i < results[q].size(); ++i) {
        const SearchResult& r = results[q][i];
        out += std::to_string(i + 1) + ". " + r.title + " | " + r.url + "\n";
        out += "   " + r.snippet + "\n";
      }
    } else {
      out += "(no results)\n";
    }
  }
  return out;
}

inline std::string render_image_feedback(const std::vector<ImageResult>& images) {
  if (images.empty()) return "(no images found)\n";
  std::string out;
  for (const ImageResult& image : images) {
    out += image.img_id.text() + ": " + image.title + " | " + image.url + "\n";
  }
  return out;
}

inline std::string render_browse_feedback(const std::string& url, const std::string& summary) {
  return "Summary of " + url + ":\n" + summary + "\n";
}

inline std::string render_tool_error(const ToolError& error) {
  return std::string("tool error: ") + to_string(error.code) + ": " + error.message;
}

// ---------------------------------------------------------------------------
// Mock backend
// ---------------------------------------------------------------------------

/// Normalizes a query into a fixture file stem: lowercase, runs of
/// non-alphanumerics become single underscores, trimmed, capped at 80 chars.
inline std::string normalize_fixture_key(std::string_view query) {
  std::string key;
  key.reserve(query.size());
  bool pending_sep = false;
  for (char c : query) {
    unsigned char uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc)) {
      if (pending_sep && !key.empty()) key += '_';
      pending_sep = false;
      key += static_cast<char>(std::tolower(uc));
    } else {
      pending_sep = true;
    }
  }
  if (key.empty()) key = "_";
  if (key.size() > 80) key.resize(80);
  return key;
}

/// Fixture-driven backend: reads fixtures/tools/{search,image_search,browse}/
/// <key>.json. Same arguments always produce the same results. Missing
/// search fixtures yield empty result lists; missing browse fixtures are a
/// fetch failure.
class MockToolBackend : public ToolBackend {
 public:
  explicit MockToolBackend(std::filesystem::path fixture_dir)
      : dir_(std::move(fixture_dir)) {}

  Expected<std::vector<SearchResult>, ToolError> search(const std::string& query,
                                                        int /*top_k*/) override {
    auto doc = load("search", normalize_fixture_key(query));
    std::vector<SearchResult> out;
    if (!doc || !doc->contains("results") || !(*doc)["results"].is_array()) return out;
    for (const Json& item : (*doc)["results"]) {
      out.push_back(SearchResult{item.value("title", ""), item.value("url", ""),
                                 item.value("snippet", "")});
    }
    return out;
  }

  Expected<std::vector<RawImage>, ToolError> image_search(const std::string& query,
                                                          int /*top_k*/) override {
    auto doc = load("image_search", normalize_fixture_key(query));
    std::vector<RawImage> out;
    if (!doc || !doc->contains("results") || !(*doc)["results"].is_array()) return out;
    for (const Json& item : (*doc)["results"]) {
      out.push_back(RawImage{item.value("title", ""), item.value("url", ""),
                             item.value("local_path", "")});
    }
    return out;
  }

  Expected<std::string, ToolError> browse(const std::string& url,
                                          const std::string& /*query*/) override {
    auto doc = load("browse", normalize_fixture_key(url));
    if (!doc || !doc->contains("summary")) {
      return ToolError{ToolErrorCode::PageFetchFailed, "no fixture page for " + url};
    }
    return (*doc)["summary"].get<std::string>();
  }

 private:
  std::optional<Json> load(const std::string& tool, const std::string& key) const {
    std::filesystem::path path = dir_ / tool / (key + ".json");
    std::ifstream in(path);
    if (!in) return std::nullopt;
    std::stringstream buffer;
    buffer << in.rdbuf();
    Json doc = Json::parse(buffer.str(), nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded() || !doc.is_object()) return std::nullopt;
    return doc;
  }

  std::filesystem::path dir_;
};

}  // namespace gensearch::toolkit
