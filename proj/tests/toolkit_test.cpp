#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <string>

#include "gensearch/toolkit.hpp"

using namespace gensearch;
using namespace gensearch::toolkit;

#ifndef GENSEARCH_REPO_ROOT
#error "GENSEARCH_REPO_ROOT must point at the repository root"
#endif

namespace {

std::filesystem::path fixtures_dir() {
  return std::filesystem::path(GENSEARCH_REPO_ROOT) / "fixtures" / "tools";
}

}  // namespace

TEST_CASE("registry allocates strictly increasing ids", "[toolkit]") {
  ImageRegistry registry;
  RawImage raw{"t", "https://img.example.org/x.jpg", "images/x.jpg"};
  auto a = registry.allocate(raw);
  auto b = registry.allocate(raw);
  CHECK(a.img_id.text() == "IMG_001");
  CHECK(b.img_id.text() == "IMG_002");
  auto c = registry.allocate(raw);
  auto d = registry.allocate(raw);
  CHECK(c.img_id.text() == "IMG_003");
  CHECK(d.img_id.text() == "IMG_004");
  CHECK(registry.known_ids().size() == 4);
}

TEST_CASE("successive image searches never reuse ids", "[toolkit]") {
  ImageRegistry registry;
  MockToolBackend backend(fixtures_dir());
  auto first = image_search("eiffel tower photo", 2, backend, registry);
  auto second = image_search("eiffel tower photo", 2, backend, registry);
  REQUIRE(first.ok());
  REQUIRE(second.ok());
  CHECK((*first)[0].img_id.text() == "IMG_001");
  CHECK((*first)[1].img_id.text() == "IMG_002");
  CHECK((*second)[0].img_id.text() == "IMG_003");
  CHECK((*second)[1].img_id.text() == "IMG_004");
}

TEST_CASE("registry ids need not start at one", "[toolkit]") {
  ImageRegistry registry(4);
  MockToolBackend backend(fixtures_dir());
  auto images = image_search("eiffel tower photo", 5, backend, registry);
  REQUIRE(images.ok());
  REQUIRE(images->size() == 3);
  CHECK((*images)[0].img_id.text() == "IMG_004");
  CHECK((*images)[1].img_id.text() == "IMG_005");
  CHECK((*images)[2].img_id.text() == "IMG_006");
}

TEST_CASE("search returns fixture results per query", "[toolkit]") {
  MockToolBackend backend(fixtures_dir());
  auto results = search({"eiffel tower height"}, 5, backend);
  REQUIRE(results.ok());
  REQUIRE(results->size() == 1);
  CHECK((*results)[0].size() == 5);
  CHECK((*results)[0][0].title == "Eiffel Tower - official site");
}

TEST_CASE("search truncates to top_k without reordering", "[toolkit]") {
  MockToolBackend backend(fixtures_dir());
  auto results = search({"q"}, 2, backend);
  REQUIRE(results.ok());
  REQUIRE((*results)[0].size() == 2);
  CHECK((*results)[0][0].title == "Result one");
  CHECK((*results)[0][1].title == "Result two");
}

TEST_CASE("degenerate tool inputs are rejected", "[toolkit]") {
  MockToolBackend backend(fixtures_dir());
  ImageRegistry registry;

  auto no_queries = search({}, 5, backend);
  REQUIRE_FALSE(no_queries.ok());
  CHECK(no_queries.error().code == ToolErrorCode::EmptyQueryList);

  auto empty_query = image_search("", 5, backend, registry);
  REQUIRE_FALSE(empty_query.ok());
  CHECK(empty_query.error().code == ToolErrorCode::EmptyQuery);

  auto bad_url = browse("notaurl", "q", backend);
  REQUIRE_FALSE(bad_url.ok());
  CHECK(bad_url.error().code == ToolErrorCode::InvalidUrl);
}

TEST_CASE("browse resolves fixture pages and flags missing ones", "[toolkit]") {
  MockToolBackend backend(fixtures_dir());
  auto summary = browse("https://example.com/tower", "founding year", backend);
  REQUIRE(summary.ok());
  CHECK(summary->find("1889") != std::string::npos);

  auto missing = browse("https://example.com/unknown-page", "q", backend);
  REQUIRE_FALSE(missing.ok());
  CHECK(missing.error().code == ToolErrorCode::PageFetchFailed);
}

TEST_CASE("feedback rendering is deterministic and ordered", "[toolkit]") {
  std::vector<std::string> queries = {"q"};
  std::vector<std::vector<SearchResult>> results = {
      {{"Title A", "https://example.org/a", "snippet a"}}};
  std::string once = render_search_feedback(queries, results);
  std::string twice = render_search_feedback(queries, results);
  CHECK(once == twice);
  CHECK(once.find("1. Title A | https://example.org/a") != std::string::npos);

  ImageRegistry registry;
  RawImage raw{"Photo", "https://img.example.org/p.jpg", "images/p.jpg"};
  std::vector<ImageResult> images = {registry.allocate(raw), registry.allocate(raw)};
  std::string feedback = render_image_feedback(images);
  size_t first = feedback.find("IMG_001:");
  size_t second = feedback.find("IMG_002:");
  REQUIRE(first != std::string::npos);
  REQUIRE(second != std::string::npos);
  CHECK(first < second);
  CHECK(render_image_feedback(images) == feedback);
}

TEST_CASE("fixture keys normalize queries", "[toolkit]") {
  CHECK(normalize_fixture_key("Eiffel Tower height") == "eiffel_tower_height");
  CHECK(normalize_fixture_key("https://example.com/tower") == "https_example_com_tower");
  CHECK(normalize_fixture_key("  What's new?  ") == "what_s_new");
  CHECK(normalize_fixture_key("") == "_");
  CHECK(normalize_fixture_key(std::string(300, 'a')).size() == 80);
}

TEST_CASE("mock backend replays are identical", "[toolkit]") {
  MockToolBackend backend(fixtures_dir());
  auto a = search({"eiffel tower height"}, 5, backend);
  auto b = search({"eiffel tower height"}, 5, backend);
  REQUIRE(a.ok());
  REQUIRE(b.ok());
  CHECK(render_search_feedback({"eiffel tower height"}, a.value()) ==
        render_search_feedback({"eiffel tower height"}, b.value()));
}
