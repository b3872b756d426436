#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "gensearch/datapipe.hpp"

using namespace gensearch;
using namespace gensearch::datapipe;

namespace {

DatasetRecord passing_record(const std::string& id, const std::string& category = "physics") {
  DatasetRecord record;
  record.id = id;
  record.prompt = "a prompt needing search";
  record.category = category;
  for (std::string_view dim : kQualityDimensions) {
    record.quality_scores[std::string(dim)] = 0.9;
  }
  record.quality_scores["safety"] = 1.0;
  record.prompt_token_count = 40;
  record.search_consistency = true;
  record.trajectory_ref = "traj/" + id + ".jsonl";
  record.gt_image_ref = "gt/" + id + ".png";
  return record;
}

std::vector<DatasetRecord> make_records(size_t n) {
  std::vector<DatasetRecord> records;
  const char* categories[] = {"physics", "chemistry", "anime", "posters", "history", "games"};
  for (size_t i = 0; i < n; ++i) {
    records.push_back(passing_record("rec-" + std::to_string(i), categories[i % 6]));
  }
  return records;
}

std::set<std::string> ids_of(const std::vector<DatasetRecord>& records) {
  std::set<std::string> ids;
  for (const DatasetRecord& r : records) ids.insert(r.id);
  return ids;
}

}  // namespace

TEST_CASE("categories partition into the two subsets", "[datapipe]") {
  CHECK(subset_of("chemistry").value() == Subset::ScienceKnowledge);
  CHECK(subset_of("posters").value() == Subset::PopCultureNews);
  CHECK(subset_of("General News").value() == Subset::PopCultureNews);

  auto unknown = subset_of("cooking");
  REQUIRE_FALSE(unknown.ok());
  CHECK(unknown.error().code == DataErrorCode::UnknownCategory);

  size_t science = 0, pop = 0;
  for (std::string_view c : kScienceCategories) {
    REQUIRE(subset_of(c).value() == Subset::ScienceKnowledge);
    ++science;
  }
  for (std::string_view c : kPopCultureCategories) {
    REQUIRE(subset_of(c).value() == Subset::PopCultureNews);
    ++pop;
  }
  CHECK(science == 15);
  CHECK(pop == 6);
}

TEST_CASE("filtering drops below-threshold safety scores", "[datapipe]") {
  auto record = passing_record("r1");
  record.quality_scores["safety"] = 0.9;
  auto result = filter_records({record}, FilterRules::defaults());
  CHECK(result.kept.empty());
  REQUIRE(result.dropped.size() == 1);
  CHECK(result.dropped[0].second == "safety");
}

TEST_CASE("filtering drops overlong prompts", "[datapipe]") {
  auto record = passing_record("r1");
  record.prompt_token_count = 600;
  auto result = filter_records({record}, FilterRules::defaults());
  REQUIRE(result.dropped.size() == 1);
  CHECK(result.dropped[0].second == "token_length");
}

TEST_CASE("records meeting every rule are kept", "[datapipe]") {
  auto result = filter_records({passing_record("r1")}, FilterRules::defaults());
  CHECK(result.dropped.empty());
  REQUIRE(result.kept.size() == 1);
  CHECK(result.kept[0].id == "r1");
}

TEST_CASE("inconsistent search results are dropped when required", "[datapipe]") {
  auto record = passing_record("r1");
  record.search_consistency = false;
  auto strict = filter_records({record}, FilterRules::defaults());
  REQUIRE(strict.dropped.size() == 1);
  CHECK(strict.dropped[0].second == "search_consistency");

  FilterRules relaxed = FilterRules::defaults();
  relaxed.require_search_consistency = false;
  auto lenient = filter_records({record}, relaxed);
  CHECK(lenient.kept.size() == 1);
}

TEST_CASE("filtering is idempotent and order preserving", "[datapipe]") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> score(0.0, 1.0);
  std::uniform_int_distribution<long> tokens(1, 1000);
  std::uniform_int_distribution<int> coin(0, 1);

  std::vector<DatasetRecord> records;
  for (int i = 0; i < 200; ++i) {
    auto record = passing_record("r" + std::to_string(i));
    for (auto& [dim, value] : record.quality_scores) value = score(rng);
    record.prompt_token_count = tokens(rng);
    record.search_consistency = coin(rng) == 1;
    records.push_back(record);
  }

  auto rules = FilterRules::defaults();
  auto once = filter_records(records, rules);
  auto twice = filter_records(once.kept, rules);
  CHECK(twice.kept == once.kept);
  CHECK(twice.dropped.empty());

  // Order within kept matches the input order.
  size_t cursor = 0;
  for (const DatasetRecord& record : records) {
    if (cursor < once.kept.size() && once.kept[cursor].id == record.id) ++cursor;
  }
  CHECK(cursor == once.kept.size());
}

TEST_CASE("splits are sized, disjoint, and deterministic", "[datapipe]") {
  auto records = make_records(20);
  SplitSpec spec;
  spec.bench_size = 5;
  spec.sft_size = 10;
  spec.rl_size = 5;
  spec.seed = 7;

  auto split = split_dataset(records, spec);
  REQUIRE(split.ok());
  CHECK(split->bench.size() == 5);
  CHECK(split->sft.size() == 10);
  CHECK(split->rl.size() == 5);

  auto bench_ids = ids_of(split->bench);
  auto sft_ids = ids_of(split->sft);
  auto rl_ids = ids_of(split->rl);
  for (const std::string& id : bench_ids) {
    CHECK_FALSE(sft_ids.contains(id));
    CHECK_FALSE(rl_ids.contains(id));
  }
  for (const std::string& id : sft_ids) CHECK_FALSE(rl_ids.contains(id));

  auto replay = split_dataset(records, spec);
  REQUIRE(replay.ok());
  CHECK(replay->bench == split->bench);
  CHECK(replay->sft == split->sft);
  CHECK(replay->rl == split->rl);
}

TEST_CASE("insufficient records fail the split", "[datapipe]") {
  auto records = make_records(20);
  SplitSpec spec;
  spec.bench_size = 5;
  spec.sft_size = 10;
  spec.rl_size = 6;
  auto split = split_dataset(records, spec);
  REQUIRE_FALSE(split.ok());
  CHECK(split.error().code == DataErrorCode::InsufficientRecords);
}

TEST_CASE("random split instances stay disjoint with full coverage", "[datapipe]") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    std::uniform_int_distribution<size_t> size(0, 12);
    SplitSpec spec;
    spec.bench_size = size(rng);
    spec.sft_size = size(rng);
    spec.rl_size = size(rng);
    spec.seed = rng();
    size_t total = spec.bench_size + spec.sft_size + spec.rl_size;
    auto records = make_records(total + size(rng));

    auto split = split_dataset(records, spec);
    REQUIRE(split.ok());
    std::set<std::string> all;
    for (const auto* part : {&split->bench, &split->sft, &split->rl}) {
      for (const DatasetRecord& record : *part) {
        CHECK(all.insert(record.id).second);  // no id appears twice
      }
    }
    CHECK(all.size() == total);
  }
}

TEST_CASE("audit passes disjoint manifests and catches overlaps", "[datapipe]") {
  auto records = make_records(9);
  std::vector<DatasetRecord> bench(records.begin(), records.begin() + 3);
  std::vector<DatasetRecord> sft(records.begin() + 3, records.begin() + 6);
  std::vector<DatasetRecord> rl(records.begin() + 6, records.end());

  auto clean = audit_manifests(bench, sft, rl);
  CHECK(clean.pass);
  CHECK(clean.overlapping_ids.empty());
  CHECK(clean.category_histograms.at("bench").size() >= 1);

  sft.push_back(bench[0]);
  auto dirty = audit_manifests(bench, sft, rl);
  CHECK_FALSE(dirty.pass);
  REQUIRE(dirty.overlapping_ids.size() == 1);
  CHECK(dirty.overlapping_ids[0] == bench[0].id);
}

TEST_CASE("auditing empty manifests passes vacuously", "[datapipe]") {
  auto report = audit_manifests({}, {}, {});
  CHECK(report.pass);
  CHECK(report.overlapping_ids.empty());
  for (const auto& [name, histogram] : report.category_histograms) {
    CHECK(histogram.empty());
  }
}

TEST_CASE("manifests round-trip through disk", "[datapipe]") {
  auto records = make_records(4);
  records[0].verified = false;

  ManifestHeader header;
  header.rules = rules_to_json(FilterRules::defaults());
  SplitSpec spec;
  spec.seed = 17;
  header.split = split_spec_to_json(spec);
  header.seed = 17;

  auto path = std::filesystem::temp_directory_path() / "gensearch_manifest_test.jsonl";
  auto wrote = write_manifest(path, header, records);
  REQUIRE(wrote.ok());

  auto loaded = read_manifest(path);
  REQUIRE(loaded.ok());
  CHECK(loaded->header.seed == 17);
  CHECK(loaded->header.tool_version == std::string(kToolVersion));
  REQUIRE(loaded->records.size() == records.size());
  CHECK(loaded->records == records);
  std::filesystem::remove(path);
}

TEST_CASE("malformed manifest rows carry their line number", "[datapipe]") {
  auto path = std::filesystem::temp_directory_path() / "gensearch_manifest_bad.jsonl";
  {
    std::ofstream out(path);
    out << R"({"id":"ok","category":"physics"})" << "\n";
    out << "{not json}\n";
  }
  auto loaded = read_manifest(path);
  REQUIRE_FALSE(loaded.ok());
  CHECK(loaded.error().message.find(":2") != std::string::npos);
  std::filesystem::remove(path);
}
