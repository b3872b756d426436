#pragma once

/// Dataset filtering and splitting. Raw records carry model-based quality
/// scores and rule-relevant metadata; filtering keeps a record only when
/// every score meets its threshold, the prompt is short enough, and search
/// consistency holds. Kept records are shuffled with a seeded generator and
/// partitioned into disjoint benchmark / SFT / RL manifests.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gensearch/categories.hpp"
#include "gensearch/common.hpp"

namespace gensearch::datapipe {

using Json = nlohmann::json;

inline constexpr std::string_view kToolVersion = "0.1.0";

inline constexpr std::array<std::string_view, 6> kQualityDimensions = {
    "requires_search", "correctness", "faithfulness", "aesthetics", "text_clarity", "safety",
};

struct DatasetRecord {
  std::string id;
  std::string prompt;
  std::string category;
  std::map<std::string, double> quality_scores;
  long prompt_token_count = 0;
  bool search_consistency = false;
  std::string trajectory_ref;
  std::string gt_image_ref;
  bool verified = false;  // benchmark rows stay false until externally verified

  bool operator==(const DatasetRecord&) const = default;
};

struct FilterRules {
  long max_prompt_tokens = 512;
  std::map<std::string, double> min_scores;
  bool require_search_consistency = true;

  static FilterRules defaults() {
    FilterRules rules;
    for (std::string_view dim : kQualityDimensions) rules.min_scores[std::string(dim)] = 0.5;
    rules.min_scores["safety"] = 1.0;
    return rules;
  }
};

struct SplitSpec {
  size_t bench_size = 630;
  size_t sft_size = 10000;
  size_t rl_size = 6000;
  std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Filtering
// ---------------------------------------------------------------------------

struct FilterResult {
  std::vector<DatasetRecord> kept;
  std::vector<std::pair<DatasetRecord, std::string>> dropped;  // record, first failing reason
};

/// Returns the first failing rule for a record, or nullopt when it passes.
/// Checks run in a fixed order: token length, search consistency, then the
/// score dimensions. A missing score counts as 0.
inline std::optional<std::string> first_drop_reason(const DatasetRecord& record,
                                                    const FilterRules& rules) {
  if (record.prompt_token_count > rules.max_prompt_tokens) return "token_length";
  if (rules.require_search_consistency && !record.search_consistency) {
    return "search_consistency";
  }
  auto check = [&](const std::string& dim) -> bool {
    auto threshold = rules.min_scores.find(dim);
    if (threshold == rules.min_scores.end()) return true;
    auto score = record.quality_scores.find(dim);
    double value = score == record.quality_scores.end() ? 0.0 : score->second;
    return value >= threshold->second;
  };
  for (std::string_view dim : kQualityDimensions) {
    std::string name(dim);
    if (!check(name)) return name;
  }
  for (const auto& [dim, _] : rules.min_scores) {
    bool canonical = false;
    for (std::string_view known : kQualityDimensions) {
      if (dim == known) {
        canonical = true;
        break;
      }
    }
    if (!canonical && !check(dim)) return dim;
  }
  return std::nullopt;
}

inline FilterResult filter_records(const std::vector<DatasetRecord>& records,
                                   const FilterRules& rules) {
  FilterResult result;
  for (const DatasetRecord& record : records) {
    auto reason = first_drop_reason(record, rules);
    if (reason) {
      result.dropped.emplace_back(record, *reason);
    } else {
      result.kept.push_back(record);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

struct SplitResult {
  std::vector<DatasetRecord> bench;
  std::vector<DatasetRecord> sft;
  std::vector<DatasetRecord> rl;
};

/// Seeded shuffle followed by partition into bench / sft / rl slices. The
/// same seed over the same input always yields identical manifests.
inline Expected<SplitResult, DataError> split_dataset(const std::vector<DatasetRecord>& kept,
                                                      const SplitSpec& spec) {
  const size_t total = spec.bench_size + spec.sft_size + spec.rl_size;
  if (kept.size() < total) {
    return DataError{DataErrorCode::InsufficientRecords,
                     "need " + std::to_string(total) + " records, have " +
                         std::to_string(kept.size())};
  }

  std::vector<DatasetRecord> shuffled = kept;
  std::mt19937_64 rng(spec.seed);
  for (size_t i = shuffled.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rng() % i);
    std::swap(shuffled[i - 1], shuffled[j]);
  }

  SplitResult result;
  size_t cursor = 0;
  auto take = [&](size_t n) {
    std::vector<DatasetRecord> slice(shuffled.begin() + cursor, shuffled.begin() + cursor + n);
    cursor += n;
    return slice;
  };
  result.bench = take(spec.bench_size);
  result.sft = take(spec.sft_size);
  result.rl = take(spec.rl_size);
  return result;
}

// ---------------------------------------------------------------------------
// Audit
// ---------------------------------------------------------------------------

struct AuditReport {
  bool pass = true;
  std::vector<std::string> overlapping_ids;  // ids found in more than one manifest
  std::map<std::string, std::map<std::string, size_t>> category_histograms;  // manifest -> counts
};

inline AuditReport audit_manifests(const std::vector<DatasetRecord>& bench,
                                   const std::vector<DatasetRecord>& sft,
                                   const std::vector<DatasetRecord>& rl) {
  AuditReport report;
  std::map<std::string, int> seen_in;
  auto absorb = [&](const char* name, const std::vector<DatasetRecord>& records) {
    auto& histogram = report.category_histograms[name];
    for (const DatasetRecord& record : records) {
      seen_in[record.id] += 1;
      histogram[record.category] += 1;
    }
  };
  absorb("bench", bench);
  absorb("sft", sft);
  absorb("rl", rl);
  for (const auto& [id, count] : seen_in) {
    if (count > 1) report.overlapping_ids.push_back(id);
  }
  report.pass = report.overlapping_ids.empty();
  return report;
}

// ---------------------------------------------------------------------------
// Manifest I/O
// ---------------------------------------------------------------------------

inline Json record_to_json(const DatasetRecord& record) {
  return Json{{"id", record.id},
              {"prompt", record.prompt},
              {"category", record.category},
              {"quality_scores", record.quality_scores},
              {"prompt_token_count", record.prompt_token_count},
              {"search_consistency", record.search_consistency},
              {"trajectory_ref", record.trajectory_ref},
              {"gt_image_ref", record.gt_image_ref},
              {"verified", record.verified}};
}

inline Expected<DatasetRecord, DataError> record_from_json(const Json& doc) {
  if (!doc.is_object() || !doc.contains("id") || !doc["id"].is_string()) {
    return DataError{DataErrorCode::MalformedRecord, "record needs a string 'id'"};
  }
  DatasetRecord record;
  record.id = doc["id"].get<std::string>();
  if (doc.contains("prompt") && doc["prompt"].is_string()) {
    record.prompt = doc["prompt"].get<std::string>();
  }
  if (doc.contains("category") && doc["category"].is_string()) {
    record.category = doc["category"].get<std::string>();
  }
  if (doc.contains("quality_scores") && doc["quality_scores"].is_object()) {
    for (auto it = doc["quality_scores"].begin(); it != doc["quality_scores"].end(); ++it) {
      if (!it.value().is_number()) {
        return DataError{DataErrorCode::MalformedRecord,
                         "quality score '" + it.key() + "' must be a number"};
      }
      double value = it.value().get<double>();
      if (value < 0.0 || value > 1.0) {
        return DataError{DataErrorCode::MalformedRecord,
                         "quality score '" + it.key() + "' must lie in [0, 1]"};
      }
      record.quality_scores[it.key()] = value;
    }
  }
  if (doc.contains("prompt_token_count") && doc["prompt_token_count"].is_number_integer()) {
    record.prompt_token_count = doc["prompt_token_count"].get<long>();
  }
  if (doc.contains("search_consistency") && doc["search_consistency"].is_boolean()) {
    record.search_consistency = doc["search_consistency"].get<bool>();
  }
  if (doc.contains("trajectory_ref") && doc["trajectory_ref"].is_string()) {
    record.trajectory_ref = doc["trajectory_ref"].get<std::string>();
  }
  if (doc.contains("gt_image_ref") && doc["gt_image_ref"].is_string()) {
    record.gt_image_ref = doc["gt_image_ref"].get<std::string>();
  }
  if (doc.contains("verified") && doc["verified"].is_boolean()) {
    record.verified = doc["verified"].get<bool>();
  }
  return record;
}

struct ManifestHeader {
  Json rules = Json::object();
  Json split = Json::object();
  std::uint64_t seed = 0;
  std::string tool_version = std::string(kToolVersion);
};

inline Json rules_to_json(const FilterRules& rules) {
  return Json{{"max_prompt_tokens", rules.max_prompt_tokens},
              {"min_scores", rules.min_scores},
              {"require_search_consistency", rules.require_search_consistency}};
}

inline Json split_spec_to_json(const SplitSpec& spec) {
  return Json{{"bench_size", spec.bench_size},
              {"sft_size", spec.sft_size},
              {"rl_size", spec.rl_size},
              {"seed", spec.seed}};
}

struct Manifest {
  ManifestHeader header;
  std::vector<DatasetRecord> records;
};

inline Expected<bool, DataError> write_manifest(const std::filesystem::path& path,
                                                const ManifestHeader& header,
                                                const std::vector<DatasetRecord>& records) {
  std::ofstream out(path);
  if (!out) {
    return DataError{DataErrorCode::MalformedRecord, "cannot open '" + path.string() + "'"};
  }
  Json head{{"version", 1},
            {"rules", header.rules},
            {"spec", header.split},
            {"seed", header.seed},
            {"tool_version", header.tool_version}};
  out << head.dump() << "\n";
  for (const DatasetRecord& record : records) {
    out << record_to_json(record).dump() << "\n";
  }
  return true;
}

/// Reads a manifest: a header line followed by one record per line. Files
/// that start directly with a record (no header) are accepted; raw record
/// files and produced manifests share the reader.
inline Expected<Manifest, DataError> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    return DataError{DataErrorCode::MalformedRecord, "cannot open '" + path.string() + "'"};
  }
  Manifest manifest;
  std::string line;
  size_t line_number = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim_view(line).empty()) continue;
    Json doc = Json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded()) {
      return DataError{DataErrorCode::MalformedRecord,
                       path.string() + ":" + std::to_string(line_number) + ": invalid JSON"};
    }
    if (!saw_header && doc.is_object() && doc.contains("tool_version") && !doc.contains("id")) {
      saw_header = true;
      manifest.header.rules = doc.value("rules", Json::object());
      manifest.header.split = doc.value("spec", Json::object());
      if (doc.contains("seed") && doc["seed"].is_number_unsigned()) {
        manifest.header.seed = doc["seed"].get<std::uint64_t>();
      }
      manifest.header.tool_version = doc.value("tool_version", "");
      continue;
    }
    saw_header = true;
    auto record = record_from_json(doc);
    if (!record.ok()) {
      return DataError{record.error().code, path.string() + ":" + std::to_string(line_number) +
                                                ": " + record.error().message};
    }
    manifest.records.push_back(std::move(record).value());
  }
  return manifest;
}

}  // namespace gensearch::datapipe
