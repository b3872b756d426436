#pragma once

/// Judge output contracts and reward math. The image judge scores four
/// dimensions (faithfulness, visual correctness, text accuracy, aesthetics)
/// on a strict three-level scale; the text judge scores grounded prompts on
/// a five-level scale. Rewards combine both signals with a balancing
/// coefficient. Benchmark aggregation reports per-subset dimension means and
/// a weighted score on a 0-100 scale.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "gensearch/categories.hpp"
#include "gensearch/common.hpp"

namespace gensearch::scoring {

using Json = nlohmann::json;
using datapipe::Subset;

enum class ScoreErrorCode {
  MalformedJson,
  MissingKey,
  ExtraKey,
  IllegalLevel,
  NaInconsistency,
  OutOfRangeInput,
  EmptySubset,
  JudgeUnavailable,
};

inline const char* to_string(ScoreErrorCode code) {
  switch (code) {
    case ScoreErrorCode::MalformedJson: return "MalformedJson";
    case ScoreErrorCode::MissingKey: return "MissingKey";
    case ScoreErrorCode::ExtraKey: return "ExtraKey";
    case ScoreErrorCode::IllegalLevel: return "IllegalLevel";
    case ScoreErrorCode::NaInconsistency: return "NaInconsistency";
    case ScoreErrorCode::OutOfRangeInput: return "OutOfRangeInput";
    case ScoreErrorCode::EmptySubset: return "EmptySubset";
    case ScoreErrorCode::JudgeUnavailable: return "JudgeUnavailable";
  }
  return "?";
}

struct ScoreError {
  ScoreErrorCode code;
  std::string message;
};

inline std::string describe(const ScoreError& e) {
  return std::string(to_string(e.code)) + ": " + e.message;
}

// ---------------------------------------------------------------------------
// Judgments
// ---------------------------------------------------------------------------

/// True when `value` is one of the three image-judge levels.
inline bool is_three_level(double value) { return value == 0.0 || value == 0.5 || value == 1.0; }

/// True when `value` is one of the five text-judge levels.
inline bool is_five_level(double value) {
  return value == 0.0 || value == 0.25 || value == 0.5 || value == 0.75 || value == 1.0;
}

struct KScoreJudgment {
  std::string rationale;
  double faithfulness = 0;
  double visual_correctness = 0;
  double text_accuracy = 0;
  double aesthetics = 0;
  bool text_accuracy_na = false;

  bool operator==(const KScoreJudgment&) const = default;
};

struct TextJudgment {
  std::string rationale;
  double score = 0;

  bool operator==(const TextJudgment&) const = default;
};

namespace detail {

inline Expected<Json, ScoreError> parse_judge_json(std::string_view raw) {
  Json doc = Json::parse(strip_code_fences(raw), nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_object()) {
    return ScoreError{ScoreErrorCode::MalformedJson, "judge output is not a JSON object"};
  }
  return doc;
}

inline std::optional<ScoreError> check_exact_keys(const Json& doc,
                                                  const std::vector<std::string>& keys) {
  for (const std::string& key : keys) {
    if (!doc.contains(key)) {
      return ScoreError{ScoreErrorCode::MissingKey, "missing key '" + key + "'"};
    }
  }
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    bool known = false;
    for (const std::string& key : keys) {
      if (it.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) return ScoreError{ScoreErrorCode::ExtraKey, "unexpected key '" + it.key() + "'"};
  }
  return std::nullopt;
}

}  // namespace detail

/// Validates the strict image-judge schema: exactly the six expected keys,
/// each dimension in {0, 0.5, 1}, and the not-applicable flag consistent
/// with the emitted text_accuracy placeholder of 0.5.
inline Expected<KScoreJudgment, ScoreError> parse_kscore_judgment(const Json& doc) {
  if (!doc.is_object()) {
    return ScoreError{ScoreErrorCode::MalformedJson, "judgment must be a JSON object"};
  }
  auto key_err = detail::check_exact_keys(doc, {"rationale", "faithfulness", "visual_correctness",
                                                "text_accuracy", "aesthetics", "text_accuracy_na"});
  if (key_err) return *key_err;

  if (!doc["rationale"].is_string()) {
    return ScoreError{ScoreErrorCode::MalformedJson, "'rationale' must be a string"};
  }
  if (!doc["text_accuracy_na"].is_boolean()) {
    return ScoreError{ScoreErrorCode::MalformedJson, "'text_accuracy_na' must be a boolean"};
  }

  KScoreJudgment judgment;
  judgment.rationale = doc["rationale"].get<std::string>();
  judgment.text_accuracy_na = doc["text_accuracy_na"].get<bool>();

  struct Dim {
    const char* key;
    double* slot;
  };
  Dim dims[] = {{"faithfulness", &judgment.faithfulness},
                {"visual_correctness", &judgment.visual_correctness},
                {"text_accuracy", &judgment.text_accuracy},
                {"aesthetics", &judgment.aesthetics}};
  for (const Dim& dim : dims) {
    if (!doc[dim.key].is_number()) {
      return ScoreError{ScoreErrorCode::IllegalLevel,
                        std::string("'") + dim.key + "' must be a number"};
    }
    double value = doc[dim.key].get<double>();
    if (!is_three_level(value)) {
      return ScoreError{ScoreErrorCode::IllegalLevel, std::string("'") + dim.key + "' is " +
                                                          std::to_string(value) +
                                                          ", expected one of 0, 0.5, 1"};
    }
    *dim.slot = value;
  }

  if (judgment.text_accuracy_na && judgment.text_accuracy != 0.5) {
    return ScoreError{ScoreErrorCode::NaInconsistency,
                      "text_accuracy_na is true but text_accuracy is not 0.5"};
  }
  return judgment;
}

inline Expected<KScoreJudgment, ScoreError> parse_kscore_judgment(std::string_view raw) {
  auto doc = detail::parse_judge_json(raw);
  if (!doc.ok()) return doc.error();
  return parse_kscore_judgment(doc.value());
}

inline Expected<TextJudgment, ScoreError> parse_text_judgment(const Json& doc) {
  if (!doc.is_object()) {
    return ScoreError{ScoreErrorCode::MalformedJson, "judgment must be a JSON object"};
  }
  auto key_err = detail::check_exact_keys(doc, {"rationale", "score"});
  if (key_err) return *key_err;
  if (!doc["rationale"].is_string()) {
    return ScoreError{ScoreErrorCode::MalformedJson, "'rationale' must be a string"};
  }
  if (!doc["score"].is_number()) {
    return ScoreError{ScoreErrorCode::IllegalLevel, "'score' must be a number"};
  }
  double value = doc["score"].get<double>();
  if (!is_five_level(value)) {
    return ScoreError{ScoreErrorCode::IllegalLevel,
                      "'score' is " + std::to_string(value) +
                          ", expected one of 0, 0.25, 0.5, 0.75, 1.0"};
  }
  return TextJudgment{doc["rationale"].get<std::string>(), value};
}

inline Expected<TextJudgment, ScoreError> parse_text_judgment(std::string_view raw) {
  auto doc = detail::parse_judge_json(raw);
  if (!doc.ok()) return doc.error();
  return parse_text_judgment(doc.value());
}

// ---------------------------------------------------------------------------
// Reward math
// ---------------------------------------------------------------------------

struct RewardConfig {
  double alpha = 0.5;  // balance between image and text reward
  double w_faithfulness = 0.1;
  double w_visual = 0.4;
  double w_text = 0.4;
  double w_aesthetics = 0.1;

  bool valid() const {
    double sum = w_faithfulness + w_visual + w_text + w_aesthetics;
    return alpha >= 0.0 && alpha <= 1.0 && std::abs(sum - 1.0) < 1e-9;
  }
};

/// Weighted combination of the four dimensions. When the text dimension is
/// not applicable the remaining weights are renormalized so the score stays
/// in [0, 1] and reaches 1 exactly when every applicable dimension does.
inline double kscore_value(const KScoreJudgment& judgment, const RewardConfig& cfg = {}) {
  if (judgment.text_accuracy_na) {
    double weight_sum = cfg.w_faithfulness + cfg.w_visual + cfg.w_aesthetics;
    return (cfg.w_faithfulness * judgment.faithfulness +
            cfg.w_visual * judgment.visual_correctness +
            cfg.w_aesthetics * judgment.aesthetics) /
           weight_sum;
  }
  return cfg.w_faithfulness * judgment.faithfulness + cfg.w_visual * judgment.visual_correctness +
         cfg.w_text * judgment.text_accuracy + cfg.w_aesthetics * judgment.aesthetics;
}

/// R = (1 - alpha) * R_image + alpha * R_text.
inline Expected<double, ScoreError> dual_reward(double r_image, double r_text,
                                                const RewardConfig& cfg = {}) {
  if (r_image < 0.0 || r_image > 1.0 || r_text < 0.0 || r_text > 1.0) {
    return ScoreError{ScoreErrorCode::OutOfRangeInput, "rewards must lie in [0, 1]"};
  }
  return (1.0 - cfg.alpha) * r_image + cfg.alpha * r_text;
}

// ---------------------------------------------------------------------------
// Benchmark aggregation
// ---------------------------------------------------------------------------

struct BenchmarkSample {
  std::string id;
  std::string category;
  Subset subset = Subset::ScienceKnowledge;
  KScoreJudgment judgment;
};

inline Expected<BenchmarkSample, datapipe::DataError> make_benchmark_sample(
    std::string id, std::string category, KScoreJudgment judgment) {
  auto subset = datapipe::subset_of(category);
  if (!subset.ok()) return subset.error();
  return BenchmarkSample{std::move(id), std::move(category), subset.value(), std::move(judgment)};
}

/// Per-subset dimension means on the reporting scale (0-100). `text_scored`
/// counts the samples whose text dimension was applicable; when it is zero
/// the subset score renormalizes over the remaining dimensions.
struct SubsetMeans {
  double visual_correctness = 0;
  double text_accuracy = 0;
  double faithfulness = 0;
  double aesthetics = 0;
  size_t samples = 0;
  size_t text_scored = 0;
};

inline double subset_kscore(const SubsetMeans& means, const RewardConfig& cfg = {}) {
  if (means.samples > 0 && means.text_scored == 0) {
    double weight_sum = cfg.w_faithfulness + cfg.w_visual + cfg.w_aesthetics;
    return (cfg.w_faithfulness * means.faithfulness + cfg.w_visual * means.visual_correctness +
            cfg.w_aesthetics * means.aesthetics) /
           weight_sum;
  }
  return cfg.w_faithfulness * means.faithfulness + cfg.w_visual * means.visual_correctness +
         cfg.w_text * means.text_accuracy + cfg.w_aesthetics * means.aesthetics;
}

/// Overall benchmark score: the macro average of the two subset scores.
inline double overall_kscore(const SubsetMeans& science, const SubsetMeans& popculture,
                             const RewardConfig& cfg = {}) {
  return (subset_kscore(science, cfg) + subset_kscore(popculture, cfg)) / 2.0;
}

inline double round2(double value) { return std::round(value * 100.0) / 100.0; }

struct SubsetReport {
  SubsetMeans means;   // rounded to 2 decimals
  double kscore = 0;   // 0-100, rounded to 2 decimals
};

struct BenchmarkReport {
  SubsetReport science;
  SubsetReport popculture;
  double overall = 0;  // 0-100, rounded to 2 decimals
};

/// Computes per-subset means over the samples (text accuracy averaged over
/// applicable samples only), the per-subset weighted scores, and the macro
/// averaged overall score. Both subsets must be populated.
inline Expected<BenchmarkReport, ScoreError> aggregate_benchmark(
    const std::vector<BenchmarkSample>& samples, const RewardConfig& cfg = {}) {
  struct Accumulator {
    double visual = 0, text = 0, faith = 0, aesth = 0;
    size_t n = 0, n_text = 0;
  };
  Accumulator acc[2];
  for (const BenchmarkSample& sample : samples) {
    Accumulator& a = acc[sample.subset == Subset::ScienceKnowledge ? 0 : 1];
    a.n += 1;
    a.visual += sample.judgment.visual_correctness;
    a.faith += sample.judgment.faithfulness;
    a.aesth += sample.judgment.aesthetics;
    if (!sample.judgment.text_accuracy_na) {
      a.n_text += 1;
      a.text += sample.judgment.text_accuracy;
    }
  }
  for (int i = 0; i < 2; ++i) {
    if (acc[i].n == 0) {
      return ScoreError{ScoreErrorCode::EmptySubset,
                        std::string("subset '") +
                            datapipe::to_string(i == 0 ? Subset::ScienceKnowledge
                                                       : Subset::PopCultureNews) +
                            "' has no samples"};
    }
  }

  auto to_means = [](const Accumulator& a) {
    SubsetMeans means;
    means.samples = a.n;
    means.text_scored = a.n_text;
    means.visual_correctness = 100.0 * a.visual / static_cast<double>(a.n);
    means.faithfulness = 100.0 * a.faith / static_cast<double>(a.n);
    means.aesthetics = 100.0 * a.aesth / static_cast<double>(a.n);
    means.text_accuracy = a.n_text > 0 ? 100.0 * a.text / static_cast<double>(a.n_text) : 0.0;
    return means;
  };

  SubsetMeans science = to_means(acc[0]);
  SubsetMeans popculture = to_means(acc[1]);

  BenchmarkReport report;
  report.science.kscore = round2(subset_kscore(science, cfg));
  report.popculture.kscore = round2(subset_kscore(popculture, cfg));
  report.overall = round2(overall_kscore(science, popculture, cfg));

  auto round_means = [](SubsetMeans m) {
    m.visual_correctness = round2(m.visual_correctness);
    m.text_accuracy = round2(m.text_accuracy);
    m.faithfulness = round2(m.faithfulness);
    m.aesthetics = round2(m.aesthetics);
    return m;
  };
  report.science.means = round_means(science);
  report.popculture.means = round_means(popculture);
  return report;
}

// ---------------------------------------------------------------------------
// Report rendering
// ---------------------------------------------------------------------------

inline Json report_to_json(const BenchmarkReport& report) {
  auto subset_json = [](const SubsetReport& s) {
    return Json{{"samples", s.means.samples},
                {"text_scored", s.means.text_scored},
                {"visual_correctness", s.means.visual_correctness},
                {"text_accuracy", s.means.text_accuracy},
                {"faithfulness", s.means.faithfulness},
                {"aesthetics", s.means.aesthetics},
                {"kscore", s.kscore}};
  };
  return Json{{"version", 1},
              {"science_knowledge", subset_json(report.science)},
              {"pop_culture_news", subset_json(report.popculture)},
              {"overall", report.overall}};
}

inline std::string render_report_table(const BenchmarkReport& report) {
  char line[160];
  std::string out;
  std::snprintf(line, sizeof(line), "%-20s %6s %8s %8s %8s %8s %8s\n", "subset", "n", "visual",
                "text", "faith", "aesth", "k-score");
  out += line;
  auto row = [&](const char* name, const SubsetReport& s) {
    std::snprintf(line, sizeof(line), "%-20s %6zu %8.2f %8.2f %8.2f %8.2f %8.2f\n", name,
                  s.means.samples, s.means.visual_correctness, s.means.text_accuracy,
                  s.means.faithfulness, s.means.aesthetics, s.kscore);
    out += line;
  };
  row("science_knowledge", report.science);
  row("pop_culture_news", report.popculture);
  std::snprintf(line, sizeof(line), "%-20s %6s %8s %8s %8s %8s %8.2f\n", "overall", "", "", "", "",
                "", report.overall);
  out += line;
  return out;
}

// ---------------------------------------------------------------------------
// Judge clients
// ---------------------------------------------------------------------------

/// One evaluation request. Image references are opaque strings (paths or
/// URLs) handed through to the judge endpoint unchanged.
struct JudgeRequestContext {
  std::string sample_id;
  std::string task_prompt;
  std::string gt_image_ref;
  std::string gen_image_ref;
  std::string answer_text;  // grounded answer, for the text judge
};

class JudgeClient {
 public:
  virtual ~JudgeClient() = default;

  /// Returns the raw judge response text for the filled template. The retry
  /// hint carries the previous parse error when a retry is in flight.
  virtual Expected<std::string, ScoreError> complete(const std::string& prompt_template,
                                                     const JudgeRequestContext& ctx,
                                                     const std::string& retry_hint) = 0;
};

/// Fixture-backed judge: reads <dir>/<sample_id>.json, expecting
/// {"response": "<raw judge text>"}.
class MockJudgeClient : public JudgeClient {
 public:
  explicit MockJudgeClient(std::filesystem::path dir) : dir_(std::move(dir)) {}

  Expected<std::string, ScoreError> complete(const std::string&, const JudgeRequestContext& ctx,
                                             const std::string&) override {
    std::ifstream in(dir_ / (ctx.sample_id + ".json"));
    if (!in) {
      return ScoreError{ScoreErrorCode::JudgeUnavailable,
                        "no judge fixture for sample '" + ctx.sample_id + "'"};
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    Json doc = Json::parse(buffer.str(), nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("response")) {
      return ScoreError{ScoreErrorCode::JudgeUnavailable,
                        "bad judge fixture for sample '" + ctx.sample_id + "'"};
    }
    return doc["response"].get<std::string>();
  }

 private:
  std::filesystem::path dir_;
};

inline constexpr int kJudgeParseAttempts = 3;

/// Requests a judgment and retries schema violations, appending the parse
/// error to the retry request so the judge can correct itself.
inline Expected<KScoreJudgment, ScoreError> request_kscore_judgment(
    JudgeClient& client, const std::string& prompt_template, const JudgeRequestContext& ctx,
    int max_attempts = kJudgeParseAttempts) {
  std::string hint;
  ScoreError last{ScoreErrorCode::JudgeUnavailable, "no attempts made"};
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    auto raw = client.complete(prompt_template, ctx, hint);
    if (!raw.ok()) return raw.error();
    auto judgment = parse_kscore_judgment(std::string_view(raw.value()));
    if (judgment.ok()) return judgment.value();
    last = judgment.error();
    hint = "Previous output was rejected (" + describe(last) +
           "). Output only one JSON object with exactly the required keys.";
  }
  return last;
}

inline Expected<TextJudgment, ScoreError> request_text_judgment(
    JudgeClient& client, const std::string& prompt_template, const JudgeRequestContext& ctx,
    int max_attempts = kJudgeParseAttempts) {
  std::string hint;
  ScoreError last{ScoreErrorCode::JudgeUnavailable, "no attempts made"};
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    auto raw = client.complete(prompt_template, ctx, hint);
    if (!raw.ok()) return raw.error();
    auto judgment = parse_text_judgment(std::string_view(raw.value()));
    if (judgment.ok()) return judgment.value();
    last = judgment.error();
    hint = "Previous output was rejected (" + describe(last) +
           "). Output only one JSON object with exactly the required keys.";
  }
  return last;
}

}  // namespace gensearch::scoring
