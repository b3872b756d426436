// gensearch: batch front end for the search-agent runtime.
//
//   gensearch run    - drive episodes over a prompt manifest
//   gensearch score  - aggregate judged samples into a benchmark report
//   gensearch grpo   - compute advantages and the policy objective
//   gensearch data   - filter, split, and audit dataset manifests
//
// Exit codes: 0 success, 1 audit/criteria failure, 2 usage or schema error,
// 3 backend unreachable.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gensearch/config.hpp"
#include "gensearch/datapipe.hpp"
#include "gensearch/episode.hpp"
#include "gensearch/grpo.hpp"
#include "gensearch/http_backends.hpp"
#include "gensearch/jsonl.hpp"
#include "gensearch/protocol.hpp"
#include "gensearch/scoring.hpp"
#include "gensearch/toolkit.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::json;
using namespace gensearch;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCriteria = 1;
constexpr int kExitUsage = 2;
constexpr int kExitBackend = 3;

int usage_error(const std::string& message) {
  std::cerr << "error: " << message << "\n";
  return kExitUsage;
}

int backend_error(const std::string& message) {
  std::cerr << "error: " << message << "\n";
  return kExitBackend;
}

std::optional<std::string> load_asset(const fs::path& assets_dir, const std::string& name) {
  auto text = jsonl::read_text(assets_dir / name);
  if (!text.ok()) return std::nullopt;
  return text.value();
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

struct PromptRow {
  std::string id;
  std::string prompt;
};

Expected<std::vector<PromptRow>, std::string> load_prompts(const fs::path& path) {
  auto docs = jsonl::read_file(path);
  if (!docs.ok()) return docs.error().message;
  std::vector<PromptRow> rows;
  size_t index = 0;
  for (const Json& doc : docs.value()) {
    ++index;
    if (!doc.is_object() || !doc.contains("prompt") || !doc["prompt"].is_string()) {
      return "row " + std::to_string(index) + ": expected an object with a string 'prompt'";
    }
    PromptRow row;
    row.prompt = doc["prompt"].get<std::string>();
    row.id = doc.contains("id") && doc["id"].is_string() ? doc["id"].get<std::string>()
                                                         : "prompt-" + std::to_string(index);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<std::string> load_policy_script(const fs::path& fixtures, const std::string& id) {
  std::vector<std::string> responses;
  std::ifstream in(fixtures / "policy" / (id + ".json"));
  if (!in) return responses;
  std::stringstream buffer;
  buffer << in.rdbuf();
  Json doc = Json::parse(buffer.str(), nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("responses") ||
      !doc["responses"].is_array()) {
    return responses;
  }
  for (const Json& r : doc["responses"]) {
    if (r.is_string()) responses.push_back(r.get<std::string>());
  }
  return responses;
}

int cmd_run(const config::CliConfig& cfg, const fs::path& prompts_path,
            const std::optional<fs::path>& mock_fixtures) {
  auto prompts = load_prompts(prompts_path);
  if (!prompts.ok()) return usage_error("prompts manifest: " + prompts.error());

  const bool mock = mock_fixtures.has_value();
  if (!mock) {
    const auto& b = cfg.backends;
    if (b.policy_url.empty() || b.search_url.empty() || b.image_url.empty() ||
        b.browse_url.empty()) {
      return backend_error(
          "policy/tool backend URLs are not configured and --mock-fixtures was not given");
    }
  }

  episode::EpisodeConfig episode_cfg = cfg.episode;
  if (episode_cfg.system_prompt.empty()) {
    if (auto prompt = load_asset(cfg.run.assets_dir, "system_prompt.txt")) {
      episode_cfg.system_prompt = *prompt;
    } else {
      std::cerr << "warning: no system prompt asset under " << cfg.run.assets_dir << "\n";
    }
  }

  std::unique_ptr<toolkit::ToolBackend> tools;
  http::HttpOptions http_options;
  http_options.api_key = cfg.backends.api_key;
  if (mock) {
    tools = std::make_unique<toolkit::MockToolBackend>(*mock_fixtures / "tools");
  } else {
    tools = std::make_unique<http::HttpToolBackend>(cfg.backends.search_url,
                                                    cfg.backends.image_url,
                                                    cfg.backends.browse_url, http_options);
  }

  struct JobResult {
    std::string id;
    int rollout = 0;
    Json trajectory;
    Json request;
  };
  struct Job {
    const PromptRow* row;
    int rollout;
  };

  std::vector<Job> jobs;
  const int group_size = std::max(1, cfg.run.group_size);
  for (const PromptRow& row : prompts.value()) {
    for (int g = 0; g < group_size; ++g) jobs.push_back({&row, g});
  }
  std::vector<JobResult> results(jobs.size());

  int parallel = cfg.run.parallel > 0 ? cfg.run.parallel : std::min(group_size, 8);
  parallel = std::max(1, std::min<int>(parallel, static_cast<int>(jobs.empty() ? 1 : jobs.size())));

  std::atomic<size_t> next{0};
  auto worker = [&]() {
    while (true) {
      size_t k = next.fetch_add(1);
      if (k >= jobs.size()) break;
      const Job& job = jobs[k];

      std::unique_ptr<episode::PolicyClient> policy;
      if (mock) {
        policy = std::make_unique<episode::ScriptedPolicy>(
            load_policy_script(*mock_fixtures, job.row->id));
      } else {
        policy = std::make_unique<http::HttpPolicyClient>(cfg.backends.policy_url,
                                                          cfg.backends.policy_model, http_options);
      }
      auto outcome = episode::run_episode_full(job.row->prompt, *policy, *tools, episode_cfg);
      auto request = episode::finalize(outcome.state, outcome.trajectory.answer);

      JobResult& slot = results[k];
      slot.id = job.row->id;
      slot.rollout = job.rollout;
      slot.trajectory = episode::trajectory_to_json(outcome.trajectory);
      slot.request = episode::generation_request_to_json(request);
    }
  };
  std::vector<std::thread> threads;
  for (int i = 0; i < parallel; ++i) threads.emplace_back(worker);
  for (std::thread& t : threads) t.join();

  fs::create_directories(cfg.run.output_dir);
  fs::path traj_path = fs::path(cfg.run.output_dir) / "trajectories.jsonl";
  fs::path req_path = fs::path(cfg.run.output_dir) / "generation_requests.jsonl";
  std::ofstream traj_out(traj_path);
  std::ofstream req_out(req_path);
  if (!traj_out || !req_out) {
    return usage_error("cannot write outputs under '" + cfg.run.output_dir + "'");
  }
  for (JobResult& r : results) {
    r.trajectory["id"] = r.id;
    r.trajectory["rollout"] = r.rollout;
    r.request["id"] = r.id;
    r.request["rollout"] = r.rollout;
    traj_out << r.trajectory.dump() << "\n";
    req_out << r.request.dump() << "\n";
  }
  std::cout << "ran " << jobs.size() << " episode(s) over " << prompts->size()
            << " prompt(s); wrote " << traj_path.string() << " and " << req_path.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

Expected<scoring::BenchmarkSample, std::string> sample_from_judged_row(const Json& doc,
                                                                       size_t row) {
  if (!doc.is_object() || !doc.contains("id") || !doc["id"].is_string() ||
      !doc.contains("category") || !doc["category"].is_string()) {
    return std::string("row " + std::to_string(row) + ": expected string 'id' and 'category'");
  }
  if (!doc.contains("judgment") || !doc["judgment"].is_object()) {
    return std::string("row " + std::to_string(row) + ": expected a 'judgment' object");
  }
  auto judgment = scoring::parse_kscore_judgment(doc["judgment"]);
  if (!judgment.ok()) {
    return std::string("row " + std::to_string(row) + ": " + scoring::describe(judgment.error()));
  }
  auto sample = scoring::make_benchmark_sample(doc["id"].get<std::string>(),
                                               doc["category"].get<std::string>(),
                                               judgment.value());
  if (!sample.ok()) {
    return std::string("row " + std::to_string(row) + ": " + sample.error().message);
  }
  return std::move(sample).value();
}

int cmd_score(const config::CliConfig& cfg, const std::optional<fs::path>& judged_path,
              const std::optional<fs::path>& manifest_path,
              const std::optional<fs::path>& mock_judge_dir, bool per_sample,
              const std::optional<fs::path>& out_dir) {
  std::vector<scoring::BenchmarkSample> samples;

  if (judged_path) {
    auto docs = jsonl::read_file(*judged_path);
    if (!docs.ok()) return usage_error(docs.error().message);
    size_t row = 0;
    for (const Json& doc : docs.value()) {
      ++row;
      auto sample = sample_from_judged_row(doc, row);
      if (!sample.ok()) return usage_error(sample.error());
      samples.push_back(std::move(sample).value());
    }
  } else if (manifest_path) {
    std::unique_ptr<scoring::JudgeClient> judge;
    if (mock_judge_dir) {
      judge = std::make_unique<scoring::MockJudgeClient>(*mock_judge_dir);
    } else if (!cfg.backends.judge_url.empty()) {
      http::HttpOptions options;
      options.api_key = cfg.backends.api_key;
      judge = std::make_unique<http::HttpJudgeClient>(cfg.backends.judge_url,
                                                      cfg.backends.judge_model, options);
    } else {
      return backend_error("no judge endpoint configured and --mock-judge was not given");
    }
    auto tmpl = load_asset(cfg.run.assets_dir, "kscore_eval_prompt.txt");
    if (!tmpl) {
      return usage_error("missing evaluation template under '" + cfg.run.assets_dir + "'");
    }
    auto docs = jsonl::read_file(*manifest_path);
    if (!docs.ok()) return usage_error(docs.error().message);
    size_t row = 0;
    for (const Json& doc : docs.value()) {
      ++row;
      if (!doc.is_object() || !doc.contains("id") || !doc["id"].is_string() ||
          !doc.contains("category") || !doc["category"].is_string()) {
        return usage_error("row " + std::to_string(row) + ": expected 'id' and 'category'");
      }
      scoring::JudgeRequestContext ctx;
      ctx.sample_id = doc["id"].get<std::string>();
      ctx.task_prompt = doc.value("prompt", "");
      ctx.gt_image_ref = doc.value("gt_image", "");
      ctx.gen_image_ref = doc.value("gen_image", "");
      auto judgment = scoring::request_kscore_judgment(*judge, *tmpl, ctx);
      if (!judgment.ok()) {
        if (judgment.error().code == scoring::ScoreErrorCode::JudgeUnavailable) {
          return backend_error("sample '" + ctx.sample_id + "': " +
                               scoring::describe(judgment.error()));
        }
        return usage_error("sample '" + ctx.sample_id + "': " +
                           scoring::describe(judgment.error()));
      }
      auto sample = scoring::make_benchmark_sample(ctx.sample_id,
                                                   doc["category"].get<std::string>(),
                                                   judgment.value());
      if (!sample.ok()) {
        return usage_error("row " + std::to_string(row) + ": " + sample.error().message);
      }
      samples.push_back(std::move(sample).value());
    }
  } else {
    return usage_error("score needs --input (judged rows) or --manifest (with a judge)");
  }

  auto report = scoring::aggregate_benchmark(samples, cfg.reward);
  if (!report.ok()) return usage_error(scoring::describe(report.error()));

  Json report_json = scoring::report_to_json(report.value());
  if (per_sample) {
    Json rows = Json::array();
    for (const scoring::BenchmarkSample& sample : samples) {
      rows.push_back(
          {{"id", sample.id},
           {"kscore",
            scoring::round2(100.0 * scoring::kscore_value(sample.judgment, cfg.reward))}});
    }
    report_json["per_sample"] = std::move(rows);
  }

  std::string table = scoring::render_report_table(report.value());
  std::cout << table;
  if (per_sample) {
    for (const Json& row : report_json["per_sample"]) {
      std::cout << row["id"].get<std::string>() << " " << row["kscore"].dump() << "\n";
    }
  }
  if (out_dir) {
    fs::create_directories(*out_dir);
    std::ofstream json_out(*out_dir / "report.json");
    json_out << report_json.dump(2) << "\n";
    std::ofstream table_out(*out_dir / "report.txt");
    table_out << table;
    std::cout << "wrote " << (*out_dir / "report.json").string() << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// grpo
// ---------------------------------------------------------------------------

double objective_with_bump(grpo::GroupRollout group, const std::vector<double>& advantages,
                           const grpo::GrpoConfig& cfg, size_t i, size_t t, double bump) {
  group.sequences[i].logp_new[t] += bump;
  auto result = grpo::grpo_objective(group, advantages, cfg);
  return result.ok() ? result->objective : 0.0;
}

int cmd_grpo(const config::CliConfig& cfg, const fs::path& rollouts_path, bool grad_check,
             bool emit_grads, const std::optional<fs::path>& out_path) {
  auto docs = jsonl::read_file(rollouts_path);
  if (!docs.ok()) return usage_error(docs.error().message);

  std::vector<Json> outputs;
  size_t row = 0;
  for (const Json& doc : docs.value()) {
    ++row;
    auto group = grpo::group_rollout_from_json(doc);
    if (!group.ok()) {
      return usage_error("row " + std::to_string(row) + ": " + group.error().message);
    }
    auto advantages = grpo::compute_advantages(group->rewards, cfg.grpo);
    if (!advantages.ok()) {
      return usage_error("row " + std::to_string(row) + ": " + advantages.error().message);
    }
    auto objective = grpo::grpo_objective(group.value(), advantages.value(), cfg.grpo);
    if (!objective.ok()) {
      return usage_error("row " + std::to_string(row) + ": " + objective.error().message);
    }

    Json out{{"version", 1},
             {"group_id", group->group_id},
             {"J", objective->objective},
             {"advantages", advantages.value()}};
    if (emit_grads) out["grads"] = objective->grad_logp_new;
    if (grad_check) {
      const double h = 1e-6;
      double max_rel = 0.0;
      for (size_t i = 0; i < group->sequences.size(); ++i) {
        for (size_t t = 0; t < group->sequences[i].tokens(); ++t) {
          double up = objective_with_bump(group.value(), advantages.value(), cfg.grpo, i, t, h);
          double down = objective_with_bump(group.value(), advantages.value(), cfg.grpo, i, t, -h);
          double numeric = (up - down) / (2 * h);
          double analytic = objective->grad_logp_new[i][t];
          double reference = std::max({std::abs(numeric), std::abs(analytic), 1e-3});
          max_rel = std::max(max_rel, std::abs(numeric - analytic) / reference);
        }
      }
      out["grad_check_max_rel_err"] = max_rel;
    }
    outputs.push_back(std::move(out));
  }

  if (out_path) {
    auto wrote = jsonl::write_file(*out_path, outputs);
    if (!wrote.ok()) return usage_error(wrote.error().message);
    std::cout << "wrote " << out_path->string() << "\n";
  } else {
    for (const Json& out : outputs) std::cout << out.dump() << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// data
// ---------------------------------------------------------------------------

int cmd_data_filter(const config::CliConfig& cfg, const fs::path& input, const fs::path& out_dir) {
  auto manifest = datapipe::read_manifest(input);
  if (!manifest.ok()) return usage_error(manifest.error().message);

  auto result = datapipe::filter_records(manifest->records, cfg.filter);

  fs::create_directories(out_dir);
  datapipe::ManifestHeader header;
  header.rules = datapipe::rules_to_json(cfg.filter);
  auto wrote = datapipe::write_manifest(out_dir / "kept.jsonl", header, result.kept);
  if (!wrote.ok()) return usage_error(wrote.error().message);

  std::ofstream dropped_out(out_dir / "dropped.jsonl");
  Json head{{"version", 1},
            {"rules", header.rules},
            {"spec", Json::object()},
            {"seed", 0},
            {"tool_version", header.tool_version}};
  dropped_out << head.dump() << "\n";
  for (const auto& [record, reason] : result.dropped) {
    Json doc = datapipe::record_to_json(record);
    doc["drop_reason"] = reason;
    dropped_out << doc.dump() << "\n";
  }
  std::cout << "kept " << result.kept.size() << ", dropped " << result.dropped.size() << "\n";
  return kExitOk;
}

int cmd_data_split(const config::CliConfig& cfg, const fs::path& input, const fs::path& out_dir) {
  auto manifest = datapipe::read_manifest(input);
  if (!manifest.ok()) return usage_error(manifest.error().message);

  auto split = datapipe::split_dataset(manifest->records, cfg.split);
  if (!split.ok()) return usage_error(split.error().message);

  fs::create_directories(out_dir);
  datapipe::ManifestHeader header;
  header.rules = manifest->header.rules;
  header.split = datapipe::split_spec_to_json(cfg.split);
  header.seed = cfg.split.seed;
  struct Part {
    const char* name;
    const std::vector<datapipe::DatasetRecord>* records;
  };
  for (const Part& part : {Part{"bench.jsonl", &split->bench}, Part{"sft.jsonl", &split->sft},
                           Part{"rl.jsonl", &split->rl}}) {
    auto wrote = datapipe::write_manifest(out_dir / part.name, header, *part.records);
    if (!wrote.ok()) return usage_error(wrote.error().message);
  }
  std::cout << "split " << manifest->records.size() << " records into bench="
            << split->bench.size() << " sft=" << split->sft.size() << " rl=" << split->rl.size()
            << "\n";
  return kExitOk;
}

int cmd_data_audit(const fs::path& bench, const fs::path& sft, const fs::path& rl) {
  auto bench_manifest = datapipe::read_manifest(bench);
  auto sft_manifest = datapipe::read_manifest(sft);
  auto rl_manifest = datapipe::read_manifest(rl);
  for (const auto* m : {&bench_manifest, &sft_manifest, &rl_manifest}) {
    if (!m->ok()) return usage_error(m->error().message);
  }
  auto report = datapipe::audit_manifests(bench_manifest->records, sft_manifest->records,
                                          rl_manifest->records);
  Json doc{{"version", 1},
           {"pass", report.pass},
           {"overlapping_ids", report.overlapping_ids},
           {"category_histograms", report.category_histograms}};
  std::cout << doc.dump(2) << "\n";
  return report.pass ? kExitOk : kExitCriteria;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"search-agent runtime for grounded image generation"};
  app.require_subcommand(1);

  std::optional<std::string> config_path;
  app.add_option("--config", config_path, "key=value config file");
  std::map<std::string, std::string> overrides;

  // run
  auto* run = app.add_subcommand("run", "run episodes over a prompt manifest");
  std::string prompts_path;
  run->add_option("--prompts", prompts_path, "prompt manifest (JSONL)")->required();
  std::optional<std::string> mock_fixtures;
  run->add_option("--mock-fixtures", mock_fixtures, "fixture directory for offline runs");
  std::optional<int> group_size_flag;
  run->add_option("--group-size", group_size_flag, "rollouts per prompt");
  std::optional<int> parallel_flag;
  run->add_option("--parallel", parallel_flag, "concurrent episodes");
  std::optional<std::string> out_dir_flag;
  run->add_option("--out", out_dir_flag, "output directory");
  std::optional<std::string> assets_flag;
  run->add_option("--assets", assets_flag, "prompt assets directory");
  bool eval_mode = false;
  run->add_flag("--eval", eval_mode, "use the evaluation context budget (64K)");

  // score
  auto* score = app.add_subcommand("score", "aggregate judged samples into a report");
  std::optional<std::string> judged_input;
  score->add_option("--input", judged_input, "judged samples (JSONL)");
  std::optional<std::string> manifest_input;
  score->add_option("--manifest", manifest_input, "benchmark manifest to judge (JSONL)");
  std::optional<std::string> mock_judge;
  score->add_option("--mock-judge", mock_judge, "judge fixture directory");
  bool per_sample = false;
  score->add_flag("--per-sample", per_sample, "emit one score per sample");
  std::optional<std::string> score_out;
  score->add_option("--out", score_out, "report output directory");
  std::optional<std::string> score_assets;
  score->add_option("--assets", score_assets, "prompt assets directory");

  // grpo
  auto* grpo_cmd = app.add_subcommand("grpo", "compute advantages and the objective");
  std::string rollouts_path;
  grpo_cmd->add_option("--rollouts", rollouts_path, "rollout groups (JSONL)")->required();
  bool grad_check = false;
  grpo_cmd->add_flag("--grad-check", grad_check, "compare against finite differences");
  bool emit_grads = false;
  grpo_cmd->add_flag("--grads", emit_grads, "include per-token gradients");
  std::optional<std::string> grpo_out;
  grpo_cmd->add_option("--out", grpo_out, "output file (default: stdout)");

  // data
  auto* data = app.add_subcommand("data", "dataset filtering, splitting, auditing");
  data->require_subcommand(1);
  auto* data_filter = data->add_subcommand("filter", "apply the filtering rules");
  std::string filter_input;
  std::string filter_out = "out";
  data_filter->add_option("--input", filter_input, "raw records (JSONL)")->required();
  data_filter->add_option("--out", filter_out, "output directory");
  auto* data_split = data->add_subcommand("split", "seeded disjoint split");
  std::string split_input;
  std::string split_out = "out";
  data_split->add_option("--input", split_input, "kept records (JSONL)")->required();
  data_split->add_option("--out", split_out, "output directory");
  std::optional<size_t> bench_flag, sft_flag, rl_flag;
  std::optional<std::uint64_t> seed_flag;
  data_split->add_option("--bench", bench_flag, "benchmark size");
  data_split->add_option("--sft", sft_flag, "sft size");
  data_split->add_option("--rl", rl_flag, "rl size");
  data_split->add_option("--seed", seed_flag, "shuffle seed");
  auto* data_audit = data->add_subcommand("audit", "check manifest disjointness");
  std::string audit_bench, audit_sft, audit_rl;
  data_audit->add_option("--bench", audit_bench, "benchmark manifest")->required();
  data_audit->add_option("--sft", audit_sft, "sft manifest")->required();
  data_audit->add_option("--rl", audit_rl, "rl manifest")->required();

  CLI11_PARSE(app, argc, argv);

  if (group_size_flag) overrides["run.group_size"] = std::to_string(*group_size_flag);
  if (parallel_flag) overrides["run.parallel"] = std::to_string(*parallel_flag);
  if (out_dir_flag) overrides["run.output_dir"] = *out_dir_flag;
  if (assets_flag) overrides["run.assets_dir"] = *assets_flag;
  if (score_assets) overrides["run.assets_dir"] = *score_assets;
  if (eval_mode) overrides["episode.max_context_tokens"] = "64000";
  if (bench_flag) overrides["split.bench_size"] = std::to_string(*bench_flag);
  if (sft_flag) overrides["split.sft_size"] = std::to_string(*sft_flag);
  if (rl_flag) overrides["split.rl_size"] = std::to_string(*rl_flag);
  if (seed_flag) overrides["split.seed"] = std::to_string(*seed_flag);

  auto cfg = config::build_config(config_path, overrides);
  if (!cfg.ok()) return usage_error(cfg.error().message);

  if (run->parsed()) {
    std::optional<fs::path> fixtures;
    if (mock_fixtures) fixtures = fs::path(*mock_fixtures);
    return cmd_run(cfg.value(), prompts_path, fixtures);
  }
  if (score->parsed()) {
    std::optional<fs::path> judged, manifest, judge_dir, out;
    if (judged_input) judged = fs::path(*judged_input);
    if (manifest_input) manifest = fs::path(*manifest_input);
    if (mock_judge) judge_dir = fs::path(*mock_judge);
    if (score_out) out = fs::path(*score_out);
    return cmd_score(cfg.value(), judged, manifest, judge_dir, per_sample, out);
  }
  if (grpo_cmd->parsed()) {
    std::optional<fs::path> out;
    if (grpo_out) out = fs::path(*grpo_out);
    return cmd_grpo(cfg.value(), rollouts_path, grad_check, emit_grads, out);
  }
  if (data->parsed()) {
    if (data_filter->parsed()) return cmd_data_filter(cfg.value(), filter_input, filter_out);
    if (data_split->parsed()) return cmd_data_split(cfg.value(), split_input, split_out);
    if (data_audit->parsed()) return cmd_data_audit(audit_bench, audit_sft, audit_rl);
  }
  return usage_error("no subcommand selected");
}
