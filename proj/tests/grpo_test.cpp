#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "gensearch/grpo.hpp"

using namespace gensearch;
using namespace gensearch::grpo;

namespace {

// Recomputes J from scratch; used as the finite-difference oracle.
double objective_value(const GroupRollout& group, const std::vector<double>& advantages,
                       const GrpoConfig& cfg) {
  auto result = grpo_objective(group, advantages, cfg);
  REQUIRE(result.ok());
  return result->objective;
}

GroupRollout random_group(std::mt19937_64& rng, int max_sequences = 4, int max_tokens = 8,
                          bool with_masks = false) {
  std::uniform_int_distribution<int> n_seq(2, max_sequences);
  std::uniform_int_distribution<int> n_tok(1, max_tokens);
  std::uniform_real_distribution<double> reward(0.0, 1.0);
  std::uniform_real_distribution<double> logp(-3.0, -0.05);
  // Wide enough that ratios land on both sides of the clip band.
  std::uniform_real_distribution<double> jitter(-0.5, 0.5);
  std::uniform_int_distribution<int> coin(0, 1);

  GroupRollout group;
  int sequences = n_seq(rng);
  for (int i = 0; i < sequences; ++i) {
    group.rewards.push_back(reward(rng));
    SequenceLogProbs seq;
    int tokens = n_tok(rng);
    for (int t = 0; t < tokens; ++t) {
      double old_lp = logp(rng);
      seq.logp_old.push_back(old_lp);
      // Keep the ratio away from the clip kinks so central differences are
      // comparable to the analytic piecewise gradient.
      double delta = jitter(rng);
      while (std::abs(std::exp(delta) - 0.8) < 2e-2 || std::abs(std::exp(delta) - 1.2) < 2e-2) {
        delta = jitter(rng);
      }
      seq.logp_new.push_back(old_lp + delta);
      seq.logp_ref.push_back(old_lp + jitter(rng));
      if (with_masks) seq.mask.push_back(coin(rng));
    }
    if (with_masks) {
      bool any = false;
      for (int m : seq.mask) any = any || m != 0;
      if (!any) seq.mask[0] = 1;
    }
    group.sequences.push_back(std::move(seq));
  }
  return group;
}

}  // namespace

TEST_CASE("identical rewards produce zero advantages", "[grpo]") {
  auto advantages = compute_advantages({0.5, 0.5, 0.5});
  REQUIRE(advantages.ok());
  for (double a : advantages.value()) CHECK(a == 0.0);
}

TEST_CASE("the three-reward hand case standardizes as expected", "[grpo]") {
  auto advantages = compute_advantages({1.0, 0.5, 0.0});
  REQUIRE(advantages.ok());
  REQUIRE(advantages->size() == 3);
  CHECK((*advantages)[0] == Catch::Approx(1.224745).margin(1e-5));
  CHECK((*advantages)[1] == Catch::Approx(0.0).margin(1e-9));
  CHECK((*advantages)[2] == Catch::Approx(-1.224745).margin(1e-5));
}

TEST_CASE("advantages are invariant under positive affine reward maps", "[grpo]") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> reward(0.0, 1.0);
  std::uniform_real_distribution<double> scale(0.1, 5.0);
  std::uniform_real_distribution<double> shift(-3.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> rewards(6);
    for (double& r : rewards) r = reward(rng);
    double a = scale(rng), b = shift(rng);
    std::vector<double> mapped(6);
    for (size_t i = 0; i < 6; ++i) mapped[i] = a * rewards[i] + b;

    auto original = compute_advantages(rewards);
    auto transformed = compute_advantages(mapped);
    REQUIRE(original.ok());
    REQUIRE(transformed.ok());
    for (size_t i = 0; i < 6; ++i) {
      CHECK((*transformed)[i] == Catch::Approx((*original)[i]).margin(1e-7));
    }
  }
}

TEST_CASE("advantages are zero-sum with unit population variance", "[grpo]") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> reward(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> rewards(6);
    for (double& r : rewards) r = reward(rng);
    auto advantages = compute_advantages(rewards);
    REQUIRE(advantages.ok());
    double sum = 0.0, sq = 0.0;
    for (double a : advantages.value()) {
      sum += a;
      sq += a * a;
    }
    CHECK(std::abs(sum) < 1e-9);
    double variance = sq / 6.0;
    if (variance > 0) CHECK(variance == Catch::Approx(1.0).margin(1e-9));
  }
}

TEST_CASE("groups below two rollouts are rejected", "[grpo]") {
  auto single = compute_advantages({1.0});
  REQUIRE_FALSE(single.ok());
  CHECK(single.error().code == GrpoErrorCode::GroupTooSmall);
}

TEST_CASE("unit ratio reduces the objective to the mean advantage", "[grpo]") {
  GroupRollout group;
  group.rewards = {1.0, 0.0};
  for (int i = 0; i < 2; ++i) {
    SequenceLogProbs seq;
    for (int t = 0; t < 3; ++t) {
      seq.logp_new.push_back(-1.0);
      seq.logp_old.push_back(-1.0);
      seq.logp_ref.push_back(-1.0);
    }
    group.sequences.push_back(seq);
  }
  auto advantages = compute_advantages(group.rewards);
  REQUIRE(advantages.ok());
  auto result = grpo_objective(group, advantages.value());
  REQUIRE(result.ok());
  double mean_advantage = ((*advantages)[0] + (*advantages)[1]) / 2.0;
  CHECK(result->objective == Catch::Approx(mean_advantage).margin(1e-12));
  // Each token's gradient is its advantage scaled by the double averaging.
  for (size_t i = 0; i < 2; ++i) {
    for (double g : result->grad_logp_new[i]) {
      CHECK(g == Catch::Approx((*advantages)[i] / (2.0 * 3.0)).margin(1e-12));
    }
  }
}

TEST_CASE("a single-token positive-advantage sequence clips at one plus epsilon", "[grpo]") {
  GroupRollout group;
  group.rewards = {1.0};
  SequenceLogProbs seq;
  seq.logp_old.push_back(-1.0);
  seq.logp_new.push_back(-1.0 + std::log(1.5));
  seq.logp_ref.push_back(-1.0);
  group.sequences.push_back(seq);

  std::vector<double> advantages = {1.0};
  auto result = grpo_objective(group, advantages);
  REQUIRE(result.ok());
  CHECK(result->objective == Catch::Approx(1.2).margin(1e-12));
  CHECK(result->grad_logp_new[0][0] == 0.0);
}

TEST_CASE("matching reference policy zeroes the KL penalty", "[grpo]") {
  GroupRollout group;
  group.rewards = {0.9, 0.1};
  for (int i = 0; i < 2; ++i) {
    SequenceLogProbs seq;
    seq.logp_old = {-1.2, -0.7};
    seq.logp_new = {-1.1, -0.8};
    seq.logp_ref = {-1.1, -0.8};  // identical to the new policy
    group.sequences.push_back(seq);
  }
  auto advantages = compute_advantages(group.rewards);
  REQUIRE(advantages.ok());

  GrpoConfig no_kl;
  GrpoConfig with_kl;
  with_kl.beta_kl = 0.7;
  CHECK(objective_value(group, advantages.value(), with_kl) ==
        Catch::Approx(objective_value(group, advantages.value(), no_kl)).margin(1e-12));
}

TEST_CASE("the KL penalty term is nonnegative and vanishes only at equality", "[grpo]") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> logp(-4.0, 0.0);
  for (int i = 0; i < 2000; ++i) {
    double ref = logp(rng), now = logp(rng);
    double delta = ref - now;
    double k = std::exp(delta) - delta - 1.0;
    CHECK(k >= 0.0);
    if (std::abs(delta) > 1e-8) CHECK(k > 0.0);
  }
  CHECK(std::exp(0.0) - 0.0 - 1.0 == 0.0);
}

TEST_CASE("the clipped surrogate matches a brute-force grid", "[grpo]") {
  GrpoConfig cfg;
  for (double advantage : {-1.0, 1.0}) {
    for (double ratio = 0.1; ratio <= 3.0; ratio += 0.01) {
      GroupRollout group;
      group.rewards = {0.0};
      SequenceLogProbs seq;
      seq.logp_old = {-1.0};
      seq.logp_new = {-1.0 + std::log(ratio)};
      seq.logp_ref = {-1.0};
      group.sequences.push_back(seq);

      auto result = grpo_objective(group, {advantage}, cfg);
      REQUIRE(result.ok());
      double clipped = std::min(std::max(ratio, 1.0 - cfg.epsilon), 1.0 + cfg.epsilon);
      double expected = std::min(ratio * advantage, clipped * advantage);
      CHECK(result->objective == Catch::Approx(expected).margin(1e-9));
      if (advantage > 0) CHECK(result->objective <= (1.0 + cfg.epsilon) * advantage + 1e-12);
    }
  }
}

TEST_CASE("analytic gradients match central finite differences", "[grpo]") {
  std::mt19937_64 rng(2024);
  GrpoConfig cfg;
  cfg.beta_kl = 0.3;
  const double h = 1e-6;
  for (int trial = 0; trial < 50; ++trial) {
    bool with_masks = trial % 2 == 1;
    GroupRollout group = random_group(rng, 4, 8, with_masks);
    auto advantages = compute_advantages(group.rewards, cfg);
    REQUIRE(advantages.ok());
    auto analytic = grpo_objective(group, advantages.value(), cfg);
    REQUIRE(analytic.ok());

    for (size_t i = 0; i < group.sequences.size(); ++i) {
      for (size_t t = 0; t < group.sequences[i].tokens(); ++t) {
        GroupRollout bumped = group;
        bumped.sequences[i].logp_new[t] += h;
        double up = objective_value(bumped, advantages.value(), cfg);
        bumped.sequences[i].logp_new[t] -= 2 * h;
        double down = objective_value(bumped, advantages.value(), cfg);
        double numeric = (up - down) / (2 * h);
        double reference = std::max({std::abs(numeric), std::abs(analytic->grad_logp_new[i][t]),
                                     1e-3});
        CHECK(std::abs(numeric - analytic->grad_logp_new[i][t]) / reference < 1e-5);
      }
    }
  }
}

TEST_CASE("mismatched arrays are rejected", "[grpo]") {
  GroupRollout group;
  group.rewards = {1.0, 0.0};
  SequenceLogProbs good;
  good.logp_new = {-1.0};
  good.logp_old = {-1.0};
  good.logp_ref = {-1.0};
  SequenceLogProbs bad = good;
  bad.logp_old.push_back(-2.0);
  group.sequences = {good, bad};
  auto result = grpo_objective(group, {1.0, -1.0});
  REQUIRE_FALSE(result.ok());
  CHECK(result.error().code == GrpoErrorCode::LengthMismatch);
}

// ---------------------------------------------------------------------------
// Rollout masking
// ---------------------------------------------------------------------------

namespace {

// Direct n-gram counting oracle, structured independently of the library's
// early-exit scan.
bool repetition_oracle(const std::string& text, int n, int threshold) {
  std::vector<std::string> tokens;
  std::string piece;
  for (char c : text + " ") {
    if (c == ' ' || c == '\n' || c == '\t') {
      if (!piece.empty()) tokens.push_back(piece);
      piece.clear();
    } else {
      piece += c;
    }
  }
  if (tokens.size() < static_cast<size_t>(n)) return false;
  int best = 0;
  for (size_t i = 0; i + n <= tokens.size(); ++i) {
    int count = 0;
    for (size_t j = 0; j + n <= tokens.size(); ++j) {
      bool equal = true;
      for (int k = 0; k < n; ++k) {
        if (tokens[i + k] != tokens[j + k]) {
          equal = false;
          break;
        }
      }
      if (equal) ++count;
    }
    best = std::max(best, count);
  }
  return best >= threshold;
}

}  // namespace

TEST_CASE("overlong trajectories are masked", "[grpo]") {
  TrajectoryStats traj;
  traj.total_tokens = 40000;
  auto report = apply_rollout_masks({traj}, RolloutLimits{36000, 20, 4});
  REQUIRE(report.flags.size() == 1);
  CHECK(report.flags[0].overlong);
  CHECK_FALSE(report.flags[0].repetitive);
}

TEST_CASE("a repeated twenty-token block is flagged", "[grpo]") {
  std::string block;
  for (int i = 0; i < 20; ++i) block += "ab ";
  std::string response;
  for (int i = 0; i < 5; ++i) response += block;

  TrajectoryStats traj;
  traj.total_tokens = 100;
  traj.responses = {response};
  auto report = apply_rollout_masks({traj});
  REQUIRE(report.flags.size() == 1);
  CHECK(report.flags[0].repetitive);
  CHECK(repetition_oracle(response, 20, 4));
}

TEST_CASE("clean short trajectories are unmasked", "[grpo]") {
  TrajectoryStats traj;
  traj.total_tokens = 120;
  traj.responses = {"a short and varied response with no repeats at all"};
  auto report = apply_rollout_masks({traj});
  CHECK_FALSE(report.flags[0].masked());
}

TEST_CASE("repetition detection matches the counting oracle", "[grpo]") {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> n_tokens(0, 30);
  std::uniform_int_distribution<int> letter(0, 2);
  RolloutLimits limits;
  limits.ngram_size = 3;
  limits.repeat_threshold = 3;
  for (int trial = 0; trial < 300; ++trial) {
    std::string text;
    int n = n_tokens(rng);
    for (int i = 0; i < n; ++i) {
      text += static_cast<char>('a' + letter(rng));
      text += ' ';
    }
    TrajectoryStats traj;
    traj.responses = {text};
    auto report = apply_rollout_masks({traj}, limits);
    CHECK(report.flags[0].repetitive == repetition_oracle(text, 3, 3));
  }
}

TEST_CASE("masked sequences do not disturb the survivors", "[grpo]") {
  std::mt19937_64 rng(88);
  for (int trial = 0; trial < 50; ++trial) {
    GroupRollout group = random_group(rng, 6, 6);
    if (group.sequences.size() < 3) continue;
    std::vector<bool> excluded(group.sequences.size(), false);
    excluded[1] = true;

    GroupRollout filtered;
    for (size_t i = 0; i < group.sequences.size(); ++i) {
      if (excluded[i]) continue;
      filtered.rewards.push_back(group.rewards[i]);
      filtered.sequences.push_back(group.sequences[i]);
    }

    auto masked = evaluate_group(group, {}, excluded);
    auto direct = evaluate_group(filtered, {});
    REQUIRE(masked.ok());
    REQUIRE(direct.ok());
    CHECK(masked->objective == Catch::Approx(direct->objective).margin(1e-12));
    CHECK(masked->advantages[1] == 0.0);
    size_t k = 0;
    for (size_t i = 0; i < group.sequences.size(); ++i) {
      if (excluded[i]) continue;
      CHECK(masked->advantages[i] == Catch::Approx(direct->advantages[k]).margin(1e-12));
      ++k;
    }
  }
}

TEST_CASE("rollout lines parse and validate", "[grpo]") {
  Json line = Json::parse(R"({
    "group_id": "g1",
    "rewards": [1.0, 0.5],
    "sequences": [
      {"logp_new": [-1.0], "logp_old": [-1.0], "logp_ref": [-1.0]},
      {"logp_new": [-0.5, -0.6], "logp_old": [-0.5, -0.6], "logp_ref": [-0.5, -0.6], "mask": [1, 0]}
    ]
  })");
  auto group = group_rollout_from_json(line);
  REQUIRE(group.ok());
  CHECK(group->group_id == "g1");
  CHECK(group->sequences[1].mask == std::vector<int>{1, 0});

  Json broken = Json::parse(R"({
    "rewards": [1.0],
    "sequences": [{"logp_new": [-1.0, -2.0], "logp_old": [-1.0], "logp_ref": [-1.0]}]
  })");
  auto error = group_rollout_from_json(broken);
  REQUIRE_FALSE(error.ok());
  CHECK(error.error().code == GrpoErrorCode::LengthMismatch);
}
