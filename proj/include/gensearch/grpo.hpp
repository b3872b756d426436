#pragma once

/// Group-relative policy optimization math over supplied per-token log
/// probabilities. Rewards are standardized within a rollout group to form
/// advantages; the objective is the clipped importance-ratio surrogate with
/// an optional KL penalty to a reference policy. No model or optimizer
/// lives here: gradients are returned with respect to the new-policy log
/// probabilities and it is the caller's job to backpropagate further.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "gensearch/common.hpp"

namespace gensearch::grpo {

using Json = nlohmann::json;

enum class GrpoErrorCode { GroupTooSmall, LengthMismatch, MalformedInput };

inline const char* to_string(GrpoErrorCode code) {
  switch (code) {
    case GrpoErrorCode::GroupTooSmall: return "GroupTooSmall";
    case GrpoErrorCode::LengthMismatch: return "LengthMismatch";
    case GrpoErrorCode::MalformedInput: return "MalformedInput";
  }
  return "?";
}

struct GrpoError {
  GrpoErrorCode code;
  std::string message;
};

struct GrpoConfig {
  double epsilon = 0.2;    // clip radius
  double beta_kl = 0.0;    // KL penalty coefficient
  int group_size = 6;      // rollouts per prompt
  double std_floor = 1e-6; // below this reward spread, advantages are zero
};

struct SequenceLogProbs {
  std::vector<double> logp_new;
  std::vector<double> logp_old;
  std::vector<double> logp_ref;
  std::vector<int> mask;  // per-token inclusion flags; empty means all included

  size_t tokens() const { return logp_new.size(); }
  bool token_included(size_t t) const { return mask.empty() || mask[t] != 0; }
};

struct GroupRollout {
  std::string group_id;
  std::vector<double> rewards;
  std::vector<SequenceLogProbs> sequences;
};

// ---------------------------------------------------------------------------
// Advantages
// ---------------------------------------------------------------------------

/// Standardizes rewards within the group using the population standard
/// deviation. Degenerate groups (spread below std_floor) get all-zero
/// advantages instead of a blow-up.
inline Expected<std::vector<double>, GrpoError> compute_advantages(
    const std::vector<double>& rewards, const GrpoConfig& cfg = {}) {
  const size_t n = rewards.size();
  if (n < 2) {
    return GrpoError{GrpoErrorCode::GroupTooSmall,
                     "advantage normalization needs at least 2 rollouts, got " +
                         std::to_string(n)};
  }
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(n);

  double variance = 0.0;
  for (double r : rewards) variance += (r - mean) * (r - mean);
  variance /= static_cast<double>(n);
  double std_dev = std::sqrt(variance);

  std::vector<double> advantages(n, 0.0);
  if (std_dev >= cfg.std_floor) {
    for (size_t i = 0; i < n; ++i) advantages[i] = (rewards[i] - mean) / std_dev;
  }
  return advantages;
}

// ---------------------------------------------------------------------------
// Objective
// ---------------------------------------------------------------------------

struct GrpoObjective {
  double objective = 0.0;
  // Gradient of the objective with respect to each logp_new entry, aligned
  // with the input sequences. Masked tokens and sequences carry zeros.
  std::vector<std::vector<double>> grad_logp_new;
};

namespace detail {

struct TokenTerms {
  double contribution = 0.0;  // surrogate minus scaled KL penalty
  double gradient = 0.0;      // d(contribution)/d(logp_new)
};

inline TokenTerms token_terms(double logp_new, double logp_old, double logp_ref, double advantage,
                              const GrpoConfig& cfg) {
  const double ratio = std::exp(logp_new - logp_old);
  const double clipped_ratio = std::clamp(ratio, 1.0 - cfg.epsilon, 1.0 + cfg.epsilon);
  const double linear = ratio * advantage;
  const double clipped = clipped_ratio * advantage;

  TokenTerms terms;
  if (linear <= clipped) {
    terms.contribution = linear;
    terms.gradient = linear;  // d(ratio * A)/d(logp_new) = ratio * A
  } else {
    terms.contribution = clipped;
    terms.gradient = 0.0;
  }

  if (cfg.beta_kl != 0.0) {
    const double delta = logp_ref - logp_new;
    const double kl = std::exp(delta) - delta - 1.0;  // nonnegative, zero at equality
    terms.contribution -= cfg.beta_kl * kl;
    terms.gradient -= cfg.beta_kl * (1.0 - std::exp(delta));
  }
  return terms;
}

}  // namespace detail

/// Per token: ratio = exp(logp_new - logp_old), surrogate
/// min(ratio * A, clip(ratio, 1-eps, 1+eps) * A), KL penalty
/// exp(logp_ref - logp_new) - (logp_ref - logp_new) - 1. Contributions are
/// token-averaged within a sequence, then averaged across sequences.
inline Expected<GrpoObjective, GrpoError> grpo_objective(const GroupRollout& group,
                                                         const std::vector<double>& advantages,
                                                         const GrpoConfig& cfg = {}) {
  if (group.sequences.size() != advantages.size()) {
    return GrpoError{GrpoErrorCode::LengthMismatch,
                     "got " + std::to_string(advantages.size()) + " advantages for " +
                         std::to_string(group.sequences.size()) + " sequences"};
  }
  for (size_t i = 0; i < group.sequences.size(); ++i) {
    const SequenceLogProbs& seq = group.sequences[i];
    if (seq.logp_old.size() != seq.tokens() || seq.logp_ref.size() != seq.tokens() ||
        (!seq.mask.empty() && seq.mask.size() != seq.tokens())) {
      return GrpoError{GrpoErrorCode::LengthMismatch,
                       "sequence " + std::to_string(i) + " has unequal log-prob array lengths"};
    }
  }

  GrpoObjective out;
  out.grad_logp_new.resize(group.sequences.size());

  // First pass: count sequences with at least one included token.
  size_t active_sequences = 0;
  for (const SequenceLogProbs& seq : group.sequences) {
    for (size_t t = 0; t < seq.tokens(); ++t) {
      if (seq.token_included(t)) {
        ++active_sequences;
        break;
      }
    }
  }

  for (size_t i = 0; i < group.sequences.size(); ++i) {
    const SequenceLogProbs& seq = group.sequences[i];
    out.grad_logp_new[i].assign(seq.tokens(), 0.0);

    size_t included = 0;
    for (size_t t = 0; t < seq.tokens(); ++t) {
      if (seq.token_included(t)) ++included;
    }
    if (included == 0 || active_sequences == 0) continue;

    const double scale =
        1.0 / (static_cast<double>(active_sequences) * static_cast<double>(included));
    double sequence_sum = 0.0;
    for (size_t t = 0; t < seq.tokens(); ++t) {
      if (!seq.token_included(t)) continue;
      auto terms =
          detail::token_terms(seq.logp_new[t], seq.logp_old[t], seq.logp_ref[t], advantages[i], cfg);
      sequence_sum += terms.contribution;
      out.grad_logp_new[i][t] = scale * terms.gradient;
    }
    out.objective += sequence_sum / static_cast<double>(included);
  }
  if (active_sequences > 0) out.objective /= static_cast<double>(active_sequences);
  return out;
}

// ---------------------------------------------------------------------------
// Rollout masking
// ---------------------------------------------------------------------------

struct RolloutLimits {
  long max_total_tokens = 36000;
  int ngram_size = 20;      // window length, in whitespace tokens
  int repeat_threshold = 4; // occurrences at which a response counts as repetitive
};

struct MaskFlags {
  bool overlong = false;
  bool repetitive = false;

  bool masked() const { return overlong || repetitive; }
};

struct RolloutMaskReport {
  std::vector<MaskFlags> flags;

  size_t masked_count() const {
    size_t n = 0;
    for (const MaskFlags& f : flags) {
      if (f.masked()) ++n;
    }
    return n;
  }
};

/// What the masking pass needs to know about one trajectory.
struct TrajectoryStats {
  long total_tokens = 0;
  std::vector<std::string> responses;  // raw per-turn model outputs
};

namespace detail {

inline std::vector<std::string> whitespace_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  size_t start = 0;
  while (start < text.size()) {
    while (start < text.size() && is_space(text[start])) ++start;
    size_t end = start;
    while (end < text.size() && !is_space(text[end])) ++end;
    if (end > start) tokens.emplace_back(text.substr(start, end - start));
    start = end;
  }
  return tokens;
}

inline bool has_repeated_ngram(const std::vector<std::string>& tokens, int n, int threshold) {
  if (n <= 0 || tokens.size() < static_cast<size_t>(n)) return false;
  std::unordered_map<std::string, int> counts;
  for (size_t start = 0; start + n <= tokens.size(); ++start) {
    std::string key;
    for (int k = 0; k < n; ++k) {
      key += tokens[start + k];
      key += '\x1f';
    }
    if (++counts[key] >= threshold) return true;
  }
  return false;
}

}  // namespace detail

/// Flags trajectories that exceed the total-token limit and responses in
/// which any n-gram recurs at least `repeat_threshold` times. Masked
/// trajectories must be dropped before advantage normalization.
inline RolloutMaskReport apply_rollout_masks(const std::vector<TrajectoryStats>& trajectories,
                                             const RolloutLimits& limits = {}) {
  RolloutMaskReport report;
  report.flags.reserve(trajectories.size());
  for (const TrajectoryStats& traj : trajectories) {
    MaskFlags flags;
    flags.overlong = traj.total_tokens > limits.max_total_tokens;
    for (const std::string& response : traj.responses) {
      if (detail::has_repeated_ngram(detail::whitespace_tokens(response), limits.ngram_size,
                                     limits.repeat_threshold)) {
        flags.repetitive = true;
        break;
      }
    }
    report.flags.push_back(flags);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Group evaluation with sequence-level exclusions
// ---------------------------------------------------------------------------

struct GroupEvaluation {
  double objective = 0.0;
  std::vector<double> advantages;  // aligned with the input; excluded entries are 0
  std::vector<std::vector<double>> grad_logp_new;
};

/// Evaluates a group after dropping excluded sequences: exclusions
/// participate in neither the reward statistics nor the objective, and the
/// surviving values match a run on the filtered group.
inline Expected<GroupEvaluation, GrpoError> evaluate_group(
    const GroupRollout& group, const GrpoConfig& cfg = {},
    const std::vector<bool>& excluded = {}) {
  if (group.rewards.size() != group.sequences.size()) {
    return GrpoError{GrpoErrorCode::LengthMismatch,
                     "got " + std::to_string(group.rewards.size()) + " rewards for " +
                         std::to_string(group.sequences.size()) + " sequences"};
  }
  if (!excluded.empty() && excluded.size() != group.sequences.size()) {
    return GrpoError{GrpoErrorCode::LengthMismatch, "exclusion flags do not match group size"};
  }

  GroupRollout filtered;
  std::vector<size_t> surviving;
  for (size_t i = 0; i < group.sequences.size(); ++i) {
    if (!excluded.empty() && excluded[i]) continue;
    surviving.push_back(i);
    filtered.rewards.push_back(group.rewards[i]);
    filtered.sequences.push_back(group.sequences[i]);
  }

  auto advantages = compute_advantages(filtered.rewards, cfg);
  if (!advantages.ok()) return advantages.error();
  auto objective = grpo_objective(filtered, advantages.value(), cfg);
  if (!objective.ok()) return objective.error();

  GroupEvaluation out;
  out.objective = objective.value().objective;
  out.advantages.assign(group.sequences.size(), 0.0);
  out.grad_logp_new.resize(group.sequences.size());
  for (size_t i = 0; i < group.sequences.size(); ++i) {
    out.grad_logp_new[i].assign(group.sequences[i].tokens(), 0.0);
  }
  for (size_t k = 0; k < surviving.size(); ++k) {
    out.advantages[surviving[k]] = advantages.value()[k];
    out.grad_logp_new[surviving[k]] = objective.value().grad_logp_new[k];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Wire format
// ---------------------------------------------------------------------------

inline Expected<GroupRollout, GrpoError> group_rollout_from_json(const Json& doc) {
  if (!doc.is_object() || !doc.contains("rewards") || !doc.contains("sequences") ||
      !doc["rewards"].is_array() || !doc["sequences"].is_array()) {
    return GrpoError{GrpoErrorCode::MalformedInput,
                     "rollout line must be an object with 'rewards' and 'sequences' arrays"};
  }
  GroupRollout group;
  if (doc.contains("group_id") && doc["group_id"].is_string()) {
    group.group_id = doc["group_id"].get<std::string>();
  }
  for (const Json& r : doc["rewards"]) {
    if (!r.is_number()) {
      return GrpoError{GrpoErrorCode::MalformedInput, "rewards must be numbers"};
    }
    group.rewards.push_back(r.get<double>());
  }
  for (const Json& s : doc["sequences"]) {
    SequenceLogProbs seq;
    for (const char* key : {"logp_new", "logp_old", "logp_ref"}) {
      if (!s.is_object() || !s.contains(key) || !s[key].is_array()) {
        return GrpoError{GrpoErrorCode::MalformedInput,
                         std::string("sequence is missing array '") + key + "'"};
      }
    }
    auto read = [](const Json& arr, std::vector<double>& out) -> bool {
      for (const Json& v : arr) {
        if (!v.is_number()) return false;
        out.push_back(v.get<double>());
      }
      return true;
    };
    if (!read(s["logp_new"], seq.logp_new) || !read(s["logp_old"], seq.logp_old) ||
        !read(s["logp_ref"], seq.logp_ref)) {
      return GrpoError{GrpoErrorCode::MalformedInput, "log probabilities must be numbers"};
    }
    if (s.contains("mask") && s["mask"].is_array()) {
      for (const Json& v : s["mask"]) {
        if (!v.is_number_integer()) {
          return GrpoError{GrpoErrorCode::MalformedInput, "mask entries must be integers"};
        }
        seq.mask.push_back(v.get<int>());
      }
    }
    if (seq.logp_old.size() != seq.logp_new.size() || seq.logp_ref.size() != seq.logp_new.size() ||
        (!seq.mask.empty() && seq.mask.size() != seq.logp_new.size())) {
      return GrpoError{GrpoErrorCode::LengthMismatch,
                       "sequence arrays in group '" + group.group_id + "' differ in length"};
    }
    group.sequences.push_back(std::move(seq));
  }
  if (group.rewards.size() != group.sequences.size()) {
    return GrpoError{GrpoErrorCode::LengthMismatch,
                     "group '" + group.group_id + "' has " + std::to_string(group.rewards.size()) +
                         " rewards for " + std::to_string(group.sequences.size()) + " sequences"};
  }
  return group;
}

}  // namespace gensearch::grpo
