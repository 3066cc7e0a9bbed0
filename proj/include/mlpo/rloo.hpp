#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mlpo/policy.hpp"
#include "mlpo/reward.hpp"
#include "mlpo/rng.hpp"
#include "mlpo/types.hpp"

namespace mlpo {

struct RlooConfig {
  std::size_t k = 2;
  double beta = 0.01;
  double temperature = 0.75;
  double learning_rate = 1e-2;
  std::size_t epochs = 2;
  std::size_t prompts_per_step = 2;
  std::uint64_t seed = 0;
  std::size_t max_len = kDefaultMaxLen;
  std::size_t checkpoint_every = 0;  // steps between snapshots; 0 = once per epoch

  void validate() const;
  bool operator==(const RlooConfig&) const = default;
};

// advantage_i = R_i - mean_{j != i} R_j. Throws ConfigError when k < 2.
std::vector<double> rloo_advantages(std::span<const double> rewards);

struct RlooEstimate {
  Gradient grad;
  std::vector<Completion> samples;
  std::vector<double> raw_rewards;
  std::vector<double> shaped_rewards;
  std::vector<double> advantages;
};

// Draws k completions at cfg.temperature (sample i from stream.child(i)),
// shapes their rewards with temperature-1 log-probs, and returns
// (1/k) sum_i advantage_i * grad log pi(y_i | x).
RlooEstimate rloo_gradient_estimate(const PolicyParams& theta, const PolicyParams& ref,
                                    const Prompt& prompt, const RewardSpec& reward,
                                    const RlooConfig& cfg, const SeedPath& stream);

// sum_y p(y) (shaped(y) - E[shaped]) grad log p(y), by full enumeration. This is
// the exact gradient of E[R] - beta * KL(pi || ref) for the prompt.
Gradient exact_gradient_oracle(const PolicyParams& theta, const PolicyParams& ref,
                               const Prompt& prompt, const RewardSpec& reward, double beta,
                               std::size_t max_len = kDefaultMaxLen);

struct LanguagePrompts {
  LanguageId lang;
  std::vector<Prompt> prompts;
};

using PromptMixture = std::vector<LanguagePrompts>;

// Interleaves the mixture's prompts so every prefix stays close to the
// per-language proportions (smooth weighted round-robin). Returns
// (mixture index, prompt index) pairs.
std::vector<std::pair<std::size_t, std::size_t>> proportional_schedule(const PromptMixture& mixture);

struct RlooRecord {
  std::size_t step = 0;
  LanguageId lang;
  double mean_reward_raw = 0.0;
  double mean_reward_shaped = 0.0;
  double mean_cond_kl = 0.0;
  double grad_norm = 0.0;
  double exploit_freq = 0.0;
};

struct RlooSnapshot {
  std::size_t step = 0;
  PolicyParams params;
};

struct RlooResult {
  PolicyParams params;
  std::vector<RlooRecord> history;
  std::vector<RlooSnapshot> snapshots;  // includes step 0
  std::size_t steps = 0;
};

std::size_t rloo_total_steps(const PromptMixture& mixture, const RlooConfig& cfg);

// Gradient ascent on the KL-shaped reward over epochs x ceil(N / prompts_per_step)
// steps. Throws TrainingAborted on a non-finite update.
RlooResult train_rloo(const PolicyParams& init, const PolicyParams& ref,
                      const PromptMixture& mixture, const RewardSpec& reward,
                      const RlooConfig& cfg);

}  // namespace mlpo
