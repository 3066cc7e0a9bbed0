#include "mlpo/rloo.hpp"

#include <cmath>
#include <map>

namespace mlpo {

namespace {
constexpr std::uint64_t kStepStream = 31;
}

void RlooConfig::validate() const {
  if (k < 2) throw ConfigError("rloo.k must be >= 2 (leave-one-out baseline needs k - 1 >= 1)");
  if (!(beta >= 0.0)) throw ConfigError("rloo.beta must be >= 0");
  if (!(temperature > 0.0)) throw ConfigError("rloo.temperature must be positive");
  if (!(learning_rate >= 0.0)) throw ConfigError("rloo.learning_rate must be >= 0");
  if (epochs < 1) throw ConfigError("rloo.epochs must be >= 1");
  if (prompts_per_step < 1) throw ConfigError("rloo.prompts_per_step must be >= 1");
  if (max_len < 1) throw ConfigError("rloo.max_len must be >= 1");
}

std::vector<double> rloo_advantages(std::span<const double> rewards) {
  const std::size_t k = rewards.size();
  if (k < 2) throw ConfigError("rloo_advantages: need k >= 2 samples, got " + std::to_string(k));
  std::vector<double> adv(k);
  const double denom = static_cast<double>(k - 1);
  for (std::size_t i = 0; i < k; ++i) {
    double others = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (j != i) others += rewards[j];
    }
    adv[i] = rewards[i] - others / denom;
  }
  return adv;
}

RlooEstimate rloo_gradient_estimate(const PolicyParams& theta, const PolicyParams& ref,
                                    const Prompt& prompt, const RewardSpec& reward,
                                    const RlooConfig& cfg, const SeedPath& stream) {
  cfg.validate();
  const SamplingConfig sampling{cfg.temperature, cfg.max_len, 0};
  RlooEstimate est;
  est.grad = Gradient(theta.weights.rows(), theta.weights.cols());
  for (std::size_t i = 0; i < cfg.k; ++i) {
    auto rng = stream.child(i).engine();
    Completion y = sample(theta, prompt, sampling, rng);
    const double r = score(reward, prompt, y);
    const double lp = log_prob(theta, prompt, y, cfg.max_len);
    const double lq = cfg.beta == 0.0 ? lp : log_prob(ref, prompt, y, cfg.max_len);
    est.raw_rewards.push_back(r);
    est.shaped_rewards.push_back(shaped_reward(r, lp, lq, cfg.beta));
    est.samples.push_back(std::move(y));
  }
  est.advantages = rloo_advantages(est.shaped_rewards);
  const double inv_k = 1.0 / static_cast<double>(cfg.k);
  for (std::size_t i = 0; i < cfg.k; ++i) {
    if (est.advantages[i] == 0.0) continue;
    accumulate_grad_log_prob(theta, prompt, est.samples[i], inv_k * est.advantages[i], est.grad,
                             cfg.max_len);
  }
  return est;
}

Gradient exact_gradient_oracle(const PolicyParams& theta, const PolicyParams& ref,
                               const Prompt& prompt, const RewardSpec& reward, double beta,
                               std::size_t max_len) {
  const auto all = enumerate_completions(theta, prompt, max_len);
  std::vector<double> shaped(all.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto& y = all[i].completion;
    const double lp = log_prob(theta, prompt, y, max_len);
    const double lq = log_prob(ref, prompt, y, max_len);
    shaped[i] = shaped_reward(score(reward, prompt, y), lp, lq, beta);
    mean += all[i].probability * shaped[i];
  }
  Gradient g(theta.weights.rows(), theta.weights.cols());
  for (std::size_t i = 0; i < all.size(); ++i) {
    accumulate_grad_log_prob(theta, prompt, all[i].completion,
                             all[i].probability * (shaped[i] - mean), g, max_len);
  }
  return g;
}

std::vector<std::pair<std::size_t, std::size_t>> proportional_schedule(const PromptMixture& mixture) {
  std::size_t total = 0;
  for (const auto& lp : mixture) total += lp.prompts.size();
  std::vector<long long> current(mixture.size(), 0);
  std::vector<std::size_t> next(mixture.size(), 0);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(total);
  for (std::size_t n = 0; n < total; ++n) {
    std::size_t best = 0;
    bool found = false;
    for (std::size_t i = 0; i < mixture.size(); ++i) {
      if (mixture[i].prompts.empty()) continue;
      current[i] += static_cast<long long>(mixture[i].prompts.size());
      if (!found || current[i] > current[best]) {
        best = i;
        found = true;
      }
    }
    current[best] -= static_cast<long long>(total);
    out.emplace_back(best, next[best]++);
  }
  return out;
}

std::size_t rloo_total_steps(const PromptMixture& mixture, const RlooConfig& cfg) {
  std::size_t total = 0;
  for (const auto& lp : mixture) total += lp.prompts.size();
  return cfg.epochs * ((total + cfg.prompts_per_step - 1) / cfg.prompts_per_step);
}

RlooResult train_rloo(const PolicyParams& init, const PolicyParams& ref,
                      const PromptMixture& mixture, const RewardSpec& reward,
                      const RlooConfig& cfg) {
  cfg.validate();
  init.validate();
  ref.validate();
  const auto schedule = proportional_schedule(mixture);
  if (schedule.empty()) throw ConfigError("train_rloo: prompt mixture is empty");

  const auto exploit = reward.lexicon->exploit_token();
  const Token eos = init.vocab.eos();
  const std::size_t per_epoch = (schedule.size() + cfg.prompts_per_step - 1) / cfg.prompts_per_step;
  const std::size_t snapshot_every = cfg.checkpoint_every == 0 ? per_epoch : cfg.checkpoint_every;

  RlooResult res{init, {}, {}, 0};
  res.snapshots.push_back({0, init});
  auto& theta = res.params;
  Gradient grad(theta.weights.rows(), theta.weights.cols());

  struct LangStats {
    double raw = 0.0, shaped = 0.0, kl = 0.0;
    std::size_t samples = 0, tokens = 0, exploit_tokens = 0;
  };

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t start = 0; start < schedule.size(); start += cfg.prompts_per_step) {
      const std::size_t end = std::min(schedule.size(), start + cfg.prompts_per_step);
      const double inv = 1.0 / static_cast<double>(end - start);
      grad.fill(0.0);
      std::map<LanguageId, LangStats> stats;
      for (std::size_t b = start; b < end; ++b) {
        const auto [mi, pi] = schedule[b];
        const Prompt& prompt = mixture[mi].prompts[pi];
        const SeedPath stream(cfg.seed, {kStepStream, step, b - start});
        auto est = rloo_gradient_estimate(theta, ref, prompt, reward, cfg, stream);
        grad.axpy(inv, est.grad);

        auto& s = stats[prompt.lang];
        for (std::size_t i = 0; i < cfg.k; ++i) {
          const auto& y = est.samples[i];
          s.raw += est.raw_rewards[i];
          s.shaped += est.shaped_rewards[i];
          s.kl += trajectory_kl(theta, ref, prompt, y, cfg.max_len);
          ++s.samples;
          for (Token t : y.tokens) {
            if (t == eos) continue;
            ++s.tokens;
            if (exploit && t == *exploit) ++s.exploit_tokens;
          }
        }
      }
      if (cfg.learning_rate != 0.0) theta.weights.axpy(cfg.learning_rate, grad);
      if (!theta.weights.all_finite()) throw TrainingAborted("train_rloo: non-finite update", step);

      const double gnorm = grad.norm();
      for (const auto& [lang, s] : stats) {
        const double n = static_cast<double>(s.samples);
        res.history.push_back({step, lang, s.raw / n, s.shaped / n, s.kl / n, gnorm,
                               s.tokens == 0 ? 0.0
                                             : static_cast<double>(s.exploit_tokens) /
                                                   static_cast<double>(s.tokens)});
      }
      ++step;
      if (step % snapshot_every == 0) res.snapshots.push_back({step, theta});
    }
  }
  res.steps = step;
  if (res.snapshots.back().step != step) res.snapshots.push_back({step, theta});
  return res;
}

}  // namespace mlpo
