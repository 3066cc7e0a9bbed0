#include "mlpo/dpo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mlpo/rng.hpp"

namespace mlpo {

namespace {

constexpr std::uint64_t kShuffleStream = 21;

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct RefLogProbs {
  double chosen = 0.0;
  double rejected = 0.0;
};

}  // namespace

void DpoConfig::validate() const {
  if (!(beta > 0.0)) throw ConfigError("dpo.beta must be positive");
  if (!(learning_rate >= 0.0)) throw ConfigError("dpo.learning_rate must be >= 0");
  if (epochs < 1) throw ConfigError("dpo.epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("dpo.batch_size must be >= 1");
}

double softplus(double x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double dpo_logit(const PolicyParams& theta, const PolicyParams& ref, const PreferencePair& pair,
                 double beta, std::size_t max_len) {
  const double chosen = log_prob(theta, pair.prompt, pair.chosen, max_len) -
                        log_prob(ref, pair.prompt, pair.chosen, max_len);
  const double rejected = log_prob(theta, pair.prompt, pair.rejected, max_len) -
                          log_prob(ref, pair.prompt, pair.rejected, max_len);
  return beta * (chosen - rejected);
}

double dpo_loss(const PolicyParams& theta, const PolicyParams& ref, const PreferencePair& pair,
                double beta, std::size_t max_len) {
  return softplus(-dpo_logit(theta, ref, pair, beta, max_len));
}

Gradient dpo_grad(const PolicyParams& theta, const PolicyParams& ref, const PreferencePair& pair,
                  double beta, std::size_t max_len) {
  const double z = dpo_logit(theta, ref, pair, beta, max_len);
  const double coef = -beta * sigmoid(-z);
  Gradient g(theta.weights.rows(), theta.weights.cols());
  accumulate_grad_log_prob(theta, pair.prompt, pair.chosen, coef, g, max_len);
  accumulate_grad_log_prob(theta, pair.prompt, pair.rejected, -coef, g, max_len);
  return g;
}

DpoResult train_dpo(const PolicyParams& init, const PolicyParams& ref, const Dataset& data,
                    const DpoConfig& cfg) {
  cfg.validate();
  if (data.pairs.empty()) throw ConfigError("train_dpo: dataset is empty");
  init.validate();
  ref.validate();

  const std::size_t n = data.pairs.size();
  // The reference is frozen, so its log-probs are computed once.
  std::vector<RefLogProbs> ref_lp(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = data.pairs[i];
    ref_lp[i] = {log_prob(ref, p.prompt, p.chosen, cfg.max_len),
                 log_prob(ref, p.prompt, p.rejected, cfg.max_len)};
  }

  DpoResult res{init, {}, {}};
  auto& theta = res.params;
  Gradient grad(theta.weights.rows(), theta.weights.cols());
  std::vector<std::size_t> order(n);
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rng = make_engine(cfg.seed, {kShuffleStream, epoch});
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_loss = 0.0, epoch_margin = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size, ++step) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      const double inv = 1.0 / static_cast<double>(end - start);
      grad.fill(0.0);
      double batch_loss = 0.0, batch_margin = 0.0;
      for (std::size_t b = start; b < end; ++b) {
        const auto& pair = data.pairs[order[b]];
        const auto& r = ref_lp[order[b]];
        const double lc = log_prob(theta, pair.prompt, pair.chosen, cfg.max_len);
        const double lr = log_prob(theta, pair.prompt, pair.rejected, cfg.max_len);
        const double z = cfg.beta * ((lc - r.chosen) - (lr - r.rejected));
        const double loss = softplus(-z);
        if (!std::isfinite(loss)) throw TrainingAborted("train_dpo: non-finite loss", step);
        batch_loss += loss;
        batch_margin += z;
        const double coef = -cfg.beta * sigmoid(-z) * inv;
        accumulate_grad_log_prob(theta, pair.prompt, pair.chosen, coef, grad, cfg.max_len);
        accumulate_grad_log_prob(theta, pair.prompt, pair.rejected, -coef, grad, cfg.max_len);
      }
      if (cfg.learning_rate != 0.0) theta.weights.axpy(-cfg.learning_rate, grad);
      if (!theta.weights.all_finite()) throw TrainingAborted("train_dpo: non-finite update", step);

      res.history.steps.push_back(
          {epoch, step, batch_loss * inv, batch_margin * inv, grad.norm()});
      epoch_loss += batch_loss;
      epoch_margin += batch_margin;
    }
    res.history.epochs.push_back(
        {epoch, epoch_loss / static_cast<double>(n), epoch_margin / static_cast<double>(n)});
    res.epoch_snapshots.push_back(theta);
  }
  return res;
}

}  // namespace mlpo
