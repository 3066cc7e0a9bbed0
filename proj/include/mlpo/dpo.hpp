#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mlpo/policy.hpp"
#include "mlpo/types.hpp"

namespace mlpo {

struct DpoConfig {
  double beta = 0.5;
  double learning_rate = 1e-2;
  std::size_t epochs = 2;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  std::size_t max_len = kDefaultMaxLen;

  void validate() const;
  bool operator==(const DpoConfig&) const = default;
};

// Numerically stable log(1 + e^x).
double softplus(double x);

// z = beta * [(logp(y+) - logp_ref(y+)) - (logp(y-) - logp_ref(y-))]
double dpo_logit(const PolicyParams& theta, const PolicyParams& ref, const PreferencePair& pair,
                 double beta, std::size_t max_len = kDefaultMaxLen);

// -log sigma(z), evaluated as softplus(-z).
double dpo_loss(const PolicyParams& theta, const PolicyParams& ref, const PreferencePair& pair,
                double beta, std::size_t max_len = kDefaultMaxLen);

// -beta * sigma(-z) * [grad logp(y+) - grad logp(y-)]
Gradient dpo_grad(const PolicyParams& theta, const PolicyParams& ref, const PreferencePair& pair,
                  double beta, std::size_t max_len = kDefaultMaxLen);

struct DpoStepRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double mean_loss = 0.0;
  double mean_margin = 0.0;  // implicit reward margin, i.e. mean z
  double grad_norm = 0.0;
};

struct DpoEpochSummary {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double mean_margin = 0.0;
};

struct DpoHistory {
  std::vector<DpoStepRecord> steps;
  std::vector<DpoEpochSummary> epochs;
};

struct DpoResult {
  PolicyParams params;
  DpoHistory history;
  std::vector<PolicyParams> epoch_snapshots;  // params after each epoch
};

// Minibatch gradient descent on the mean DPO loss. Batch order is a shuffle
// keyed by (seed, epoch). Throws TrainingAborted on a non-finite loss.
DpoResult train_dpo(const PolicyParams& init, const PolicyParams& ref, const Dataset& data,
                    const DpoConfig& cfg);

}  // namespace mlpo
