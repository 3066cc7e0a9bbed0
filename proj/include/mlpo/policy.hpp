#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mlpo/rng.hpp"
#include "mlpo/types.hpp"

namespace mlpo {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  // this += scale * other
  void axpy(double scale, const Matrix& other);
  void scale(double factor);
  void fill(double value);

  double max_abs() const;
  double norm() const;
  bool all_finite() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

using Gradient = Matrix;

// Log-linear first-order Markov policy. Feature rows, in order:
//   [0, V)         one-hot previous token; BOS shares the eos row
//   [V, V + K)     one-hot language tag
//   V + K          bias
// logits[v] = W[prev, v] + W[V + lang, v] + W[V + K, v].
struct PolicyParams {
  VocabSpec vocab;
  std::uint32_t num_languages = 0;
  Matrix weights;

  static PolicyParams zeros(VocabSpec vocab, std::uint32_t num_languages);

  std::size_t num_features() const { return vocab.size + num_languages + 1; }
  std::size_t prev_row(Token prev) const { return prev; }
  std::size_t lang_row(LanguageId lang) const { return vocab.size + lang.id; }
  std::size_t bias_row() const { return vocab.size + num_languages; }

  // Throws RegistryError when lang >= K.
  void check_language(LanguageId lang) const;
  // Throws ConfigError unless the shape is (V + K + 1) x V and every entry is finite.
  void validate() const;

  bool operator==(const PolicyParams&) const = default;
};

struct SamplingConfig {
  double temperature = 1.0;
  std::size_t max_len = kDefaultMaxLen;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const SamplingConfig&) const = default;
};

// Below this temperature sampling is greedy (argmax, lowest index on ties).
inline constexpr double kGreedyTemperature = 1e-6;

// Guard on V^max_len for exhaustive enumeration.
inline constexpr double kEnumerationLimit = 1e6;

// The token conditioning the first completion step: the last prompt token, or
// BOS (the eos id) for an empty prompt.
Token context_token(const Prompt& prompt, const VocabSpec& vocab);

std::vector<double> logits(const PolicyParams& params, Token prev, LanguageId lang);

std::vector<double> softmax(std::span<const double> x, double temperature = 1.0);
std::vector<double> log_softmax(std::span<const double> x);
double entropy(std::span<const double> probs);

// log pi(y | x) at temperature 1. Steps past max_len content tokens are forced
// and contribute zero.
double log_prob(const PolicyParams& params, const Prompt& prompt, const Completion& completion,
                std::size_t max_len = kDefaultMaxLen);

Completion sample(const PolicyParams& params, const Prompt& prompt, const SamplingConfig& cfg,
                  Engine& rng);

Gradient grad_log_prob(const PolicyParams& params, const Prompt& prompt,
                       const Completion& completion, std::size_t max_len = kDefaultMaxLen);

// out += scale * grad log pi(y | x). Touches only the rows active along the path.
void accumulate_grad_log_prob(const PolicyParams& params, const Prompt& prompt,
                              const Completion& completion, double scale, Gradient& out,
                              std::size_t max_len = kDefaultMaxLen);

// KL(pi(.|prev, lang) || ref(.|prev, lang)) over the V-way conditional.
double conditional_kl(const PolicyParams& params, const PolicyParams& ref, Token prev,
                      LanguageId lang);

// Per-step conditional KL averaged over the unforced steps of one trajectory.
double trajectory_kl(const PolicyParams& params, const PolicyParams& ref, const Prompt& prompt,
                     const Completion& completion, std::size_t max_len = kDefaultMaxLen);

struct WeightedCompletion {
  Completion completion;
  double probability = 0.0;
};

// Every completion with at most max_len content tokens, with its probability.
// Throws ConfigError when V^max_len exceeds kEnumerationLimit.
std::vector<WeightedCompletion> enumerate_completions(const PolicyParams& params,
                                                      const Prompt& prompt, std::size_t max_len);

}  // namespace mlpo
