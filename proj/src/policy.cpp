#include "mlpo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace mlpo {

void Matrix::axpy(double scale, const Matrix& other) {
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += scale * other.data_[i];
}

void Matrix::scale(double factor) {
  for (auto& x : data_) x *= factor;
}

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

double Matrix::max_abs() const {
  double m = 0.0;
  for (double x : data_) m = std::max(m, std::abs(x));
  return m;
}

double Matrix::norm() const {
  double s = 0.0;
  for (double x : data_) s += x * x;
  return std::sqrt(s);
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

PolicyParams PolicyParams::zeros(VocabSpec vocab, std::uint32_t num_languages) {
  if (num_languages == 0) throw ConfigError("policy needs at least one language");
  PolicyParams p{vocab, num_languages, {}};
  p.weights = Matrix(p.num_features(), vocab.size, 0.0);
  return p;
}

void PolicyParams::check_language(LanguageId lang) const {
  if (lang.id >= num_languages) {
    throw RegistryError("language " + std::to_string(lang.id) + " outside policy with K=" +
                        std::to_string(num_languages));
  }
}

void PolicyParams::validate() const {
  if (weights.rows() != num_features() || weights.cols() != vocab.size) {
    throw ConfigError("policy weights have shape " + std::to_string(weights.rows()) + "x" +
                      std::to_string(weights.cols()) + ", expected " +
                      std::to_string(num_features()) + "x" + std::to_string(vocab.size));
  }
  if (!weights.all_finite()) throw ConfigError("policy weights contain non-finite entries");
}

void SamplingConfig::validate() const {
  if (!(temperature > 0.0)) throw ConfigError("sampling temperature must be positive");
  if (max_len < 1) throw ConfigError("sampling max_len must be at least 1");
}

Token context_token(const Prompt& prompt, const VocabSpec& vocab) {
  return prompt.tokens.empty() ? vocab.eos() : prompt.tokens.back();
}

std::vector<double> logits(const PolicyParams& params, Token prev, LanguageId lang) {
  params.check_language(lang);
  const auto a = params.weights.row(params.prev_row(prev));
  const auto b = params.weights.row(params.lang_row(lang));
  const auto c = params.weights.row(params.bias_row());
  std::vector<double> out(params.vocab.size);
  for (std::size_t v = 0; v < out.size(); ++v) out[v] = a[v] + b[v] + c[v];
  return out;
}

std::vector<double> log_softmax(std::span<const double> x) {
  const double m = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  // Subtract the max first; folding it into the log-sum-exp loses digits when |m| is large.
  const double log_s = std::log(s);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - m) - log_s;
  return out;
}

std::vector<double> softmax(std::span<const double> x, double temperature) {
  std::vector<double> out(x.begin(), x.end());
  for (auto& v : out) v /= temperature;
  const double m = *std::max_element(out.begin(), out.end());
  double s = 0.0;
  for (auto& v : out) s += (v = std::exp(v - m));
  for (auto& v : out) v /= s;
  return out;
}

double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

namespace {

// Calls fn(step, prev, token, forced) for every step of the completion path.
template <typename Fn>
void walk(const PolicyParams& params, const Prompt& prompt, const Completion& completion,
          std::size_t max_len, Fn&& fn) {
  Token prev = context_token(prompt, params.vocab);
  for (std::size_t t = 0; t < completion.tokens.size(); ++t) {
    const Token y = completion.tokens[t];
    fn(t, prev, y, t >= max_len);
    prev = y;
  }
}

}  // namespace

double log_prob(const PolicyParams& params, const Prompt& prompt, const Completion& completion,
                std::size_t max_len) {
  double total = 0.0;
  walk(params, prompt, completion, max_len, [&](std::size_t, Token prev, Token y, bool forced) {
    if (forced) return;
    const auto lp = log_softmax(logits(params, prev, completion.lang));
    total += lp[y];
  });
  return total;
}

Completion sample(const PolicyParams& params, const Prompt& prompt, const SamplingConfig& cfg,
                  Engine& rng) {
  cfg.validate();
  const Token eos = params.vocab.eos();
  Completion out{{}, prompt.lang};
  Token prev = context_token(prompt, params.vocab);
  for (std::size_t t = 0; t < cfg.max_len; ++t) {
    const auto z = logits(params, prev, prompt.lang);
    Token y;
    if (cfg.temperature < kGreedyTemperature) {
      y = static_cast<Token>(std::max_element(z.begin(), z.end()) - z.begin());
    } else {
      const auto p = softmax(z, cfg.temperature);
      std::discrete_distribution<Token> dist(p.begin(), p.end());
      y = dist(rng);
    }
    out.tokens.push_back(y);
    if (y == eos) return out;
    prev = y;
  }
  out.tokens.push_back(eos);
  return out;
}

void accumulate_grad_log_prob(const PolicyParams& params, const Prompt& prompt,
                              const Completion& completion, double scale, Gradient& out,
                              std::size_t max_len) {
  const std::size_t lang_row = params.lang_row(completion.lang);
  const std::size_t bias_row = params.bias_row();
  walk(params, prompt, completion, max_len, [&](std::size_t, Token prev, Token y, bool forced) {
    if (forced) return;
    const auto p = softmax(logits(params, prev, completion.lang));
    const std::size_t active[3] = {params.prev_row(prev), lang_row, bias_row};
    for (std::size_t r : active) {
      auto g = out.row(r);
      for (std::size_t v = 0; v < p.size(); ++v) g[v] -= scale * p[v];
      g[y] += scale;
    }
  });
}

Gradient grad_log_prob(const PolicyParams& params, const Prompt& prompt,
                       const Completion& completion, std::size_t max_len) {
  Gradient g(params.weights.rows(), params.weights.cols());
  accumulate_grad_log_prob(params, prompt, completion, 1.0, g, max_len);
  return g;
}

double conditional_kl(const PolicyParams& params, const PolicyParams& ref, Token prev,
                      LanguageId lang) {
  if (params.vocab != ref.vocab || params.num_languages != ref.num_languages) {
    throw ConfigError("conditional_kl: policies differ in vocab or language count");
  }
  const auto lp = log_softmax(logits(params, prev, lang));
  const auto lq = log_softmax(logits(ref, prev, lang));
  double kl = 0.0;
  for (std::size_t v = 0; v < lp.size(); ++v) {
    const double p = std::exp(lp[v]);
    if (p > 0.0) kl += p * (lp[v] - lq[v]);
  }
  return std::max(kl, 0.0);
}

double trajectory_kl(const PolicyParams& params, const PolicyParams& ref, const Prompt& prompt,
                     const Completion& completion, std::size_t max_len) {
  double total = 0.0;
  std::size_t steps = 0;
  walk(params, prompt, completion, max_len, [&](std::size_t, Token prev, Token, bool forced) {
    if (forced) return;
    total += conditional_kl(params, ref, prev, completion.lang);
    ++steps;
  });
  return steps == 0 ? 0.0 : total / static_cast<double>(steps);
}

std::vector<WeightedCompletion> enumerate_completions(const PolicyParams& params,
                                                      const Prompt& prompt, std::size_t max_len) {
  if (std::pow(static_cast<double>(params.vocab.size), static_cast<double>(max_len)) >
      kEnumerationLimit) {
    throw ConfigError("enumeration refused: V^max_len = " + std::to_string(params.vocab.size) +
                      "^" + std::to_string(max_len) + " exceeds 1e6");
  }
  params.check_language(prompt.lang);
  const Token eos = params.vocab.eos();
  std::vector<WeightedCompletion> out;
  std::vector<Token> path;

  auto recurse = [&](auto& self, Token prev, double logp) -> void {
    if (path.size() == max_len) {
      path.push_back(eos);
      out.push_back({Completion{path, prompt.lang}, std::exp(logp)});
      path.pop_back();
      return;
    }
    const auto lp = log_softmax(logits(params, prev, prompt.lang));
    path.push_back(eos);
    out.push_back({Completion{path, prompt.lang}, std::exp(logp + lp[eos])});
    path.pop_back();
    for (Token v = 0; v < eos; ++v) {
      path.push_back(v);
      self(self, v, logp + lp[v]);
      path.pop_back();
    }
  };
  recurse(recurse, context_token(prompt, params.vocab), 0.0);
  return out;
}

}  // namespace mlpo
