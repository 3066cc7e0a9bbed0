#include "mlpo/reward.hpp"

#include <cmath>

namespace mlpo {

Lexicon::Lexicon(VocabSpec vocab, std::uint32_t num_languages)
    : vocab_(vocab),
      num_languages_(num_languages),
      roles_(static_cast<std::size_t>(vocab.size) * num_languages, TokenRole::Neutral) {}

void Lexicon::set_role(LanguageId lang, Token token, TokenRole role) {
  if (lang.id >= num_languages_) throw RegistryError("lexicon: language out of range");
  if (token >= vocab_.size) throw ConfigError("lexicon: token out of range");
  roles_[static_cast<std::size_t>(lang.id) * vocab_.size + token] = role;
}

TokenRole Lexicon::role(LanguageId lang, Token token) const {
  if (lang.id >= num_languages_) throw RegistryError("lexicon: language out of range");
  return roles_[static_cast<std::size_t>(lang.id) * vocab_.size + token];
}

void RewardWeights::validate() const {
  if (!(marker_penalty >= 0.0)) throw ConfigError("reward.marker_penalty must be >= 0");
  if (length_target && *length_target == 0) throw ConfigError("reward.length_target must be positive");
  if (!std::isfinite(in_language_weight) || !std::isfinite(length_weight) ||
      !std::isfinite(exploit_bonus)) {
    throw ConfigError("reward weights must be finite");
  }
}

RewardSpec make_reward(const RewardWeights& weights, Lexicon lexicon) {
  weights.validate();
  return {weights, std::make_shared<const Lexicon>(std::move(lexicon))};
}

double score(const RewardSpec& spec, const Prompt& prompt, const Completion& y) {
  const auto& lex = *spec.lexicon;
  const auto& w = spec.weights;
  const Token eos = lex.vocab().eos();
  std::size_t n = 0, preferred = 0, markers = 0, exploits = 0;
  for (Token t : y.tokens) {
    if (t == eos) continue;
    ++n;
    switch (lex.role(prompt.lang, t)) {
      case TokenRole::Preferred: ++preferred; break;
      case TokenRole::Marker: ++markers; break;
      case TokenRole::Neutral: break;
    }
    if (lex.exploit_token() && t == *lex.exploit_token()) ++exploits;
  }
  double r = 0.0;
  if (n > 0) {
    const double dn = static_cast<double>(n);
    r += w.in_language_weight * static_cast<double>(preferred) / dn;
    r -= w.marker_penalty * static_cast<double>(markers) / dn;
  }
  if (w.length_target) {
    const double d = static_cast<double>(n) - static_cast<double>(*w.length_target);
    r -= w.length_weight * d * d;
  }
  r += w.exploit_bonus * static_cast<double>(exploits);
  return r;
}

double bt_prob(double r1, double r2) {
  const double d = r1 - r2;
  // Split by sign so exp never overflows.
  if (d >= 0) return 1.0 / (1.0 + std::exp(-d));
  const double e = std::exp(d);
  return e / (1.0 + e);
}

Verdict mirror(Verdict v) {
  switch (v) {
    case Verdict::FirstWins: return Verdict::SecondWins;
    case Verdict::SecondWins: return Verdict::FirstWins;
    case Verdict::Tie: return Verdict::Tie;
  }
  return Verdict::Tie;
}

Verdict label(const RewardSpec& spec, const Prompt& prompt, const Completion& y1,
              const Completion& y2, double tie_epsilon) {
  const double s1 = score(spec, prompt, y1);
  const double s2 = score(spec, prompt, y2);
  if (s1 == s2 || std::abs(s1 - s2) < tie_epsilon) return Verdict::Tie;
  return s1 > s2 ? Verdict::FirstWins : Verdict::SecondWins;
}

double shaped_reward(double reward, double logp, double logp_ref, double beta) {
  return reward - beta * (logp - logp_ref);
}

}  // namespace mlpo
