#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "mlpo/types.hpp"

namespace mlpo {

enum class TokenRole : std::uint8_t { Neutral, Preferred, Marker };

// Per-language token roles, plus the one token the exploit bonus pays for.
class Lexicon {
 public:
  Lexicon(VocabSpec vocab, std::uint32_t num_languages);

  void set_role(LanguageId lang, Token token, TokenRole role);
  TokenRole role(LanguageId lang, Token token) const;

  void set_exploit_token(Token token) { exploit_token_ = token; }
  std::optional<Token> exploit_token() const { return exploit_token_; }

  const VocabSpec& vocab() const { return vocab_; }
  std::uint32_t num_languages() const { return num_languages_; }

  bool operator==(const Lexicon&) const = default;

 private:
  VocabSpec vocab_;
  std::uint32_t num_languages_;
  std::vector<TokenRole> roles_;  // [lang * V + token]
  std::optional<Token> exploit_token_;
};

// The scalar knobs of a reward function; this is what the experiment config stores.
struct RewardWeights {
  double in_language_weight = 1.0;
  double marker_penalty = 2.0;                 // lambda, >= 0
  std::optional<std::uint32_t> length_target;  // content tokens
  double length_weight = 0.0;                  // quadratic penalty weight
  double exploit_bonus = 0.0;                  // paid per exploit-token occurrence

  void validate() const;
  bool operator==(const RewardWeights&) const = default;
};

struct RewardSpec {
  RewardWeights weights;
  std::shared_ptr<const Lexicon> lexicon;

  RewardSpec with_weights(const RewardWeights& w) const { return {w, lexicon}; }
};

RewardSpec make_reward(const RewardWeights& weights, Lexicon lexicon);

//   w_in * frac(preferred) - lambda * frac(marker)
//     - length_weight * (n - length_target)^2 + exploit_bonus * count(exploit)
// Fractions are over the n non-eos tokens and are zero when n == 0.
double score(const RewardSpec& spec, const Prompt& prompt, const Completion& y);

// Bradley-Terry preference probability sigma(r1 - r2).
double bt_prob(double r1, double r2);

enum class Verdict { FirstWins, SecondWins, Tie };

Verdict mirror(Verdict v);

// Tie iff |score(y1) - score(y2)| < tie_epsilon (equal scores always tie).
Verdict label(const RewardSpec& spec, const Prompt& prompt, const Completion& y1,
              const Completion& y2, double tie_epsilon);

// R - beta * (logp - logp_ref).
double shaped_reward(double reward, double logp, double logp_ref, double beta);

}  // namespace mlpo
