#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mlpo/policy.hpp"
#include "mlpo/reward.hpp"
#include "mlpo/rng.hpp"
#include "mlpo/types.hpp"

namespace mlpo {

struct LanguageProfile {
  LanguageId lang;
  std::vector<Token> preferred_tokens;  // sorted
  std::vector<Token> marker_tokens;     // sorted
  PolicyParams generator;               // ground-truth in-language generator
  double generator_strength = 0.0;      // logit of the language's own preferred tokens in its generator
};

struct EnvironmentConfig {
  std::uint32_t num_languages = 10;
  std::uint32_t vocab_size = 64;
  double universal_fraction = 0.5;
  std::uint64_t seed = 1;

  bool operator==(const EnvironmentConfig&) const = default;
};

// The synthetic multilingual world: per-language token regimes sharing a
// universal token subset, and one neutral token that a flawed reward can pay for.
struct Environment {
  VocabSpec vocab;
  std::vector<LanguageProfile> profiles;
  std::vector<Token> universal_tokens;  // sorted
  Token exploit_token = 0;
  double universal_fraction = 0.5;
  std::uint64_t seed = 0;

  std::uint32_t num_languages() const { return static_cast<std::uint32_t>(profiles.size()); }
  std::vector<LanguageId> languages() const;
  const LanguageProfile& profile(LanguageId lang) const;
  const LanguageProfile& pivot() const { return profiles.front(); }

  Lexicon lexicon() const;
};

Environment make_environment(std::uint32_t num_languages, VocabSpec vocab,
                             double universal_fraction, std::uint64_t seed);
Environment make_environment(const EnvironmentConfig& cfg);

struct TranslationChannel {
  double marker_rate = 0.2;  // per-token substitution probability
  LanguageId pivot = kPivotLanguage;

  void validate() const;
  bool operator==(const TranslationChannel&) const = default;
};

struct DataGenConfig {
  std::size_t prompt_len = 4;
  std::size_t completion_len = kDefaultMaxLen;
  std::uint64_t seed = 7;
  double tie_epsilon = 1e-9;

  void validate() const;
  bool operator==(const DataGenConfig&) const = default;
};

// Prompts are pivot-generator draws retagged to `lang`; prompt i depends only on
// (cfg.seed, first_index + i), so every language sees the same token sequences.
std::vector<Prompt> gen_prompts(const Environment& env, LanguageId lang, std::size_t n,
                                const DataGenConfig& cfg, std::size_t first_index = 0);

// One prompt from the pivot generator with eos masked out.
Prompt sample_prompt(const Environment& env, LanguageId lang, std::size_t length, Engine& rng);

// In-language completion from the profile's generator at temperature 1.
Completion gen_direct(const LanguageProfile& profile, const Prompt& prompt,
                      const DataGenConfig& cfg, Engine& rng);

// Pivot-generator completion retagged to the prompt's language, with each
// content token independently replaced by a random target-language marker
// with probability marker_rate. Always consumes the same number of draws for a
// given pivot sample, so raising marker_rate only adds markers.
Completion gen_translated(const Environment& env, const TranslationChannel& channel,
                          const Prompt& prompt, const DataGenConfig& cfg, Engine& rng);

// Draws one direct and one translated completion and ranks them with `reward`.
// Ties (gap below cfg.tie_epsilon) go to the direct completion.
PreferencePair build_pair(const Environment& env, const TranslationChannel& channel,
                          const RewardSpec& reward, const Prompt& prompt,
                          const DataGenConfig& cfg, Engine& rng);

// The labeler strictly preferred the direct completion; ties do not count.
bool translated_rejected(const PreferencePair& pair, double tie_epsilon);

// Fraction of n_pairs seeded pairs (languages round-robin) in which the
// translated completion is strictly rejected. `stream` selects an independent
// sample of pairs.
double measure_rejected_fraction(const Environment& env, const TranslationChannel& channel,
                                 const RewardSpec& reward, const DataGenConfig& cfg,
                                 std::size_t n_pairs, std::uint64_t stream = 0);

struct CalibrationResult {
  double marker_rate = 0.0;
  double rejected_fraction = 0.0;  // measured at marker_rate on the probe sample
  int probes = 0;
  bool endpoint = false;  // target unreachable; marker_rate is the nearest endpoint
};

inline constexpr double kPaperRejectedFraction = 0.91;

CalibrationResult calibrate_marker_rate(const Environment& env, const RewardSpec& reward,
                                        double target_reject_fraction, const DataGenConfig& cfg,
                                        std::size_t probe_pairs = 5000);

}  // namespace mlpo
