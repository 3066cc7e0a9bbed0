#include "mlpo/synthlang.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace mlpo {

namespace {

constexpr std::size_t kMarkersPerLanguage = 2;
constexpr std::size_t kMinPreferred = 4;
constexpr std::size_t kMaxPreferred = 8;

// Generator shape. The pivot generator is the strongest; other languages get a
// weaker in-language preference, so direct completions there are lower quality
// than translations of pivot completions before translationese is applied.
constexpr double kPivotStrength = 4.0;
constexpr double kMinStrength = 1.6;
constexpr double kMaxStrength = 2.6;
constexpr double kMarkerLogit = -4.0;
constexpr double kEosLogit = -3.0;
constexpr double kTransitionNoise = 0.3;

// Stream tags for SeedPath.
enum : std::uint64_t {
  kLayoutStream = 1,
  kGeneratorStream = 2,
  kPromptStream = 3,
  kCalibrationStream = 4,
};

std::size_t neutral_reserve(std::uint32_t vocab_size) {
  return std::max<std::size_t>(1, (vocab_size - 1) / 6);
}

Token draw(const std::vector<double>& probs, Engine& rng) {
  std::discrete_distribution<Token> dist(probs.begin(), probs.end());
  return dist(rng);
}

}  // namespace

std::vector<LanguageId> Environment::languages() const {
  std::vector<LanguageId> out;
  for (const auto& p : profiles) out.push_back(p.lang);
  return out;
}

const LanguageProfile& Environment::profile(LanguageId lang) const {
  if (lang.id >= profiles.size()) {
    throw RegistryError("environment has no language " + std::to_string(lang.id));
  }
  return profiles[lang.id];
}

Lexicon Environment::lexicon() const {
  Lexicon lex(vocab, num_languages());
  for (const auto& p : profiles) {
    for (Token t : p.preferred_tokens) lex.set_role(p.lang, t, TokenRole::Preferred);
    for (Token t : p.marker_tokens) lex.set_role(p.lang, t, TokenRole::Marker);
  }
  lex.set_exploit_token(exploit_token);
  return lex;
}

Environment make_environment(std::uint32_t num_languages, VocabSpec vocab,
                             double universal_fraction, std::uint64_t seed) {
  if (num_languages < 1) throw ConfigError("environment.num_languages must be >= 1");
  if (!(universal_fraction >= 0.0 && universal_fraction < 1.0)) {
    throw ConfigError("environment.universal_fraction must be in [0, 1)");
  }
  const std::size_t content = vocab.content_size();
  const std::size_t reserve = neutral_reserve(vocab.size);

  // Largest preferred-set size that fits K languages plus the neutral reserve.
  std::size_t preferred = 0, universal = 0;
  for (std::size_t p = kMaxPreferred; p >= kMinPreferred; --p) {
    const auto u = static_cast<std::size_t>(std::lround(universal_fraction * static_cast<double>(p)));
    const std::size_t s = p - u;
    if (s == 0) continue;
    if (u + num_languages * (s + kMarkersPerLanguage) + reserve <= content) {
      preferred = p;
      universal = u;
      break;
    }
  }
  if (preferred == 0) {
    throw ConfigError("environment: vocab of " + std::to_string(vocab.size) +
                      " tokens is too small for " + std::to_string(num_languages) + " languages");
  }
  const std::size_t specific = preferred - universal;

  std::vector<Token> pool(content);
  std::iota(pool.begin(), pool.end(), Token{0});
  auto layout_rng = make_engine(seed, {kLayoutStream});
  std::shuffle(pool.begin(), pool.end(), layout_rng);

  auto next = pool.begin();
  auto take = [&](std::size_t n) {
    std::vector<Token> out(next, next + static_cast<std::ptrdiff_t>(n));
    next += static_cast<std::ptrdiff_t>(n);
    return out;
  };

  Environment env;
  env.vocab = vocab;
  env.universal_fraction = universal_fraction;
  env.seed = seed;
  env.universal_tokens = take(universal);
  std::vector<std::vector<Token>> specifics, markers;
  for (std::uint32_t k = 0; k < num_languages; ++k) specifics.push_back(take(specific));
  for (std::uint32_t k = 0; k < num_languages; ++k) markers.push_back(take(kMarkersPerLanguage));
  env.exploit_token = *next;
  std::sort(env.universal_tokens.begin(), env.universal_tokens.end());

  for (std::uint32_t k = 0; k < num_languages; ++k) {
    LanguageProfile prof;
    prof.lang = LanguageId{k};
    prof.preferred_tokens = env.universal_tokens;
    prof.preferred_tokens.insert(prof.preferred_tokens.end(), specifics[k].begin(),
                                 specifics[k].end());
    std::sort(prof.preferred_tokens.begin(), prof.preferred_tokens.end());
    prof.marker_tokens = markers[k];
    std::sort(prof.marker_tokens.begin(), prof.marker_tokens.end());

    auto gen_rng = make_engine(seed, {kGeneratorStream, k});
    prof.generator_strength =
        k == 0 ? kPivotStrength
               : std::uniform_real_distribution<double>(kMinStrength, kMaxStrength)(gen_rng);
    prof.generator = PolicyParams::zeros(vocab, num_languages);
    auto& w = prof.generator.weights;
    const std::size_t bias = prof.generator.bias_row();
    // Universal tokens are equally fluent everywhere; only the language's own
    // tokens carry its (weaker) strength.
    for (Token t : specifics[k]) w(bias, t) = prof.generator_strength;
    for (Token t : env.universal_tokens) w(bias, t) = kPivotStrength;
    for (Token t : prof.marker_tokens) w(bias, t) = kMarkerLogit;
    w(bias, vocab.eos()) = kEosLogit;
    std::normal_distribution<double> noise(0.0, kTransitionNoise);
    for (Token prev = 0; prev < vocab.size; ++prev) {
      for (Token v = 0; v < vocab.eos(); ++v) w(prof.generator.prev_row(prev), v) = noise(gen_rng);
    }
    env.profiles.push_back(std::move(prof));
  }
  return env;
}

Environment make_environment(const EnvironmentConfig& cfg) {
  return make_environment(cfg.num_languages, VocabSpec::make(cfg.vocab_size),
                          cfg.universal_fraction, cfg.seed);
}

void TranslationChannel::validate() const {
  if (!(marker_rate >= 0.0 && marker_rate <= 1.0)) {
    throw ConfigError("translation marker_rate must be in [0, 1]");
  }
}

void DataGenConfig::validate() const {
  if (prompt_len < 1 || prompt_len > kDefaultMaxPromptLen) {
    throw ConfigError("data.prompt_len must be in [1, " + std::to_string(kDefaultMaxPromptLen) + "]");
  }
  if (completion_len < 1 || completion_len > kDefaultMaxLen) {
    throw ConfigError("data.completion_len must be in [1, " + std::to_string(kDefaultMaxLen) + "]");
  }
  if (!(tie_epsilon >= 0.0)) throw ConfigError("data.tie_epsilon must be >= 0");
}

Prompt sample_prompt(const Environment& env, LanguageId lang, std::size_t length, Engine& rng) {
  const auto& gen = env.pivot().generator;
  Prompt prompt{{}, lang};
  Token prev = env.vocab.eos();
  for (std::size_t i = 0; i < length; ++i) {
    auto z = logits(gen, prev, kPivotLanguage);
    z[env.vocab.eos()] = -std::numeric_limits<double>::infinity();
    const Token t = draw(softmax(z), rng);
    prompt.tokens.push_back(t);
    prev = t;
  }
  return prompt;
}

std::vector<Prompt> gen_prompts(const Environment& env, LanguageId lang, std::size_t n,
                                const DataGenConfig& cfg, std::size_t first_index) {
  env.profile(lang);
  std::vector<Prompt> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto rng = make_engine(cfg.seed, {kPromptStream, first_index + i});
    out.push_back(sample_prompt(env, lang, cfg.prompt_len, rng));
  }
  return out;
}

Completion gen_direct(const LanguageProfile& profile, const Prompt& prompt,
                      const DataGenConfig& cfg, Engine& rng) {
  if (prompt.lang != profile.lang) {
    throw ConfigError("gen_direct: prompt language " + prompt.lang.name() +
                      " does not match profile " + profile.lang.name());
  }
  return sample(profile.generator, prompt, SamplingConfig{1.0, cfg.completion_len, 0}, rng);
}

Completion gen_translated(const Environment& env, const TranslationChannel& channel,
                          const Prompt& prompt, const DataGenConfig& cfg, Engine& rng) {
  channel.validate();
  const auto& target = env.profile(prompt.lang);
  const auto& pivot = env.profile(channel.pivot);
  Prompt pivot_prompt{prompt.tokens, channel.pivot};
  Completion out = sample(pivot.generator, pivot_prompt, SamplingConfig{1.0, cfg.completion_len, 0}, rng);
  out.lang = prompt.lang;

  std::uniform_int_distribution<std::size_t> pick(0, target.marker_tokens.size() - 1);
  for (auto& t : out.tokens) {
    if (t == env.vocab.eos()) continue;
    const double u = uniform01(rng);
    const Token marker = target.marker_tokens[pick(rng)];
    if (u < channel.marker_rate) t = marker;
  }
  return out;
}

PreferencePair build_pair(const Environment& env, const TranslationChannel& channel,
                          const RewardSpec& reward, const Prompt& prompt,
                          const DataGenConfig& cfg, Engine& rng) {
  const auto& profile = env.profile(prompt.lang);
  Completion direct = gen_direct(profile, prompt, cfg, rng);
  Completion translated = gen_translated(env, channel, prompt, cfg, rng);
  for (int redraw = 0; redraw < 8 && translated.tokens == direct.tokens; ++redraw) {
    translated = gen_translated(env, channel, prompt, cfg, rng);
  }
  if (translated.tokens == direct.tokens) {
    // Deterministic fallback: put a marker that differs from the current token
    // in the first slot.
    const auto& markers = profile.marker_tokens;
    if (translated.content_length() == 0) {
      translated.tokens.insert(translated.tokens.begin(), markers.front());
    } else {
      translated.tokens[0] = translated.tokens[0] == markers.front() ? markers.back() : markers.front();
    }
  }

  const double s_direct = score(reward, prompt, direct);
  const double s_translated = score(reward, prompt, translated);
  const double gap = std::abs(s_direct - s_translated);
  const bool direct_wins = gap < cfg.tie_epsilon || s_direct >= s_translated;

  PreferencePair pair;
  pair.prompt = prompt;
  pair.labeler_margin = gap;
  if (direct_wins) {
    pair.chosen = std::move(direct);
    pair.rejected = std::move(translated);
    pair.channel_chosen = Channel::Direct;
    pair.channel_rejected = Channel::Translated;
  } else {
    pair.chosen = std::move(translated);
    pair.rejected = std::move(direct);
    pair.channel_chosen = Channel::Translated;
    pair.channel_rejected = Channel::Direct;
  }
  return pair;
}

bool translated_rejected(const PreferencePair& pair, double tie_epsilon) {
  return pair.channel_rejected == Channel::Translated && pair.labeler_margin > 0.0 &&
         pair.labeler_margin >= tie_epsilon;
}

double measure_rejected_fraction(const Environment& env, const TranslationChannel& channel,
                                 const RewardSpec& reward, const DataGenConfig& cfg,
                                 std::size_t n_pairs, std::uint64_t stream) {
  if (n_pairs == 0) return 0.0;
  const std::uint32_t k = env.num_languages();
  std::size_t rejected = 0;
  for (std::size_t i = 0; i < n_pairs; ++i) {
    auto rng = make_engine(cfg.seed, {kCalibrationStream, stream, i});
    const LanguageId lang{static_cast<std::uint32_t>(i % k)};
    const Prompt prompt = sample_prompt(env, lang, cfg.prompt_len, rng);
    if (translated_rejected(build_pair(env, channel, reward, prompt, cfg, rng), cfg.tie_epsilon)) {
      ++rejected;
    }
  }
  return static_cast<double>(rejected) / static_cast<double>(n_pairs);
}

CalibrationResult calibrate_marker_rate(const Environment& env, const RewardSpec& reward,
                                        double target, const DataGenConfig& cfg,
                                        std::size_t probe_pairs) {
  if (!(target > 0.0 && target < 1.0)) throw ConfigError("calibration target must be in (0, 1)");
  constexpr double kTolerance = 0.01;
  constexpr int kMaxProbes = 20;

  CalibrationResult res;
  auto probe = [&](double rate) {
    ++res.probes;
    return measure_rejected_fraction(env, TranslationChannel{rate, kPivotLanguage}, reward, cfg,
                                     probe_pairs);
  };

  const double f_lo = probe(0.0);
  if (target <= f_lo + kTolerance) {
    res = {0.0, f_lo, res.probes, target < f_lo - kTolerance};
    return res;
  }
  const double f_hi = probe(1.0);
  if (target >= f_hi - kTolerance) {
    res = {1.0, f_hi, res.probes, target > f_hi + kTolerance};
    return res;
  }

  double lo = 0.0, hi = 1.0;
  double best_rate = 1.0, best_f = f_hi;
  while (res.probes < kMaxProbes) {
    const double mid = 0.5 * (lo + hi);
    const double f = probe(mid);
    if (std::abs(f - target) < std::abs(best_f - target)) {
      best_rate = mid;
      best_f = f;
    }
    if (std::abs(f - target) <= kTolerance) break;
    (f < target ? lo : hi) = mid;
  }
  res.marker_rate = best_rate;
  res.rejected_fraction = best_f;
  return res;
}

}  // namespace mlpo
