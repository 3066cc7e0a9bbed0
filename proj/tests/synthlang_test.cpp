#include <algorithm>
#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "mlpo/errors.hpp"
#include "mlpo/rng.hpp"
#include "mlpo/synthlang.hpp"

using namespace mlpo;

namespace {

const Environment& default_env() {
  static const Environment env = make_environment(EnvironmentConfig{});
  return env;
}

const RewardSpec& default_reward() {
  static const RewardSpec r = make_reward({}, default_env().lexicon());
  return r;
}

bool contains(const std::vector<Token>& sorted, Token t) {
  return std::binary_search(sorted.begin(), sorted.end(), t);
}

double marker_frequency(const std::vector<Completion>& ys, const LanguageProfile& prof) {
  std::size_t markers = 0, tokens = 0;
  for (const auto& y : ys) {
    for (std::size_t i = 0; i + 1 < y.tokens.size(); ++i) {
      ++tokens;
      if (contains(prof.marker_tokens, y.tokens[i])) ++markers;
    }
  }
  return static_cast<double>(markers) / static_cast<double>(tokens);
}

}  // namespace

TEST(Environment, SingleLanguage) {
  const auto env = make_environment(1, VocabSpec::make(64), 0.5, 3);
  ASSERT_EQ(env.num_languages(), 1u);
  const auto& prof = env.profile(LanguageId{0});
  std::size_t shared = 0;
  for (Token t : env.universal_tokens) shared += contains(prof.preferred_tokens, t);
  EXPECT_EQ(shared, env.universal_tokens.size());
  EXPECT_DOUBLE_EQ(static_cast<double>(shared) / prof.preferred_tokens.size(), 0.5);
}

TEST(Environment, Deterministic) {
  const auto a = make_environment(5, VocabSpec::make(64), 0.5, 9);
  const auto b = make_environment(5, VocabSpec::make(64), 0.5, 9);
  for (std::uint32_t k = 0; k < 5; ++k) {
    EXPECT_EQ(a.profiles[k].preferred_tokens, b.profiles[k].preferred_tokens);
    EXPECT_EQ(a.profiles[k].marker_tokens, b.profiles[k].marker_tokens);
    EXPECT_EQ(a.profiles[k].generator, b.profiles[k].generator);
  }
  const auto c = make_environment(5, VocabSpec::make(64), 0.5, 10);
  EXPECT_NE(a.universal_tokens, c.universal_tokens);
}

TEST(Environment, DefaultLayout) {
  const auto& env = default_env();
  ASSERT_EQ(env.num_languages(), 10u);
  std::set<std::vector<Token>> distinct;
  std::set<Token> specifics;
  for (const auto& prof : env.profiles) {
    distinct.insert(prof.preferred_tokens);
    EXPECT_GE(prof.preferred_tokens.size(), 4u);
    EXPECT_GE(prof.marker_tokens.size(), 2u);
    std::size_t shared = 0;
    for (Token t : prof.preferred_tokens) {
      EXPECT_FALSE(contains(prof.marker_tokens, t));
      EXPECT_NE(t, env.vocab.eos());
      if (contains(env.universal_tokens, t)) ++shared;
      else EXPECT_TRUE(specifics.insert(t).second) << "specific token shared across languages";
    }
    for (Token t : prof.marker_tokens) EXPECT_NE(t, env.vocab.eos());
    const double overlap = static_cast<double>(shared) / prof.preferred_tokens.size();
    EXPECT_NEAR(overlap, 0.5, 0.05);
  }
  EXPECT_EQ(distinct.size(), 10u);
  for (const auto& prof : env.profiles) {
    EXPECT_FALSE(contains(prof.preferred_tokens, env.exploit_token));
    EXPECT_FALSE(contains(prof.marker_tokens, env.exploit_token));
  }
}

TEST(Environment, TooSmallVocabThrows) {
  EXPECT_THROW(make_environment(10, VocabSpec::make(16), 0.5, 1), ConfigError);
  EXPECT_THROW(make_environment(0, VocabSpec::make(64), 0.5, 1), ConfigError);
  EXPECT_THROW(make_environment(2, VocabSpec::make(64), 1.0, 1), ConfigError);
}

TEST(GenPrompts, EmptyRequest) {
  EXPECT_TRUE(gen_prompts(default_env(), LanguageId{0}, 0, {}).empty());
}

TEST(GenPrompts, PivotSharedAcrossLanguages) {
  const DataGenConfig cfg;
  const auto a = gen_prompts(default_env(), LanguageId{2}, 50, cfg);
  const auto b = gen_prompts(default_env(), LanguageId{7}, 50, cfg);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].tokens, b[i].tokens);
    EXPECT_EQ(a[i].lang, LanguageId{2});
    EXPECT_EQ(b[i].lang, LanguageId{7});
    EXPECT_EQ(a[i].tokens.size(), cfg.prompt_len);
  }
  // Index offsets address the same stream.
  const auto tail = gen_prompts(default_env(), LanguageId{2}, 10, cfg, 40);
  for (std::size_t i = 0; i < tail.size(); ++i) EXPECT_EQ(tail[i], a[40 + i]);
}

TEST(GenPrompts, ConcentratedOnPivotPreferred) {
  const auto& env = default_env();
  const auto prompts = gen_prompts(env, LanguageId{3}, 1000, {});
  std::size_t hits = 0, total = 0;
  for (const auto& p : prompts) {
    for (Token t : p.tokens) {
      ++total;
      hits += contains(env.pivot().preferred_tokens, t);
      EXPECT_NE(t, env.vocab.eos());
    }
  }
  EXPECT_GE(static_cast<double>(hits) / total, 0.8);
}

TEST(GenDirect, FewMarkersAndCorrectTag) {
  const auto& env = default_env();
  const DataGenConfig cfg;
  for (std::uint32_t k : {0u, 4u, 9u}) {
    const auto& prof = env.profile(LanguageId{k});
    const auto prompts = gen_prompts(env, prof.lang, 1, cfg);
    auto rng = make_engine(11, {k});
    std::vector<Completion> ys;
    for (int i = 0; i < 10000; ++i) {
      ys.push_back(gen_direct(prof, prompts[0], cfg, rng));
      ASSERT_EQ(ys.back().lang, prof.lang);
    }
    EXPECT_LT(marker_frequency(ys, prof), 0.02);
  }
}

TEST(GenDirect, DeterministicAndChecksLanguage) {
  const auto& env = default_env();
  const auto& prof = env.profile(LanguageId{1});
  const auto x = gen_prompts(env, prof.lang, 1, {})[0];
  auto r1 = make_engine(5), r2 = make_engine(5);
  EXPECT_EQ(gen_direct(prof, x, {}, r1), gen_direct(prof, x, {}, r2));
  const auto other = gen_prompts(env, LanguageId{2}, 1, {})[0];
  EXPECT_THROW(gen_direct(prof, other, {}, r1), ConfigError);
}

TEST(GenTranslated, RateZeroMatchesPivotDistribution) {
  const auto& env = default_env();
  const DataGenConfig cfg;
  const auto x = gen_prompts(env, LanguageId{5}, 1, cfg)[0];
  Prompt pivot_x = x;
  pivot_x.lang = kPivotLanguage;
  auto rng_t = make_engine(21), rng_d = make_engine(22);
  std::vector<double> ht(env.vocab.size, 0.0), hd(env.vocab.size, 0.0);
  constexpr int n = 20000;
  for (int i = 0; i < n; ++i) {
    const auto t = gen_translated(env, TranslationChannel{0.0, kPivotLanguage}, x, cfg, rng_t);
    const auto d = gen_direct(env.pivot(), pivot_x, cfg, rng_d);
    EXPECT_EQ(t.lang, x.lang);
    ht[t.tokens[0]] += 1.0 / n;
    hd[d.tokens[0]] += 1.0 / n;
  }
  for (std::size_t v = 0; v < ht.size(); ++v) EXPECT_NEAR(ht[v], hd[v], 0.015) << "token " << v;
}

TEST(GenTranslated, RateOneIsAllMarkers) {
  const auto& env = default_env();
  const auto& prof = env.profile(LanguageId{6});
  const auto x = gen_prompts(env, prof.lang, 1, {})[0];
  auto rng = make_engine(23);
  for (int i = 0; i < 500; ++i) {
    const auto y = gen_translated(env, TranslationChannel{1.0, kPivotLanguage}, x, {}, rng);
    for (std::size_t j = 0; j + 1 < y.tokens.size(); ++j)
      EXPECT_TRUE(contains(prof.marker_tokens, y.tokens[j]));
    EXPECT_EQ(y.tokens.back(), env.vocab.eos());
  }
}

TEST(GenTranslated, MarkerRateConcentration) {
  const auto& env = default_env();
  const auto& prof = env.profile(LanguageId{3});
  const auto x = gen_prompts(env, prof.lang, 1, {})[0];
  auto sample_at = [&](double rate) {
    auto rng = make_engine(24);
    std::vector<Completion> ys;
    for (int i = 0; i < 10000; ++i)
      ys.push_back(gen_translated(env, TranslationChannel{rate, kPivotLanguage}, x, {}, rng));
    return marker_frequency(ys, prof);
  };
  const double base = sample_at(0.0);
  EXPECT_NEAR(sample_at(0.3), 0.3 + base, 0.02);
}

TEST(BuildPair, EveryPairValidates) {
  const auto& env = default_env();
  const DataGenConfig cfg;
  const TranslationChannel channel{0.2, kPivotLanguage};
  for (std::uint32_t i = 0; i < 10000; ++i) {
    const LanguageId lang{i % env.num_languages()};
    const auto x = gen_prompts(env, lang, 1, cfg, i)[0];
    auto rng = make_engine(31, {i});
    const auto pair = build_pair(env, channel, default_reward(), x, cfg, rng);
    const auto violations = validate_pair(pair, env.vocab, cfg.completion_len);
    ASSERT_TRUE(violations.empty()) << "pair " << i << ": " << violations.front();
    ASSERT_NE(pair.channel_chosen, pair.channel_rejected);
    ASSERT_GE(pair.labeler_margin, 0.0);
  }
}

TEST(BuildPair, TiesGoToDirect) {
  const auto& env = default_env();
  DataGenConfig cfg;
  cfg.tie_epsilon = 100.0;
  const auto x = gen_prompts(env, LanguageId{4}, 1, cfg)[0];
  auto rng = make_engine(32);
  for (int i = 0; i < 200; ++i) {
    const auto pair = build_pair(env, TranslationChannel{0.5, kPivotLanguage}, default_reward(), x,
                                 cfg, rng);
    EXPECT_EQ(pair.channel_chosen, Channel::Direct);
    EXPECT_LT(pair.labeler_margin, cfg.tie_epsilon);
    EXPECT_FALSE(translated_rejected(pair, cfg.tie_epsilon));
  }
}

TEST(BuildPair, HeavyMarkersAreRejected) {
  const auto& env = default_env();
  const auto x = gen_prompts(env, LanguageId{8}, 1, {})[0];
  auto rng = make_engine(33);
  for (int i = 0; i < 200; ++i) {
    const auto pair = build_pair(env, TranslationChannel{1.0, kPivotLanguage}, default_reward(), x,
                                 {}, rng);
    EXPECT_EQ(pair.channel_chosen, Channel::Direct);
  }
}

TEST(Channel, DirectBeatsTranslatedInEveryLanguage) {
  const auto& env = default_env();
  const DataGenConfig cfg;
  const TranslationChannel channel{0.2, kPivotLanguage};
  constexpr int n = 5000;
  for (auto lang : env.languages()) {
    const auto& prof = env.profile(lang);
    const auto prompts = gen_prompts(env, lang, n, cfg);
    double sd = 0, sd2 = 0, st = 0, st2 = 0;
    for (int i = 0; i < n; ++i) {
      auto rng = make_engine(34, {lang.id, static_cast<std::uint64_t>(i)});
      const double d = score(default_reward(), prompts[i], gen_direct(prof, prompts[i], cfg, rng));
      const double t =
          score(default_reward(), prompts[i], gen_translated(env, channel, prompts[i], cfg, rng));
      sd += d, sd2 += d * d, st += t, st2 += t * t;
    }
    const double md = sd / n, mt = st / n;
    const double se = std::sqrt((sd2 / n - md * md) / n + (st2 / n - mt * mt) / n);
    EXPECT_GT(md - mt, 3.0 * se) << lang.name();
  }
}

TEST(Calibration, HitsTargetOnFreshSample) {
  const auto& env = default_env();
  const DataGenConfig cfg;
  const auto res = calibrate_marker_rate(env, default_reward(), 0.91, cfg);
  EXPECT_FALSE(res.endpoint);
  EXPECT_LE(res.probes, 20);
  EXPECT_NEAR(res.rejected_fraction, 0.91, 0.01 + 1e-12);
  const double fresh = measure_rejected_fraction(
      env, TranslationChannel{res.marker_rate, kPivotLanguage}, default_reward(), cfg, 10000, 99);
  EXPECT_NEAR(fresh, 0.91, 0.03);
}

TEST(Calibration, UnreachableTargetFlagsEndpoint) {
  const auto& env = default_env();
  DataGenConfig cfg;
  cfg.tie_epsilon = 2.0;  // every gap counts as a tie, so nothing is strictly rejected
  RewardWeights weak;
  weak.marker_penalty = 0.0;
  const auto reward = make_reward(weak, env.lexicon());
  const auto res = calibrate_marker_rate(env, reward, 0.999, cfg, 1000);
  EXPECT_TRUE(res.endpoint);
  EXPECT_EQ(res.marker_rate, 1.0);
  EXPECT_THROW(calibrate_marker_rate(env, reward, 1.0, cfg), ConfigError);
}

TEST(Calibration, RejectedFractionMonotoneInRate) {
  const auto& env = default_env();
  const DataGenConfig cfg;
  const double lo = measure_rejected_fraction(env, TranslationChannel{0.2, kPivotLanguage},
                                              default_reward(), cfg, 5000);
  const double hi = measure_rejected_fraction(env, TranslationChannel{0.6, kPivotLanguage},
                                              default_reward(), cfg, 5000);
  EXPECT_GE(hi, lo);
}
