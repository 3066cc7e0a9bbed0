#include "mlpo/mixtures.hpp"

#include <algorithm>
#include <set>
#include <thread>

namespace mlpo {

namespace {
constexpr std::uint64_t kPairStream = 11;
}

void validate_mixture(const MixtureSpec& spec) {
  if (spec.languages.empty()) throw ConfigError("mixture '" + spec.name + "' has no languages");
  std::set<LanguageId> seen(spec.languages.begin(), spec.languages.end());
  if (seen.size() != spec.languages.size()) {
    throw ConfigError("mixture '" + spec.name + "' lists a language twice");
  }
  const bool positive = std::visit([](const auto& m) {
    if constexpr (std::is_same_v<std::decay_t<decltype(m)>, FixedTotal>) return m.total > 0;
    else return m.count > 0;
  }, spec.mode);
  if (!positive) throw ConfigError("mixture '" + spec.name + "' has an empty budget");
}

std::size_t mixture_total(const MixtureSpec& spec) {
  if (const auto* fixed = std::get_if<FixedTotal>(&spec.mode)) return fixed->total;
  return std::get<PerLanguage>(spec.mode).count * spec.languages.size();
}

std::map<LanguageId, std::size_t> allocate(const MixtureSpec& spec) {
  validate_mixture(spec);
  std::map<LanguageId, std::size_t> out;
  if (const auto* fixed = std::get_if<FixedTotal>(&spec.mode)) {
    const std::size_t n = spec.languages.size();
    const std::size_t base = fixed->total / n;
    const std::size_t rem = fixed->total % n;
    for (std::size_t i = 0; i < n; ++i) out[spec.languages[i]] = base + (i < rem ? 1 : 0);
  } else {
    for (auto lang : spec.languages) out[lang] = std::get<PerLanguage>(spec.mode).count;
  }
  return out;
}

Dataset build_dataset(const MixtureSpec& spec, const Environment& env,
                      const TranslationChannel& channel, const RewardSpec& reward,
                      const DataGenConfig& cfg, unsigned jobs) {
  cfg.validate();
  channel.validate();
  for (auto lang : spec.languages) {
    if (lang.id >= env.num_languages()) {
      throw ConfigError("mixture '" + spec.name + "' references unknown language " + lang.name());
    }
  }
  const auto counts = allocate(spec);

  std::vector<std::vector<PreferencePair>> per_lang(spec.languages.size());
  auto work = [&](std::size_t li) {
    const LanguageId lang = spec.languages[li];
    const auto prompts = gen_prompts(env, lang, counts.at(lang), cfg);
    auto& out = per_lang[li];
    out.reserve(prompts.size());
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      auto rng = make_engine(cfg.seed, {kPairStream, lang.id, i});
      out.push_back(build_pair(env, channel, reward, prompts[i], cfg, rng));
    }
  };

  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(spec.languages.size())));
  if (jobs == 1) {
    for (std::size_t li = 0; li < spec.languages.size(); ++li) work(li);
  } else {
    std::vector<std::jthread> workers;
    for (unsigned w = 0; w < jobs; ++w) {
      workers.emplace_back([&, w] {
        for (std::size_t li = w; li < spec.languages.size(); li += jobs) work(li);
      });
    }
  }

  Dataset ds;
  ds.mixture = spec;
  ds.seed = cfg.seed;
  for (auto& v : per_lang) {
    ds.pairs.insert(ds.pairs.end(), std::make_move_iterator(v.begin()),
                    std::make_move_iterator(v.end()));
  }
  return ds;
}

std::pair<std::vector<LanguageId>, std::vector<LanguageId>> split_seen_unseen(
    const std::vector<LanguageId>& all_languages, const MixtureSpec& spec) {
  std::set<LanguageId> in_spec(spec.languages.begin(), spec.languages.end());
  std::vector<LanguageId> seen, unseen;
  for (auto lang : all_languages) (in_spec.contains(lang) ? seen : unseen).push_back(lang);
  return {seen, unseen};
}

MixtureSpec mixture_preset(const std::string& name, std::uint32_t num_languages) {
  auto first_n = [](std::uint32_t n) {
    std::vector<LanguageId> out;
    for (std::uint32_t i = 0; i < n; ++i) out.push_back(LanguageId{i});
    return out;
  };
  if (name == "en-1") return {name, first_n(1), FixedTotal{kDeskFixedTotal}};
  if (name == "ml-5") {
    if (num_languages < 5) throw ConfigError("preset ml-5 needs at least 5 languages");
    return {name, first_n(5), FixedTotal{kDeskFixedTotal}};
  }
  if (name == "ml-all-fixed") return {name, first_n(num_languages), FixedTotal{kDeskFixedTotal}};
  if (name == "ml-all-per-lang") {
    const std::size_t per = std::max<std::size_t>(1, kDeskPerLanguageTotal / num_languages);
    return {name, first_n(num_languages), PerLanguage{per}};
  }
  throw ConfigError("unknown mixture preset '" + name + "'");
}

std::vector<std::string> mixture_preset_names() {
  return {"en-1", "ml-5", "ml-all-fixed", "ml-all-per-lang"};
}

}  // namespace mlpo
