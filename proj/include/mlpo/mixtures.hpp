#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mlpo/reward.hpp"
#include "mlpo/synthlang.hpp"
#include "mlpo/types.hpp"

namespace mlpo {

// Checks languages are non-empty and unique, and the budget is positive.
void validate_mixture(const MixtureSpec& spec);

std::size_t mixture_total(const MixtureSpec& spec);

// FixedTotal: floor(total / |L|) each, the remainder as +1 to the earliest-listed
// languages. PerLanguage: count each.
std::map<LanguageId, std::size_t> allocate(const MixtureSpec& spec);

// Preference pairs per language per allocate(spec). Pair i of language l uses
// prompt index i (shared pivot prompts) and a pair stream keyed by (l, i), so
// the result does not depend on `jobs`.
Dataset build_dataset(const MixtureSpec& spec, const Environment& env,
                      const TranslationChannel& channel, const RewardSpec& reward,
                      const DataGenConfig& cfg, unsigned jobs = 1);

// Partition of all_languages by membership in spec, order preserved.
std::pair<std::vector<LanguageId>, std::vector<LanguageId>> split_seen_unseen(
    const std::vector<LanguageId>& all_languages, const MixtureSpec& spec);

inline constexpr std::size_t kDeskFixedTotal = 500;
inline constexpr std::size_t kDeskPerLanguageTotal = 2300;
inline constexpr std::size_t kPaperFixedTotal = 50000;
inline constexpr std::size_t kPaperPerLanguage = 10000;

// Named recipes over a K-language environment: "en-1", "ml-5", "ml-all-fixed",
// "ml-all-per-lang". Throws ConfigError for unknown names.
MixtureSpec mixture_preset(const std::string& name, std::uint32_t num_languages);

std::vector<std::string> mixture_preset_names();

}  // namespace mlpo
