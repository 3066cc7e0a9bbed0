#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "mlpo/policy.hpp"
#include "mlpo/reward.hpp"
#include "mlpo/rloo.hpp"
#include "mlpo/types.hpp"

namespace mlpo {

// Simulated pairwise judge: scores both completions with `reward` and calls a
// tie when the gap is below tie_epsilon. The order in which the two
// completions are shown is randomized per pair and recorded.
struct JudgeSpec {
  RewardSpec reward;
  double tie_epsilon = 0.05;
  std::uint64_t position_seed = 0;

  void validate() const;
};

enum class JudgeVerdict { AWins, BWins, Tie };

struct JudgeResult {
  JudgeVerdict verdict = JudgeVerdict::Tie;
  bool b_shown_first = false;  // presentation record
};

JudgeResult judge_pair(const JudgeSpec& judge, const Prompt& prompt, const Completion& a,
                       const Completion& b, std::uint64_t presentation_seed);

// Same as judge_pair but with the presentation order forced.
JudgeResult judge_pair_in_order(const JudgeSpec& judge, const Prompt& prompt, const Completion& a,
                                const Completion& b, bool b_shown_first);

double round1(double x);

// Win% - Loss%, rounded to one decimal.
double delta_wl(double win_pct, double loss_pct);

struct WinRateRow {
  std::size_t win = 0;
  std::size_t tie = 0;
  std::size_t loss = 0;
  double win_pct = 0.0;   // one decimal
  double tie_pct = 0.0;
  double loss_pct = 0.0;
  double delta_wl = 0.0;  // from unrounded win/loss, then rounded

  std::size_t total() const { return win + tie + loss; }
};

WinRateRow make_row(std::size_t win, std::size_t tie, std::size_t loss);

struct WinRateReport {
  std::map<LanguageId, WinRateRow> per_language;
  WinRateRow aggregate;  // over every language in per_language
};

// Mean of the per-language percentages over `langs` (the tables' "average over
// languages"); counts are summed.
WinRateRow aggregate_over(const WinRateReport& report, const std::vector<LanguageId>& langs);

// One completion per policy per prompt. Both policies draw from the stream
// keyed by (sampling.seed, language, prompt index), so identical policies give
// identical completions.
WinRateReport win_rate(const PolicyParams& policy_a, const PolicyParams& policy_b,
                       const PromptMixture& prompts, const JudgeSpec& judge,
                       const SamplingConfig& sampling, unsigned jobs = 1);

struct JudgedPair {
  Prompt prompt;
  Completion first;
  Completion second;
};

struct AgreementResult {
  double rate = 0.0;
  double tie_freq_1 = 0.0;
  double tie_freq_2 = 0.0;
  std::size_t pairs = 0;
};

// Fraction of pairs with identical verdicts; a tie agrees only with a tie.
AgreementResult agreement(const JudgeSpec& judge1, const JudgeSpec& judge2,
                          const std::vector<JudgedPair>& pairs);

// Summary statistics of a policy's samples, used for trainer diagnostics.
struct PolicyStats {
  double mean_reward = 0.0;
  double mean_cond_kl = 0.0;
  double exploit_freq = 0.0;
};

PolicyStats measure_policy(const PolicyParams& policy, const PolicyParams& ref,
                           const PromptMixture& prompts, const RewardSpec& reward,
                           const SamplingConfig& sampling, std::size_t samples_per_prompt = 1);

// A labelled row of a Win / Loss / Delta table.
struct TableRow {
  std::string label;
  WinRateRow row;
};

// Aligned text table with the columns Win% / Tie% / Loss% / dW-L%.
std::string format_table(const std::string& title, const std::vector<TableRow>& rows);

// CSV: scope,win,tie,loss,win_pct,tie_pct,loss_pct,delta_wl
std::string report_csv(const WinRateReport& report,
                       const std::vector<std::pair<std::string, std::vector<LanguageId>>>& groups);

}  // namespace mlpo
