#include "mlpo/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <thread>

namespace mlpo {

namespace {

constexpr std::uint64_t kEvalStream = 41;
constexpr std::uint64_t kStatsStream = 42;

std::string fmt1(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", x);
  return buf;
}

double pct(std::size_t count, std::size_t total) {
  return total == 0 ? 0.0 : 100.0 * static_cast<double>(count) / static_cast<double>(total);
}

}  // namespace

void JudgeSpec::validate() const {
  if (!(tie_epsilon >= 0.0)) throw ConfigError("judge.tie_epsilon must be >= 0");
  if (!reward.lexicon) throw ConfigError("judge has no reward lexicon");
}

JudgeResult judge_pair_in_order(const JudgeSpec& judge, const Prompt& prompt, const Completion& a,
                                const Completion& b, bool b_shown_first) {
  const Completion& first = b_shown_first ? b : a;
  const Completion& second = b_shown_first ? a : b;
  const Verdict v = label(judge.reward, prompt, first, second, judge.tie_epsilon);
  JudgeResult res;
  res.b_shown_first = b_shown_first;
  if (v == Verdict::Tie) {
    res.verdict = JudgeVerdict::Tie;
  } else {
    const bool first_wins = v == Verdict::FirstWins;
    res.verdict = (first_wins != b_shown_first) ? JudgeVerdict::AWins : JudgeVerdict::BWins;
  }
  return res;
}

JudgeResult judge_pair(const JudgeSpec& judge, const Prompt& prompt, const Completion& a,
                       const Completion& b, std::uint64_t presentation_seed) {
  auto rng = make_engine(judge.position_seed, {presentation_seed});
  const bool b_first = std::bernoulli_distribution(0.5)(rng);
  return judge_pair_in_order(judge, prompt, a, b, b_first);
}

double round1(double x) { return std::round(x * 10.0) / 10.0; }

double delta_wl(double win_pct, double loss_pct) { return round1(win_pct - loss_pct); }

WinRateRow make_row(std::size_t win, std::size_t tie, std::size_t loss) {
  WinRateRow r{win, tie, loss};
  const std::size_t n = r.total();
  r.win_pct = round1(pct(win, n));
  r.tie_pct = round1(pct(tie, n));
  r.loss_pct = round1(pct(loss, n));
  r.delta_wl = round1(pct(win, n) - pct(loss, n));
  return r;
}

WinRateRow aggregate_over(const WinRateReport& report, const std::vector<LanguageId>& langs) {
  WinRateRow out;
  double win = 0.0, tie = 0.0, loss = 0.0;
  std::size_t counted = 0;
  for (auto lang : langs) {
    auto it = report.per_language.find(lang);
    if (it == report.per_language.end()) continue;
    const auto& r = it->second;
    out.win += r.win;
    out.tie += r.tie;
    out.loss += r.loss;
    win += pct(r.win, r.total());
    tie += pct(r.tie, r.total());
    loss += pct(r.loss, r.total());
    ++counted;
  }
  if (counted == 0) return out;
  const double n = static_cast<double>(counted);
  out.win_pct = round1(win / n);
  out.tie_pct = round1(tie / n);
  out.loss_pct = round1(loss / n);
  out.delta_wl = round1((win - loss) / n);
  return out;
}

WinRateReport win_rate(const PolicyParams& policy_a, const PolicyParams& policy_b,
                       const PromptMixture& prompts, const JudgeSpec& judge,
                       const SamplingConfig& sampling, unsigned jobs) {
  judge.validate();
  sampling.validate();
  if (prompts.empty()) throw ConfigError("win_rate: no prompts");

  std::vector<WinRateRow> rows(prompts.size());
  auto work = [&](std::size_t li) {
    const auto& lp = prompts[li];
    std::size_t win = 0, tie = 0, loss = 0;
    for (std::size_t i = 0; i < lp.prompts.size(); ++i) {
      const SeedPath stream(sampling.seed, {kEvalStream, lp.lang.id, i});
      auto rng_a = stream.engine();
      auto rng_b = stream.engine();
      const Completion a = sample(policy_a, lp.prompts[i], sampling, rng_a);
      const Completion b = sample(policy_b, lp.prompts[i], sampling, rng_b);
      const std::uint64_t presentation = make_engine(judge.position_seed, {lp.lang.id, i})();
      switch (judge_pair(judge, lp.prompts[i], a, b, presentation).verdict) {
        case JudgeVerdict::AWins: ++win; break;
        case JudgeVerdict::BWins: ++loss; break;
        case JudgeVerdict::Tie: ++tie; break;
      }
    }
    rows[li] = make_row(win, tie, loss);
  };

  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(prompts.size())));
  if (jobs == 1) {
    for (std::size_t li = 0; li < prompts.size(); ++li) work(li);
  } else {
    std::vector<std::jthread> workers;
    for (unsigned w = 0; w < jobs; ++w) {
      workers.emplace_back([&, w] {
        for (std::size_t li = w; li < prompts.size(); li += jobs) work(li);
      });
    }
  }

  WinRateReport report;
  std::vector<LanguageId> langs;
  for (std::size_t li = 0; li < prompts.size(); ++li) {
    report.per_language[prompts[li].lang] = rows[li];
    langs.push_back(prompts[li].lang);
  }
  report.aggregate = aggregate_over(report, langs);
  return report;
}

AgreementResult agreement(const JudgeSpec& judge1, const JudgeSpec& judge2,
                          const std::vector<JudgedPair>& pairs) {
  if (pairs.empty()) throw ConfigError("agreement: no pairs");
  std::size_t agree = 0, ties1 = 0, ties2 = 0;
  for (const auto& p : pairs) {
    const Verdict v1 = label(judge1.reward, p.prompt, p.first, p.second, judge1.tie_epsilon);
    const Verdict v2 = label(judge2.reward, p.prompt, p.first, p.second, judge2.tie_epsilon);
    if (v1 == v2) ++agree;
    if (v1 == Verdict::Tie) ++ties1;
    if (v2 == Verdict::Tie) ++ties2;
  }
  const double n = static_cast<double>(pairs.size());
  return {static_cast<double>(agree) / n, static_cast<double>(ties1) / n,
          static_cast<double>(ties2) / n, pairs.size()};
}

PolicyStats measure_policy(const PolicyParams& policy, const PolicyParams& ref,
                           const PromptMixture& prompts, const RewardSpec& reward,
                           const SamplingConfig& sampling, std::size_t samples_per_prompt) {
  sampling.validate();
  const auto exploit = reward.lexicon->exploit_token();
  const Token eos = policy.vocab.eos();
  double reward_sum = 0.0, kl_sum = 0.0;
  std::size_t n = 0, tokens = 0, exploit_tokens = 0;
  for (const auto& lp : prompts) {
    for (std::size_t i = 0; i < lp.prompts.size(); ++i) {
      for (std::size_t s = 0; s < samples_per_prompt; ++s) {
        auto rng = make_engine(sampling.seed, {kStatsStream, lp.lang.id, i, s});
        const auto y = sample(policy, lp.prompts[i], sampling, rng);
        reward_sum += score(reward, lp.prompts[i], y);
        kl_sum += trajectory_kl(policy, ref, lp.prompts[i], y, sampling.max_len);
        ++n;
        for (Token t : y.tokens) {
          if (t == eos) continue;
          ++tokens;
          if (exploit && t == *exploit) ++exploit_tokens;
        }
      }
    }
  }
  PolicyStats out;
  if (n == 0) return out;
  out.mean_reward = reward_sum / static_cast<double>(n);
  out.mean_cond_kl = kl_sum / static_cast<double>(n);
  out.exploit_freq =
      tokens == 0 ? 0.0 : static_cast<double>(exploit_tokens) / static_cast<double>(tokens);
  return out;
}

std::string format_table(const std::string& title, const std::vector<TableRow>& rows) {
  std::size_t width = 10;
  for (const auto& r : rows) width = std::max(width, r.label.size());
  std::ostringstream out;
  char buf[256];
  if (!title.empty()) out << title << '\n';
  std::snprintf(buf, sizeof(buf), "%-*s %7s %7s %7s %7s\n", static_cast<int>(width), "",
                "Win%", "Tie%", "Loss%", "dW-L%");
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-*s %7.1f %7.1f %7.1f %7.1f\n", static_cast<int>(width),
                  r.label.c_str(), r.row.win_pct, r.row.tie_pct, r.row.loss_pct, r.row.delta_wl);
    out << buf;
  }
  return out.str();
}

std::string report_csv(const WinRateReport& report,
                       const std::vector<std::pair<std::string, std::vector<LanguageId>>>& groups) {
  std::ostringstream out;
  out << "scope,win,tie,loss,win_pct,tie_pct,loss_pct,delta_wl\n";
  auto line = [&](const std::string& scope, const WinRateRow& r) {
    out << scope << ',' << r.win << ',' << r.tie << ',' << r.loss << ',' << fmt1(r.win_pct) << ','
        << fmt1(r.tie_pct) << ',' << fmt1(r.loss_pct) << ',' << fmt1(r.delta_wl) << '\n';
  };
  for (const auto& [lang, row] : report.per_language) line(lang.name(), row);
  line("all", report.aggregate);
  for (const auto& [name, langs] : groups) line(name, aggregate_over(report, langs));
  return out.str();
}

}  // namespace mlpo
