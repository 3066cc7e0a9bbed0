// Acceptance suite: one PASS/FAIL line per criterion.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mlpo/config.hpp"
#include "mlpo/dpo.hpp"
#include "mlpo/eval.hpp"
#include "mlpo/io.hpp"
#include "mlpo/mixtures.hpp"
#include "mlpo/pipeline.hpp"
#include "mlpo/policy.hpp"
#include "mlpo/reward.hpp"
#include "mlpo/rloo.hpp"
#include "mlpo/synthlang.hpp"

using namespace mlpo;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_s;  // 0: no runtime bound
  std::function<Outcome(const fs::path& work)> run;
};

std::string fmt(const char* spec, double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, x);
  return buf;
}

PolicyParams random_params(std::uint32_t v, std::uint32_t k, std::uint64_t seed, double scale) {
  PolicyParams p = PolicyParams::zeros(VocabSpec::make(v), k);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  for (double& w : p.weights.flat()) w = n(rng);
  return p;
}

Completion random_completion(std::mt19937_64& rng, const VocabSpec& vocab, std::size_t max_len,
                             LanguageId lang) {
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<Token> tok(0, vocab.eos() - 1);
  Completion y{std::vector<Token>(len(rng)), lang};
  for (auto& t : y.tokens) t = tok(rng);
  y.tokens.push_back(vocab.eos());
  return y;
}

bool close_rel(double a, double b, double rtol, double floor = 1e-3) {
  return std::abs(a - b) <= rtol * std::max({std::abs(a), std::abs(b), floor});
}

// ---- 1 ----

Outcome rloo_estimator(const fs::path&) {
  bool ok = rloo_advantages(std::vector<double>{1.0, 0.0}) == std::vector<double>{1.0, -1.0} &&
            rloo_advantages(std::vector<double>{3.0, 1.0, 2.0}) ==
                std::vector<double>{1.5, -1.5, 0.0};
  std::string detail = ok ? "hand cases ok" : "hand cases wrong";

  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> kd(2, 16);
  std::uniform_real_distribution<double> rd(-1.0, 1.0);
  double worst_sum = 0.0;
  for (int t = 0; t < 100000; ++t) {
    std::vector<double> r(kd(rng));
    for (auto& x : r) x = rd(rng);
    const auto adv = rloo_advantages(r);
    worst_sum = std::max(worst_sum, std::abs(std::accumulate(adv.begin(), adv.end(), 0.0)));
  }
  ok = ok && worst_sum < 1e-12;
  detail += "; max |sum adv| " + fmt("%.1e", worst_sum);

  Lexicon lex(VocabSpec::make(4), 1);
  lex.set_role({}, 0, TokenRole::Preferred);
  lex.set_role({}, 1, TokenRole::Marker);
  const RewardSpec reward = make_reward({}, lex);
  const PolicyParams theta = random_params(4, 1, 4, 0.7);
  const Prompt x{{2}, {}};
  RlooConfig cfg;
  cfg.k = 2;
  cfg.beta = 0.0;
  cfg.temperature = 1.0;
  cfg.max_len = 1;
  const Gradient exact = exact_gradient_oracle(theta, theta, x, reward, 0.0, 1);
  constexpr std::size_t n = 200000;
  const std::size_t d = exact.flat().size();
  std::vector<double> s(d, 0.0), s2(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto g = rloo_gradient_estimate(theta, theta, x, reward, cfg, SeedPath(5, {i})).grad;
    for (std::size_t c = 0; c < d; ++c) s[c] += g.flat()[c], s2[c] += g.flat()[c] * g.flat()[c];
  }
  double worst_z = 0.0;
  bool unbiased = true;
  for (std::size_t c = 0; c < d; ++c) {
    const double mean = s[c] / n;
    const double se = std::sqrt(std::max(0.0, s2[c] / n - mean * mean) / n);
    const double dev = std::abs(mean - exact.flat()[c]);
    if (se == 0.0) {
      unbiased = unbiased && dev < 1e-15;
    } else {
      worst_z = std::max(worst_z, dev / se);
      unbiased = unbiased && dev < 3.0 * se;
    }
  }
  ok = ok && unbiased;
  detail += "; worst |MC - exact| " + fmt("%.2f", worst_z) + " SE at N=2e5";
  return {ok, detail};
}

// ---- 2 ----

Outcome dpo_correctness(const fs::path&) {
  const VocabSpec vocab = VocabSpec::make(6);
  constexpr std::size_t len = 4;
  std::mt19937_64 rng(11);
  auto pair_for = [&](LanguageId lang) {
    PreferencePair p;
    p.prompt = {{static_cast<Token>(rng() % vocab.eos())}, lang};
    do {
      p.chosen = random_completion(rng, vocab, len, lang);
      p.rejected = random_completion(rng, vocab, len, lang);
    } while (p.chosen == p.rejected);
    return p;
  };

  const auto theta0 = random_params(6, 2, 3, 1.0);
  double worst_ln2 = 0.0;
  for (int i = 0; i < 20; ++i) {
    worst_ln2 = std::max(worst_ln2, std::abs(dpo_loss(theta0, theta0, pair_for(LanguageId{1}), 0.5,
                                                      len) - std::log(2.0)));
  }

  int fd_fail = 0;
  for (int inst = 0; inst < 100; ++inst) {
    auto theta = random_params(6, 2, 100 + inst, 1.0);
    const auto ref = random_params(6, 2, 200 + inst, 1.0);
    const auto pair = pair_for(LanguageId{static_cast<std::uint32_t>(inst % 2)});
    const double beta = 0.1 + 0.01 * inst;
    const auto g = dpo_grad(theta, ref, pair, beta, len);
    auto w = theta.weights.flat();
    std::uniform_int_distribution<std::size_t> coord(0, w.size() - 1);
    for (int c = 0; c < 10; ++c) {
      const std::size_t i = coord(rng);
      const double saved = w[i];
      w[i] = saved + 1e-5;
      const double up = dpo_loss(theta, ref, pair, beta, len);
      w[i] = saved - 1e-5;
      const double down = dpo_loss(theta, ref, pair, beta, len);
      w[i] = saved;
      if (!close_rel(g.flat()[i], (up - down) / 2e-5, 1e-6)) ++fd_fail;
    }
  }

  const auto ref = PolicyParams::zeros(VocabSpec::make(4), 1);
  auto sat = ref;
  sat.weights(sat.bias_row(), 0) = 40.0;
  sat.weights(sat.bias_row(), 1) = -40.0;
  PreferencePair sp;
  sp.prompt = {{2}, {}};
  sp.chosen = {{0, 3}, {}};
  sp.rejected = {{1, 3}, {}};
  const double z = dpo_logit(sat, ref, sp, 0.5, 1);
  const double gnorm = dpo_grad(sat, ref, sp, 0.5, 1).norm();

  const bool ok = worst_ln2 <= 1e-12 && fd_fail == 0 && z > 30.0 && gnorm < 1e-10;
  return {ok, "|loss - ln 2| " + fmt("%.1e", worst_ln2) + "; FD mismatches " +
                  std::to_string(fd_fail) + "/1000; saturated z " + fmt("%.1f", z) +
                  " grad norm " + fmt("%.1e", gnorm)};
}

// ---- 3 ----

Outcome policy_analytics(const fs::path&) {
  double worst_norm = 0.0, worst_score = 0.0;
  int fd_fail = 0;
  std::mt19937_64 rng(21);
  for (int inst = 0; inst < 10; ++inst) {
    auto theta = random_params(6, 2, 300 + inst, 1.0);
    const Prompt x{{static_cast<Token>(inst % 5)}, LanguageId{static_cast<std::uint32_t>(inst % 2)}};
    const auto all = enumerate_completions(theta, x, 4);
    double total = 0.0;
    Gradient score_sum(theta.weights.rows(), theta.weights.cols());
    for (const auto& wc : all) {
      total += wc.probability;
      accumulate_grad_log_prob(theta, x, wc.completion, wc.probability, score_sum, 4);
    }
    worst_norm = std::max(worst_norm, std::abs(total - 1.0));
    worst_score = std::max(worst_score, score_sum.max_abs());

    for (int t = 0; t < 5; ++t) {
      const auto y = random_completion(rng, theta.vocab, 4, x.lang);
      const auto g = grad_log_prob(theta, x, y, 4);
      auto w = theta.weights.flat();
      std::uniform_int_distribution<std::size_t> coord(0, w.size() - 1);
      for (int c = 0; c < 10; ++c) {
        const std::size_t i = coord(rng);
        const double saved = w[i];
        w[i] = saved + 1e-5;
        const double up = log_prob(theta, x, y, 4);
        w[i] = saved - 1e-5;
        const double down = log_prob(theta, x, y, 4);
        w[i] = saved;
        if (!close_rel(g.flat()[i], (up - down) / 2e-5, 1e-6)) ++fd_fail;
      }
    }
  }
  const bool ok = worst_norm <= 1e-9 && fd_fail == 0 && worst_score <= 1e-9;
  return {ok, "|sum p - 1| " + fmt("%.1e", worst_norm) + "; FD mismatches " +
                  std::to_string(fd_fail) + "/500; |E[grad log p]| " + fmt("%.1e", worst_score)};
}

// ---- 4 ----

Outcome data_statistic(const fs::path&) {
  const ExperimentConfig cfg;
  const Workspace ws = prepare_workspace(cfg);
  const double f = measure_rejected_fraction(ws.env, ws.channel, ws.reward, cfg.data.gen, 10000, 1);
  return {f >= 0.88 && f <= 0.94,
          "marker rate " + fmt("%.4f", ws.channel.marker_rate) + " (" +
              std::to_string(ws.calibration ? ws.calibration->probes : 0) +
              " probes); translated rejected in " + fmt("%.4f", f) + " of 10^4 fresh pairs"};
}

// ---- 5 ----

Outcome mixture_arithmetic(const fs::path&) {
  std::vector<LanguageId> langs;
  for (std::uint32_t i = 0; i < 23; ++i) langs.push_back(LanguageId{i});
  const auto fixed = allocate({"ml-23-50k", langs, FixedTotal{50000}});
  std::size_t n2174 = 0, n2173 = 0, sum_fixed = 0;
  for (const auto& [l, c] : fixed) {
    n2174 += c == 2174;
    n2173 += c == 2173;
    sum_fixed += c;
  }
  const auto per = allocate({"ml-23-230k", langs, PerLanguage{10000}});
  std::size_t sum_per = 0;
  for (const auto& [l, c] : per) sum_per += c;
  const bool ok = n2174 == 21 && n2173 == 2 && sum_fixed == 50000 && sum_per == 230000;
  return {ok, "50000 over 23: " + std::to_string(n2174) + " x 2174 + " + std::to_string(n2173) +
                  " x 2173 = " + std::to_string(sum_fixed) + "; 10000 x 23 = " +
                  std::to_string(sum_per)};
}

// ---- 6 ----

Outcome table_arithmetic(const fs::path&) {
  struct Row {
    double win, loss, published;
  };
  const Row rows[] = {{54.4, 35.8, 18.6}, {43.3, 40.6, 2.7}, {47.0, 37.1, 9.9},
                      {54.9, 35.5, 19.4}, {42.9, 40.9, 2.0}, {46.3, 39.3, 7.3}};
  int matched = 0;
  std::string mismatches;
  for (const auto& r : rows) {
    const double d = delta_wl(r.win, r.loss);
    if (d == r.published) {
      ++matched;
    } else {
      mismatches += " (" + fmt("%.1f", r.win) + ", " + fmt("%.1f", r.loss) + ") -> " +
                    fmt("%.1f", d) + " but published " + fmt("%.1f", r.published) + ";";
    }
  }
  const int total = static_cast<int>(std::size(rows));
  return {matched == total, std::to_string(matched) + "/" + std::to_string(total) +
                                " rows reproduced" + (mismatches.empty() ? "" : ";" + mismatches)};
}

// ---- 7 ----

Outcome transfer_trend(const fs::path& work) {
  ExperimentConfig cfg;
  const auto res = cmd_experiment("transfer", cfg, {work / "transfer", 4, nullptr});
  const double en1 = res.metrics.at("rloo.en-1.unseen_dwl");
  const double ml5 = res.metrics.at("rloo.ml-5.unseen_dwl");
  const double den1 = res.metrics.at("dpo.en-1.unseen_dwl");
  const double dml5 = res.metrics.at("dpo.ml-5.unseen_dwl");
  return {en1 > 0.0 && ml5 > en1,
          "rloo unseen dW-L en-1 " + fmt("%.1f", en1) + ", ml-5 " + fmt("%.1f", ml5) +
              " (dpo: " + fmt("%.1f", den1) + ", " + fmt("%.1f", dml5) + ")"};
}

// ---- 8 ----

// Exact expected reward of the uniform policy: each content token is uniform over
// the V - 1 content ids and the completion is empty with probability 1 / V.
double uniform_baseline(const Environment& env, const RewardWeights& w, LanguageId lang) {
  const auto& prof = env.profile(lang);
  const double content = env.vocab.size - 1.0;
  const double per_token = (w.in_language_weight * prof.preferred_tokens.size() -
                            w.marker_penalty * prof.marker_tokens.size()) /
                           content;
  return (1.0 - 1.0 / env.vocab.size) * per_token;
}

RlooResult single_language_rloo(const Workspace& ws, const ExperimentConfig& cfg, double beta,
                                const RewardSpec& reward) {
  const MixtureSpec mix = mixture_preset("en-1", ws.env.num_languages());
  RlooConfig rc = cfg.trainer.rloo;
  rc.beta = beta;
  const PolicyParams ref = reference_policy(ws.env);
  return train_rloo(ref, ref, training_prompts(ws.env, mix, cfg.data.gen), reward, rc);
}

Outcome training_efficacy(const fs::path&) {
  ExperimentConfig cfg;
  cfg.data.marker_rate = 0.0;  // the trainers below do not need the calibrated channel
  const Workspace ws = prepare_workspace(cfg);
  const PolicyParams ref = reference_policy(ws.env);
  const LanguageId lang = kPivotLanguage;
  const PromptMixture probe = heldout_prompts(ws.env, {lang}, cfg, HeldOut::Validation);
  const SamplingConfig raw{1.0, cfg.trainer.rloo.max_len, cfg.evaluation.sampling.seed};

  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  const RlooResult rloo = single_language_rloo(ws, cfg, cfg.trainer.rloo.beta, ws.reward);
  const double rloo_s = std::chrono::duration<double>(clock::now() - t0).count();
  const double base = uniform_baseline(ws.env, cfg.reward, lang);
  const double base_mc = measure_policy(ref, ref, probe, ws.reward, raw, 8).mean_reward;
  const double trained = measure_policy(rloo.params, ref, probe, ws.reward, raw, 8).mean_reward;
  const bool rloo_ok = rloo.steps <= 500 && trained - base >= 0.2 && rloo_s < 300.0;

  // DPO on pairs whose completions differ in one position: the rejected one
  // carries a marker where the chosen one has an in-language token.
  const auto t1 = clock::now();
  const auto& prof = ws.env.profile(lang);
  Dataset data;
  data.mixture = {"one-token", {lang}, FixedTotal{500}};
  const auto prompts = gen_prompts(ws.env, lang, 500, cfg.data.gen);
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    auto rng = make_engine(cfg.data.gen.seed, {77, i});
    PreferencePair p;
    p.prompt = prompts[i];
    do {
      p.chosen = gen_direct(prof, prompts[i], cfg.data.gen, rng);
    } while (p.chosen.content_length() == 0);
    p.rejected = p.chosen;
    const std::size_t pos = std::uniform_int_distribution<std::size_t>(
        0, p.chosen.content_length() - 1)(rng);
    Token marker = prof.marker_tokens[rng() % prof.marker_tokens.size()];
    if (marker == p.chosen.tokens[pos]) marker = prof.marker_tokens[0] == marker ? prof.marker_tokens[1] : prof.marker_tokens[0];
    p.rejected.tokens[pos] = marker;
    data.pairs.push_back(std::move(p));
  }
  const DpoResult dpo = train_dpo(ref, ref, data, cfg.trainer.dpo);
  std::size_t positive = 0;
  for (const auto& p : data.pairs) positive += dpo_logit(dpo.params, ref, p, 1.0, cfg.trainer.dpo.max_len) > 0.0;
  const double frac = static_cast<double>(positive) / data.pairs.size();
  const double final_loss = dpo.history.epochs.back().mean_loss;
  const double dpo_s = std::chrono::duration<double>(clock::now() - t1).count();
  const bool dpo_ok = final_loss < std::log(2.0) && frac >= 0.95 && dpo_s < 300.0;

  return {rloo_ok && dpo_ok,
          "rloo: reward " + fmt("%.3f", trained) + " vs uniform " + fmt("%.4f", base) +
              " (sampled " + fmt("%.4f", base_mc) + ") after " + std::to_string(rloo.steps) +
              " steps, " + fmt("%.1f", rloo_s) + " s; dpo: final epoch loss " +
              fmt("%.4f", final_loss) + ", margin > 0 on " + fmt("%.1f", 100.0 * frac) +
              "% of pairs, " + fmt("%.1f", dpo_s) + " s"};
}

// ---- 9 ----

Outcome kl_property(const fs::path&) {
  ExperimentConfig cfg;
  cfg.data.marker_rate = 0.0;
  const Workspace ws = prepare_workspace(cfg);
  const PolicyParams ref = reference_policy(ws.env);
  const PromptMixture probe = heldout_prompts(ws.env, {kPivotLanguage}, cfg, HeldOut::Validation);
  std::vector<double> kls;
  std::string detail;
  for (double beta : {0.0, 0.01, 0.5}) {
    const RlooResult r = single_language_rloo(ws, cfg, beta, ws.reward);
    kls.push_back(measure_policy(r.params, ref, probe, ws.reward, cfg.evaluation.sampling, 4)
                      .mean_cond_kl);
    detail += (detail.empty() ? "" : ", ") + std::string("beta ") + fmt("%g", beta) + ": " +
              fmt("%.4f", kls.back());
  }
  return {kls[0] >= kls[1] && kls[1] >= kls[2], "final mean conditional KL " + detail};
}

// ---- 10 ----

Outcome overoptimization(const fs::path& work) {
  ExperimentConfig cfg;
  const auto res = cmd_experiment("overopt", cfg, {work / "overopt", 4, nullptr});
  const double f0 = res.metrics.at("beta0.final_exploit");
  const double f5 = res.metrics.at("beta0.5.final_exploit");
  return {f0 > 0.5 && f5 < 0.1, "final exploit-token frequency beta 0: " + fmt("%.3f", f0) +
                                    ", beta 0.5: " + fmt("%.3f", f5)};
}

// ---- 11 ----

// FNV-1a over (relative path, contents) of every file, in path order.
std::uint64_t tree_digest(const fs::path& root) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](const std::string& s) {
    for (unsigned char c : s) h = (h ^ c) * 1099511628211ull;
  };
  for (const auto& f : files) {
    mix(fs::relative(f, root).generic_string());
    mix(read_text(f));
  }
  return h;
}

Outcome determinism(const fs::path& work) {
  std::vector<std::uint64_t> digests;
  std::string report_a, report_b;
  for (int rep = 0; rep < 2; ++rep) {
    const fs::path dir = work / ("run" + std::to_string(rep));
    fs::remove_all(dir);
    const ExperimentConfig cfg;
    const RunOptions opts{dir, rep == 0 ? 1u : 4u, nullptr};
    cmd_gen_data(cfg, opts);
    cmd_train(cfg, opts);
    cmd_eval(cfg, dir / "train" / "best.ckpt", dir / "train" / "ref.ckpt", opts);
    cmd_experiment("transfer", cfg, opts);
    (rep == 0 ? report_a : report_b) = cmd_report(opts);
    digests.push_back(tree_digest(dir));
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%016llx vs %016llx", static_cast<unsigned long long>(digests[0]),
                static_cast<unsigned long long>(digests[1]));
  return {digests[0] == digests[1] && report_a == report_b,
          std::string("tree digests ") + buf + " (gen-data, train, eval, report, transfer)"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  int only = 0;
  std::string work = "acceptance_work";
  app.add_option("--only", only, "run a single criterion (1-11)")->check(CLI::Range(1, 11));
  app.add_option("--work", work, "scratch directory for experiment outputs");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {1, "RLOO estimator correctness", 60, rloo_estimator},
      {2, "DPO loss and gradient correctness", 30, dpo_correctness},
      {3, "policy analytics", 60, policy_analytics},
      {4, "calibrated rejection statistic", 60, data_statistic},
      {5, "mixture arithmetic", 0, mixture_arithmetic},
      {6, "win/loss table arithmetic", 0, table_arithmetic},
      {7, "cross-lingual transfer trend", 600, transfer_trend},
      {8, "training efficacy", 600, training_efficacy},
      {9, "KL regularization ordering", 0, kl_property},
      {10, "overoptimization demo", 300, overoptimization},
      {11, "determinism", 0, determinism},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    const fs::path dir = fs::path(work) / ("c" + std::to_string(c.id));
    fs::create_directories(dir);
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run(dir);
    } catch (const std::exception& e) {
      out = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0 && secs >= c.budget_s) {
      out.passed = false;
      out.detail += "; over the " + fmt("%.0f", c.budget_s) + " s budget";
    }
    std::printf("%s  %2d %s: %s (%.1f s)\n", out.passed ? "PASS" : "FAIL", c.id, c.name.c_str(),
                out.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !out.passed;
  }
  return failed == 0 ? 0 : 1;
}
