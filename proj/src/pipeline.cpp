#include "mlpo/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "mlpo/errors.hpp"
#include "mlpo/io.hpp"
#include "mlpo/mixtures.hpp"

namespace mlpo {

namespace {

// Held-out prompt indices start far above anything a training mixture uses.
constexpr std::size_t kTestPromptBase = std::size_t{1} << 40;
constexpr std::size_t kValidationPromptBase = std::size_t{1} << 41;
constexpr std::uint64_t kCheckStream = 1;

constexpr double kOveroptExploitBonus = 0.5;
constexpr std::size_t kOveroptSnapshotEvery = 50;
constexpr std::size_t kOveroptSamplesPerPrompt = 4;

void say(std::ostream* log, const std::string& text) {
  if (log) *log << text << std::flush;
}

std::string fmt(const char* spec, double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, x);
  return buf;
}

template <class F>
auto stage(const std::string& name, std::ostream* log, F&& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    say(log, "stage " + name + " failed: " + e.what() + "\n");
    throw;
  }
}

std::string lang_list(const std::vector<LanguageId>& langs) {
  std::string out;
  for (auto l : langs) out += (out.empty() ? "" : " ") + l.name();
  return out.empty() ? "(none)" : out;
}

Workspace workspace_from_manifest(const ExperimentConfig& cfg, const fs::path& manifest) {
  if (!fs::exists(manifest))
    throw ConfigError("missing " + manifest.string() + " (run gen-data first)");
  Workspace ws{read_manifest(manifest), {}, {}, {}, std::nullopt};
  const Lexicon lex = ws.env.lexicon();
  ws.reward = make_reward(cfg.reward, lex);
  ws.judge_reward = make_reward(cfg.judge_weights(), lex);
  ws.channel = TranslationChannel{read_manifest_marker_rate(manifest).value_or(0.0), kPivotLanguage};
  return ws;
}

std::string candidate_name(TrainerKind kind, std::size_t index_or_step, bool initial) {
  if (initial) return "init";
  char buf[32];
  if (kind == TrainerKind::Dpo)
    std::snprintf(buf, sizeof(buf), "epoch%zu", index_or_step);
  else
    std::snprintf(buf, sizeof(buf), "step%06zu", index_or_step);
  return buf;
}

std::string selection_csv(const std::vector<CandidateScore>& cands) {
  std::ostringstream out;
  out << "candidate,win_pct,tie_pct,loss_pct,delta_wl\n";
  for (const auto& c : cands) {
    out << c.name << ',' << fmt("%.1f", c.vs_ref.win_pct) << ',' << fmt("%.1f", c.vs_ref.tie_pct)
        << ',' << fmt("%.1f", c.vs_ref.loss_pct) << ',' << fmt("%.1f", c.vs_ref.delta_wl) << '\n';
  }
  return out.str();
}

}  // namespace

Workspace prepare_workspace(const ExperimentConfig& cfg) {
  cfg.validate();
  Workspace ws{make_environment(cfg.environment), {}, {}, {}, std::nullopt};
  const Lexicon lex = ws.env.lexicon();
  ws.reward = make_reward(cfg.reward, lex);
  ws.judge_reward = make_reward(cfg.judge_weights(), lex);
  if (cfg.data.marker_rate) {
    ws.channel = TranslationChannel{*cfg.data.marker_rate, kPivotLanguage};
  } else {
    ws.calibration = calibrate_marker_rate(ws.env, ws.reward, cfg.data.calibration_target,
                                           cfg.data.gen, cfg.data.calibration_pairs);
    ws.channel = TranslationChannel{ws.calibration->marker_rate, kPivotLanguage};
  }
  return ws;
}

JudgeSpec make_judge(const Workspace& ws, const ExperimentConfig& cfg) {
  return JudgeSpec{ws.judge_reward, cfg.evaluation.tie_epsilon, cfg.evaluation.position_seed};
}

PolicyParams reference_policy(const Environment& env) {
  return PolicyParams::zeros(env.vocab, env.num_languages());
}

PromptMixture training_prompts(const Environment& env, const MixtureSpec& mixture,
                               const DataGenConfig& gen) {
  PromptMixture out;
  const auto counts = allocate(mixture);
  for (auto lang : mixture.languages) {
    out.push_back({lang, gen_prompts(env, lang, counts.at(lang), gen)});
  }
  return out;
}

PromptMixture heldout_prompts(const Environment& env, const std::vector<LanguageId>& langs,
                              const ExperimentConfig& cfg, HeldOut which) {
  DataGenConfig gen = cfg.data.gen;
  gen.seed = cfg.evaluation.prompt_seed;
  const bool test = which == HeldOut::Test;
  const std::size_t n = test ? cfg.evaluation.prompts_per_language
                             : cfg.evaluation.validation_prompts_per_language;
  const std::size_t base = test ? kTestPromptBase : kValidationPromptBase;
  PromptMixture out;
  for (auto lang : langs) out.push_back({lang, gen_prompts(env, lang, n, gen, base)});
  return out;
}

GenDataResult generate_data(const Workspace& ws, const ExperimentConfig& cfg,
                            const MixtureSpec& mixture, const fs::path& dir, unsigned jobs,
                            std::ostream* log) {
  GenDataResult res;
  res.marker_rate = ws.channel.marker_rate;
  res.dataset = build_dataset(mixture, ws.env, ws.channel, ws.reward, cfg.data.gen, jobs);
  res.dataset_path = dir / "dataset.jsonl";
  write_dataset(res.dataset_path, res.dataset);
  res.manifest_path = write_manifest(dir, ws.env, ws.channel.marker_rate);

  std::size_t rejected = 0;
  std::map<LanguageId, std::size_t> per_lang;
  for (const auto& p : res.dataset.pairs) {
    ++per_lang[p.prompt.lang];
    if (translated_rejected(p, cfg.data.gen.tie_epsilon)) ++rejected;
  }
  res.dataset_rejected_fraction =
      res.dataset.pairs.empty()
          ? 0.0
          : static_cast<double>(rejected) / static_cast<double>(res.dataset.pairs.size());
  res.check_rejected_fraction =
      cfg.data.check_pairs == 0
          ? res.dataset_rejected_fraction
          : measure_rejected_fraction(ws.env, ws.channel, ws.reward, cfg.data.gen,
                                      cfg.data.check_pairs, kCheckStream);

  std::ostringstream msg;
  msg << "mixture " << mixture.name << ": " << res.dataset.pairs.size() << " pairs\n";
  for (const auto& [lang, n] : per_lang) msg << "  " << lang.name() << ' ' << n << '\n';
  msg << "marker rate " << fmt("%.4f", res.marker_rate);
  if (ws.calibration) {
    msg << " (calibrated to " << fmt("%.2f", cfg.data.calibration_target) << " in "
        << ws.calibration->probes << " probes" << (ws.calibration->endpoint ? ", endpoint" : "")
        << ")";
  }
  msg << "\ntranslated-rejected fraction: " << fmt("%.4f", res.check_rejected_fraction) << " ("
      << cfg.data.check_pairs << " check pairs), " << fmt("%.4f", res.dataset_rejected_fraction)
      << " in dataset\n";
  say(log, msg.str());
  return res;
}

TrainResult train_policy(const Workspace& ws, const ExperimentConfig& cfg,
                         const MixtureSpec& mixture, const Dataset* dataset, const fs::path& dir,
                         unsigned jobs, std::ostream* log) {
  const PolicyParams ref = reference_policy(ws.env);
  TrainResult res;
  res.kind = cfg.trainer.kind;

  std::vector<std::pair<std::string, PolicyParams>> candidates;
  candidates.emplace_back(candidate_name(res.kind, 0, true), ref);
  std::string history;
  if (res.kind == TrainerKind::Dpo) {
    if (!dataset) throw ConfigError("trainer.kind: dpo needs a preference dataset");
    res.dpo = train_dpo(ref, ref, *dataset, cfg.trainer.dpo);
    res.final_params = res.dpo->params;
    for (std::size_t e = 0; e < res.dpo->epoch_snapshots.size(); ++e)
      candidates.emplace_back(candidate_name(res.kind, e + 1, false), res.dpo->epoch_snapshots[e]);
    history = dpo_history_csv(res.dpo->history);
  } else {
    const PromptMixture prompts = training_prompts(ws.env, mixture, cfg.data.gen);
    res.rloo = train_rloo(ref, ref, prompts, ws.reward, cfg.trainer.rloo);
    res.final_params = res.rloo->params;
    for (const auto& snap : res.rloo->snapshots) {
      if (snap.step == 0) continue;
      candidates.emplace_back(candidate_name(res.kind, snap.step, false), snap.params);
    }
    history = rloo_history_csv(res.rloo->history);
  }

  // Checkpoint selection: judge win-rate against the reference on validation
  // prompts of the training languages; the earliest candidate wins ties.
  const JudgeSpec judge = make_judge(ws, cfg);
  const PromptMixture validation = heldout_prompts(ws.env, mixture.languages, cfg, HeldOut::Validation);
  std::size_t best = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto report =
        win_rate(candidates[i].second, ref, validation, judge, cfg.evaluation.sampling, jobs);
    res.candidates.push_back({candidates[i].first, report.aggregate});
    if (report.aggregate.delta_wl > res.candidates[best].vs_ref.delta_wl) best = i;
  }
  res.best_name = candidates[best].first;
  res.best_params = candidates[best].second;

  fs::create_directories(dir);
  for (const auto& [name, params] : candidates) save_checkpoint(dir / (name + ".ckpt"), params);
  save_checkpoint(dir / "ref.ckpt", ref);
  save_checkpoint(dir / "best.ckpt", res.best_params);
  write_text(dir / "history.csv", history);
  write_text(dir / "selection.csv", selection_csv(res.candidates));

  std::vector<TableRow> rows;
  for (const auto& c : res.candidates) rows.push_back({c.name, c.vs_ref});
  std::string summary = format_table(std::string(to_string(res.kind)) + " on " + mixture.name +
                                         ": candidates vs reference (validation, " +
                                         lang_list(mixture.languages) + ")",
                                     rows);
  summary += "best checkpoint: " + res.best_name + " (dW-L " +
             fmt("%.1f", res.candidates[best].vs_ref.delta_wl) + ")\n";
  write_text(dir / "summary.txt", summary);
  say(log, summary);
  return res;
}

EvalResult evaluate_policies(const Workspace& ws, const ExperimentConfig& cfg,
                             const PolicyParams& a, const PolicyParams& b,
                             const MixtureSpec& mixture, const fs::path& dir, unsigned jobs,
                             std::ostream* log) {
  EvalResult res;
  const auto all = ws.env.languages();
  const PromptMixture test = heldout_prompts(ws.env, all, cfg, HeldOut::Test);
  res.report = win_rate(a, b, test, make_judge(ws, cfg), cfg.evaluation.sampling, jobs);
  std::tie(res.seen, res.unseen) = split_seen_unseen(all, mixture);
  res.seen_row = aggregate_over(res.report, res.seen);
  res.unseen_row = aggregate_over(res.report, res.unseen);

  std::vector<std::pair<std::string, std::vector<LanguageId>>> groups{{"seen", res.seen},
                                                                      {"unseen", res.unseen}};
  std::vector<TableRow> rows;
  for (const auto& [lang, row] : res.report.per_language) rows.push_back({lang.name(), row});
  rows.push_back({"all", res.report.aggregate});
  rows.push_back({"seen", res.seen_row});
  rows.push_back({"unseen", res.unseen_row});
  const std::string table = format_table(
      "A vs B on held-out prompts (seen: " + lang_list(res.seen) + "; unseen: " +
          lang_list(res.unseen) + ")",
      rows);
  write_text(dir / "report.csv", report_csv(res.report, groups));
  write_text(dir / "report.txt", table);
  say(log, table);
  return res;
}

GenDataResult cmd_gen_data(const ExperimentConfig& cfg, const RunOptions& opts) {
  const Workspace ws = prepare_workspace(cfg);
  write_text(opts.out / "config.json", emit_config(cfg));
  return generate_data(ws, cfg, cfg.resolved_mixture(), opts.out / "data", opts.jobs, opts.log);
}

TrainResult cmd_train(const ExperimentConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  const Workspace ws = workspace_from_manifest(cfg, opts.out / "data" / "manifest.json");
  std::optional<Dataset> dataset;
  if (cfg.trainer.kind == TrainerKind::Dpo) {
    const fs::path path = opts.out / "data" / "dataset.jsonl";
    if (!fs::exists(path)) throw ConfigError("missing " + path.string() + " (run gen-data first)");
    dataset = read_dataset(path);
  }
  write_text(opts.out / "config.json", emit_config(cfg));
  return train_policy(ws, cfg, cfg.resolved_mixture(), dataset ? &*dataset : nullptr,
                      opts.out / "train", opts.jobs, opts.log);
}

EvalResult cmd_eval(const ExperimentConfig& cfg, const fs::path& checkpoint_a,
                    const fs::path& checkpoint_b, const RunOptions& opts) {
  cfg.validate();
  const Workspace ws = workspace_from_manifest(cfg, opts.out / "data" / "manifest.json");
  const auto v = ws.env.vocab.size;
  const auto k = ws.env.num_languages();
  const PolicyParams a = load_checkpoint(checkpoint_a, v, k);
  const PolicyParams b = load_checkpoint(checkpoint_b, v, k);
  write_text(opts.out / "config.json", emit_config(cfg));
  return evaluate_policies(ws, cfg, a, b, cfg.resolved_mixture(), opts.out / "eval", opts.jobs,
                           opts.log);
}

std::string cmd_report(const RunOptions& opts) {
  if (!fs::is_directory(opts.out)) throw ConfigError("--out: no such directory " + opts.out.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(opts.out)) {
    const auto name = entry.path().filename();
    if (entry.is_regular_file() && (name == "report.txt" || name == "summary.txt"))
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::string out;
  for (const auto& f : files) {
    out += "== " + fs::relative(f, opts.out).generic_string() + "\n" + read_text(f) + "\n";
  }
  if (files.empty()) out = "no reports under " + opts.out.string() + "\n";
  return out;
}

// ---- experiment presets ----

namespace {

struct Run {
  TrainResult train;
  EvalResult eval;
};

Run run_pipeline(const Workspace& ws, ExperimentConfig cfg, const MixtureSpec& mixture,
                 TrainerKind kind, const fs::path& dir, unsigned jobs, std::ostream* log) {
  cfg.trainer.kind = kind;
  const std::string tag = std::string(to_string(kind)) + "/" + mixture.name;
  say(log, "-- " + tag + "\n");
  std::optional<Dataset> dataset;
  if (kind == TrainerKind::Dpo) {
    dataset = stage("gen-data " + tag, log, [&] {
      return generate_data(ws, cfg, mixture, dir / "data", jobs, log).dataset;
    });
  }
  Run run;
  run.train = stage("train " + tag, log, [&] {
    return train_policy(ws, cfg, mixture, dataset ? &*dataset : nullptr, dir / "train", jobs, log);
  });
  run.eval = stage("eval " + tag, log, [&] {
    return evaluate_policies(ws, cfg, run.train.best_params, reference_policy(ws.env), mixture,
                             dir / "eval", jobs, log);
  });
  return run;
}

std::string verdict_text(const std::vector<VerdictLine>& verdicts) {
  std::string out;
  for (const auto& v : verdicts) out += std::string(v.passed ? "PASS  " : "FAIL  ") + v.check + "\n";
  return out;
}

void transfer_preset(const Workspace& ws, const ExperimentConfig& base, const fs::path& root,
                     unsigned jobs, std::ostream* log, ExperimentResult& res) {
  const auto k = ws.env.num_languages();
  const MixtureSpec en1 = mixture_preset("en-1", k);
  const MixtureSpec ml5 = mixture_preset("ml-5", k);
  // Compare on languages unseen by both mixtures.
  const auto common_unseen = split_seen_unseen(ws.env.languages(), ml5).second;

  std::string text;
  for (TrainerKind kind : {TrainerKind::Dpo, TrainerKind::Rloo}) {
    const std::string tk(to_string(kind));
    std::vector<TableRow> unseen_rows, all_rows;
    std::map<std::string, double> dwl;
    for (const auto* mix : {&en1, &ml5}) {
      const Run run = run_pipeline(ws, base, *mix, kind, root / (tk + "-" + mix->name), jobs, log);
      const WinRateRow unseen = aggregate_over(run.eval.report, common_unseen);
      unseen_rows.push_back({mix->name, unseen});
      all_rows.push_back({mix->name, run.eval.report.aggregate});
      dwl[mix->name] = unseen.delta_wl;
      res.metrics[tk + "." + mix->name + ".unseen_dwl"] = unseen.delta_wl;
      res.metrics[tk + "." + mix->name + ".all_dwl"] = run.eval.report.aggregate.delta_wl;
    }
    text += format_table(tk + " vs reference, unseen languages (" + lang_list(common_unseen) + ")",
                         unseen_rows) +
            "\n";
    text += format_table(tk + " vs reference, all languages", all_rows) + "\n";
    res.verdicts.push_back({tk + ": en-1 unseen dW-L > 0 (" + fmt("%.1f", dwl["en-1"]) + ")",
                            dwl["en-1"] > 0.0});
    res.verdicts.push_back({tk + ": ml-5 unseen dW-L > en-1 unseen dW-L (" +
                                fmt("%.1f", dwl["ml-5"]) + " vs " + fmt("%.1f", dwl["en-1"]) + ")",
                            dwl["ml-5"] > dwl["en-1"]});
  }
  res.summary = text;
}

void mixtures_preset(const Workspace& ws, const ExperimentConfig& base, const fs::path& root,
                     unsigned jobs, std::ostream* log, ExperimentResult& res) {
  const auto k = ws.env.num_languages();
  const std::vector<LanguageId> pivot{kPivotLanguage};
  std::string text;
  for (TrainerKind kind : {TrainerKind::Dpo, TrainerKind::Rloo}) {
    const std::string tk(to_string(kind));
    std::vector<TableRow> avg_rows, pivot_rows;
    for (const auto& name : mixture_preset_names()) {
      const MixtureSpec mix = mixture_preset(name, k);
      const Run run = run_pipeline(ws, base, mix, kind, root / (tk + "-" + name), jobs, log);
      avg_rows.push_back({name, run.eval.report.aggregate});
      pivot_rows.push_back({name, aggregate_over(run.eval.report, pivot)});
      res.metrics[tk + "." + name + ".all_dwl"] = run.eval.report.aggregate.delta_wl;
      res.metrics[tk + "." + name + ".pivot_dwl"] = pivot_rows.back().row.delta_wl;
    }
    text += format_table(tk + " vs reference, average over languages", avg_rows) + "\n";
    text += format_table(tk + " vs reference, " + kPivotLanguage.name(), pivot_rows) + "\n";
    res.verdicts.push_back({tk + ": every mixture trained and evaluated (" +
                                std::to_string(avg_rows.size()) + " rows)",
                            avg_rows.size() == mixture_preset_names().size()});
  }
  res.summary = text;
}

void dpo_vs_rloo_preset(const Workspace& ws, const ExperimentConfig& base, const fs::path& root,
                        unsigned jobs, std::ostream* log, ExperimentResult& res) {
  const auto k = ws.env.num_languages();
  const std::vector<LanguageId> pivot{kPivotLanguage};
  std::vector<TableRow> rows;
  int rloo_ahead = 0, total = 0;
  for (const std::string name : {"en-1", "ml-5", "ml-all-fixed"}) {
    const MixtureSpec mix = mixture_preset(name, k);
    const fs::path dir = root / name;
    const Run dpo = run_pipeline(ws, base, mix, TrainerKind::Dpo, dir / "dpo", jobs, log);
    const Run rloo = run_pipeline(ws, base, mix, TrainerKind::Rloo, dir / "rloo", jobs, log);
    const EvalResult h2h = stage("eval rloo-vs-dpo/" + name, log, [&] {
      return evaluate_policies(ws, base, rloo.train.best_params, dpo.train.best_params, mix,
                               dir / "head-to-head", jobs, log);
    });
    const WinRateRow pv = aggregate_over(h2h.report, pivot);
    rows.push_back({name + " " + kPivotLanguage.name(), pv});
    rows.push_back({name + " avg", h2h.report.aggregate});
    res.metrics[name + ".pivot_dwl"] = pv.delta_wl;
    res.metrics[name + ".avg_dwl"] = h2h.report.aggregate.delta_wl;
    total += 2;
    rloo_ahead += (pv.delta_wl > 0.0) + (h2h.report.aggregate.delta_wl > 0.0);
  }
  res.summary = format_table("rloo vs dpo, head to head", rows) + "\n";
  res.metrics["rows_rloo_ahead"] = rloo_ahead;
  res.verdicts.push_back({"rloo ahead of dpo on " + std::to_string(rloo_ahead) + " of " +
                              std::to_string(total) + " rows",
                          rloo_ahead == total});
}

void overopt_preset(const Workspace& ws, const ExperimentConfig& base, const fs::path& root,
                    unsigned jobs, std::ostream* log, ExperimentResult& res) {
  ExperimentConfig cfg = base;
  cfg.reward.exploit_bonus = kOveroptExploitBonus;
  cfg.trainer.kind = TrainerKind::Rloo;
  cfg.trainer.rloo.checkpoint_every = kOveroptSnapshotEvery;
  Workspace exploit = ws;
  exploit.reward = make_reward(cfg.reward, ws.env.lexicon());

  const MixtureSpec mix = mixture_preset("en-1", ws.env.num_languages());
  const PolicyParams ref = reference_policy(ws.env);
  const PromptMixture probe = heldout_prompts(ws.env, mix.languages, cfg, HeldOut::Validation);
  const JudgeSpec clean = make_judge(ws, cfg);
  const JudgeSpec biased{exploit.reward, cfg.evaluation.tie_epsilon, cfg.evaluation.position_seed};

  std::string text = "exploit bonus " + fmt("%.2f", kOveroptExploitBonus) +
                     " per exploit token; training reward includes it, judge does not\n\n";
  std::vector<TableRow> rows;
  for (double beta : {0.0, 0.5}) {
    cfg.trainer.rloo.beta = beta;
    const std::string tag = "beta" + fmt("%g", beta);
    const fs::path dir = root / tag;
    say(log, "-- rloo/" + mix.name + " " + tag + "\n");
    const TrainResult tr = stage("train " + tag, log, [&] {
      return train_policy(exploit, cfg, mix, nullptr, dir / "train", jobs, log);
    });

    std::ostringstream curve;
    curve << "step,exploit_freq,mean_reward,mean_clean_reward,mean_cond_kl\n";
    double max_freq = 0.0, final_freq = 0.0;
    for (const auto& snap : tr.rloo->snapshots) {
      const PolicyStats st = measure_policy(snap.params, ref, probe, exploit.reward,
                                            cfg.evaluation.sampling, kOveroptSamplesPerPrompt);
      const PolicyStats cl = measure_policy(snap.params, ref, probe, ws.judge_reward,
                                            cfg.evaluation.sampling, kOveroptSamplesPerPrompt);
      curve << snap.step << ',' << fmt("%.6f", st.exploit_freq) << ','
            << fmt("%.6f", st.mean_reward) << ',' << fmt("%.6f", cl.mean_reward) << ','
            << fmt("%.6f", st.mean_cond_kl) << '\n';
      max_freq = std::max(max_freq, st.exploit_freq);
      final_freq = st.exploit_freq;
    }
    write_text(dir / "exploit_curve.csv", curve.str());

    // Final policy against the reference, judged by both the clean and the biased reward.
    const EvalResult ev = stage("eval " + tag, log, [&] {
      return evaluate_policies(ws, cfg, tr.final_params, ref, mix, dir / "eval", jobs, log);
    });
    std::vector<JudgedPair> pairs;
    for (std::size_t i = 0; i < probe[0].prompts.size(); ++i) {
      const auto& p = probe[0].prompts[i];
      auto rng = make_engine(cfg.evaluation.sampling.seed, {43, i});
      auto rng_ref = rng;
      pairs.push_back({p, sample(tr.final_params, p, cfg.evaluation.sampling, rng),
                       sample(ref, p, cfg.evaluation.sampling, rng_ref)});
    }
    const AgreementResult agree = agreement(clean, biased, pairs);

    rows.push_back({tag + " final (clean judge)", ev.seen_row});
    res.metrics[tag + ".max_exploit"] = max_freq;
    res.metrics[tag + ".final_exploit"] = final_freq;
    res.metrics[tag + ".clean_dwl"] = ev.seen_row.delta_wl;
    res.metrics[tag + ".judge_agreement"] = agree.rate;
    text += tag + ": exploit frequency max " + fmt("%.3f", max_freq) + ", final " +
            fmt("%.3f", final_freq) + "; clean/biased judge agreement " +
            fmt("%.3f", agree.rate) + "; best checkpoint by clean judge " + tr.best_name + "\n";
  }
  text += "\n" + format_table("final policy vs reference on " + mix.name, rows) + "\n";
  res.summary = text;
  res.verdicts.push_back({"beta=0: exploit frequency crosses 0.5 (max " +
                              fmt("%.3f", res.metrics["beta0.max_exploit"]) + ")",
                          res.metrics["beta0.max_exploit"] > 0.5});
  res.verdicts.push_back({"beta=0.5: exploit frequency stays below 0.5 (max " +
                              fmt("%.3f", res.metrics["beta0.5.max_exploit"]) + ")",
                          res.metrics["beta0.5.max_exploit"] < 0.5});
}

}  // namespace

std::vector<std::string> experiment_preset_names() {
  return {"transfer", "mixtures", "dpo-vs-rloo", "overopt"};
}

ExperimentResult cmd_experiment(const std::string& preset, const ExperimentConfig& base,
                                const RunOptions& opts) {
  const auto names = experiment_preset_names();
  if (std::find(names.begin(), names.end(), preset) == names.end()) {
    std::string known;
    for (const auto& n : names) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown experiment preset \"" + preset + "\" (known: " + known + ")");
  }
  const fs::path root = opts.out / preset;
  ExperimentResult res;
  res.preset = preset;

  const Workspace ws = stage("prepare", opts.log, [&] { return prepare_workspace(base); });
  write_text(root / "config.json", emit_config(base));
  write_manifest(root / "env", ws.env, ws.channel.marker_rate);

  if (preset == "transfer") transfer_preset(ws, base, root, opts.jobs, opts.log, res);
  else if (preset == "mixtures") mixtures_preset(ws, base, root, opts.jobs, opts.log, res);
  else if (preset == "dpo-vs-rloo") dpo_vs_rloo_preset(ws, base, root, opts.jobs, opts.log, res);
  else overopt_preset(ws, base, root, opts.jobs, opts.log, res);

  res.summary = "experiment " + preset + "\n\n" + res.summary + verdict_text(res.verdicts);
  std::ostringstream csv;
  csv << "metric,value\n";
  for (const auto& [k, v] : res.metrics) csv << k << ',' << fmt("%.6g", v) << '\n';
  write_text(root / "summary.txt", res.summary);
  write_text(root / "metrics.csv", csv.str());
  say(opts.log, "\n" + res.summary);
  return res;
}

}  // namespace mlpo
