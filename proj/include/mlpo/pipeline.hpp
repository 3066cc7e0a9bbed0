#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mlpo/config.hpp"
#include "mlpo/dpo.hpp"
#include "mlpo/eval.hpp"
#include "mlpo/policy.hpp"
#include "mlpo/rloo.hpp"
#include "mlpo/synthlang.hpp"

namespace mlpo {

namespace fs = std::filesystem;

struct RunOptions {
  fs::path out = "out";
  unsigned jobs = 1;
  std::ostream* log = nullptr;  // null: silent
};

// Environment plus the rewards and translation channel derived from a config.
struct Workspace {
  Environment env;
  RewardSpec reward;        // labeler / training reward
  RewardSpec judge_reward;  // clean scoring basis for evaluation
  TranslationChannel channel;
  std::optional<CalibrationResult> calibration;  // set when marker_rate was calibrated
};

// Builds the environment and calibrates the marker rate unless the config fixes it.
Workspace prepare_workspace(const ExperimentConfig& cfg);

JudgeSpec make_judge(const Workspace& ws, const ExperimentConfig& cfg);

// The uniform reference policy every trainer starts from.
PolicyParams reference_policy(const Environment& env);

// Training prompts for the mixture's allocation; pivot prompts shared across languages.
PromptMixture training_prompts(const Environment& env, const MixtureSpec& mixture,
                               const DataGenConfig& gen);

enum class HeldOut { Test, Validation };

// Prompts disjoint from every training prompt, one list per language in `langs`.
PromptMixture heldout_prompts(const Environment& env, const std::vector<LanguageId>& langs,
                              const ExperimentConfig& cfg, HeldOut which);

struct GenDataResult {
  Dataset dataset;
  double marker_rate = 0.0;
  double dataset_rejected_fraction = 0.0;
  double check_rejected_fraction = 0.0;  // fresh sample of cfg.data.check_pairs pairs
  fs::path dataset_path;
  fs::path manifest_path;
};

struct CandidateScore {
  std::string name;
  WinRateRow vs_ref;  // on validation prompts of the training languages
};

struct TrainResult {
  TrainerKind kind = TrainerKind::Rloo;
  PolicyParams final_params;
  PolicyParams best_params;
  std::string best_name;
  std::vector<CandidateScore> candidates;
  std::optional<DpoResult> dpo;
  std::optional<RlooResult> rloo;
};

struct EvalResult {
  WinRateReport report;
  std::vector<LanguageId> seen;
  std::vector<LanguageId> unseen;
  WinRateRow seen_row;
  WinRateRow unseen_row;
};

// Stage functions over an already prepared workspace; `dir` receives artifacts.
GenDataResult generate_data(const Workspace& ws, const ExperimentConfig& cfg,
                            const MixtureSpec& mixture, const fs::path& dir, unsigned jobs,
                            std::ostream* log);
TrainResult train_policy(const Workspace& ws, const ExperimentConfig& cfg,
                         const MixtureSpec& mixture, const Dataset* dataset, const fs::path& dir,
                         unsigned jobs, std::ostream* log);
EvalResult evaluate_policies(const Workspace& ws, const ExperimentConfig& cfg,
                             const PolicyParams& a, const PolicyParams& b,
                             const MixtureSpec& mixture, const fs::path& dir, unsigned jobs,
                             std::ostream* log);

// Subcommands. Artifacts land under opts.out:
//   data/dataset.jsonl, data/manifest.json        gen-data
//   train/*.ckpt, train/history.csv, train/summary.txt   train
//   eval/report.csv, eval/report.txt              eval
GenDataResult cmd_gen_data(const ExperimentConfig& cfg, const RunOptions& opts);
TrainResult cmd_train(const ExperimentConfig& cfg, const RunOptions& opts);
EvalResult cmd_eval(const ExperimentConfig& cfg, const fs::path& checkpoint_a,
                    const fs::path& checkpoint_b, const RunOptions& opts);
// Concatenates every report.txt and summary.txt under opts.out.
std::string cmd_report(const RunOptions& opts);

struct VerdictLine {
  std::string check;
  bool passed = false;
};

struct ExperimentResult {
  std::string preset;
  std::string summary;  // the text written to summary.txt
  std::vector<VerdictLine> verdicts;
  std::map<std::string, double> metrics;
};

std::vector<std::string> experiment_preset_names();

// Runs a named preset end to end under opts.out/<preset>/. Throws ConfigError
// for unknown presets; a failing stage is logged with its name and rethrown.
ExperimentResult cmd_experiment(const std::string& preset, const ExperimentConfig& base,
                                const RunOptions& opts);

}  // namespace mlpo
