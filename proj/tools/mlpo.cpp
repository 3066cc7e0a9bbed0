#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mlpo/config.hpp"
#include "mlpo/errors.hpp"
#include "mlpo/pipeline.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mlpo: multilingual preference optimization on a synthetic environment"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config (JSON); defaults when omitted");
    sub->add_option("--out", out_dir, "output directory (overrides config)");
    sub->add_option("--seed", seed, "seed for every stochastic stage (overrides config)");
    sub->add_option("--jobs", jobs, "worker threads; results do not depend on it")
        ->check(CLI::PositiveNumber);
  };

  auto* gen = app.add_subcommand("gen-data", "build the environment and the preference dataset");
  auto* train = app.add_subcommand("train", "train a policy (trainer.kind in the config)");
  auto* eval = app.add_subcommand("eval", "judge checkpoint A against checkpoint B");
  auto* report = app.add_subcommand("report", "print every report and summary under --out");
  auto* exp = app.add_subcommand("experiment", "run a preset end to end");
  for (auto* sub : {gen, train, eval, report, exp}) add_common(sub);

  std::string ckpt_a, ckpt_b;
  eval->add_option("checkpoint_a", ckpt_a, "default: <out>/train/best.ckpt");
  eval->add_option("checkpoint_b", ckpt_b, "default: <out>/train/ref.ckpt");
  std::string preset;
  exp->add_option("preset", preset, "transfer | mixtures | dpo-vs-rloo | overopt")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    mlpo::ExperimentConfig cfg =
        config_path.empty() ? mlpo::ExperimentConfig{} : mlpo::load_config(config_path);
    if (seed) mlpo::apply_seed(cfg, *seed);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    cfg.validate();

    mlpo::RunOptions opts{cfg.output_dir, jobs, &std::cout};
    if (gen->parsed()) {
      mlpo::cmd_gen_data(cfg, opts);
    } else if (train->parsed()) {
      mlpo::cmd_train(cfg, opts);
    } else if (eval->parsed()) {
      const auto a = ckpt_a.empty() ? opts.out / "train" / "best.ckpt" : mlpo::fs::path(ckpt_a);
      const auto b = ckpt_b.empty() ? opts.out / "train" / "ref.ckpt" : mlpo::fs::path(ckpt_b);
      mlpo::cmd_eval(cfg, a, b, opts);
    } else if (report->parsed()) {
      std::cout << mlpo::cmd_report(opts);
    } else if (exp->parsed()) {
      mlpo::cmd_experiment(preset, cfg, opts);
    }
  } catch (const mlpo::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const mlpo::TrainingAborted& e) {
    std::cerr << "training aborted at step " << e.step() << ": " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
