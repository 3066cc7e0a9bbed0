#include "mlpo/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mlpo/errors.hpp"
#include "mlpo/io.hpp"
#include "mlpo/mixtures.hpp"

namespace mlpo {

using nlohmann::json;

namespace {

// Reads fields of one JSON object, remembering which keys were consumed so
// that typos surface as errors instead of silently using defaults.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_unsigned_v<T>) {
        if (!it->is_number_unsigned()) throw ConfigError(field(key) + ": expected a non-negative integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError(field(key) + ": expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) throw ConfigError(field(key) + ": expected a string");
      }
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(field(key) + ": " + e.what());
    }
  }

  template <class T>
  void get_optional(const std::string& key, std::optional<T>& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    if (it->is_null()) {
      out.reset();
      return;
    }
    T value{};
    get(key, value);
    out = value;
  }

  std::optional<Section> sub(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return std::nullopt;
    return Section(*it, field(key));
  }

  const json* raw(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(field(it.key()) + ": unknown field");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json reward_json(const RewardWeights& w) {
  return {{"in_language_weight", w.in_language_weight},
          {"marker_penalty", w.marker_penalty},
          {"length_target", w.length_target ? json(*w.length_target) : json(nullptr)},
          {"length_weight", w.length_weight},
          {"exploit_bonus", w.exploit_bonus}};
}

void read_reward(Section s, RewardWeights& w) {
  s.get("in_language_weight", w.in_language_weight);
  s.get("marker_penalty", w.marker_penalty);
  s.get_optional("length_target", w.length_target);
  s.get("length_weight", w.length_weight);
  s.get("exploit_bonus", w.exploit_bonus);
  s.finish();
}

void read_sampling(Section s, SamplingConfig& c) {
  s.get("temperature", c.temperature);
  s.get("max_len", c.max_len);
  s.get("seed", c.seed);
  s.finish();
}

// Rethrows a validation failure from a component with the field prefix attached.
template <class F>
void checked(const std::string& prefix, F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + ": " + e.what());
  }
}

}  // namespace

std::string_view to_string(TrainerKind kind) { return kind == TrainerKind::Dpo ? "dpo" : "rloo"; }

TrainerKind trainer_from_string(std::string_view text) {
  if (text == "dpo") return TrainerKind::Dpo;
  if (text == "rloo") return TrainerKind::Rloo;
  throw ConfigError("trainer.kind: expected \"dpo\" or \"rloo\", got \"" + std::string(text) + "\"");
}

MixtureSpec ExperimentConfig::resolved_mixture() const {
  if (mixture) return *mixture;
  return mlpo::mixture_preset(mixture_preset, environment.num_languages);
}

RewardWeights ExperimentConfig::judge_weights() const {
  if (evaluation.judge_reward) return *evaluation.judge_reward;
  RewardWeights w = reward;
  w.exploit_bonus = 0.0;
  return w;
}

void ExperimentConfig::validate() const {
  if (environment.num_languages == 0) throw ConfigError("environment.num_languages must be >= 1");
  if (environment.vocab_size < 2) throw ConfigError("environment.vocab_size must be >= 2");
  if (!(environment.universal_fraction >= 0.0 && environment.universal_fraction < 1.0))
    throw ConfigError("environment.universal_fraction must be in [0, 1)");
  checked("reward", [&] { reward.validate(); });
  checked("data", [&] { data.gen.validate(); });
  if (data.marker_rate && !(*data.marker_rate >= 0.0 && *data.marker_rate <= 1.0))
    throw ConfigError("data.marker_rate must be in [0, 1]");
  if (!(data.calibration_target > 0.0 && data.calibration_target < 1.0))
    throw ConfigError("data.calibration_target must be in (0, 1)");
  if (data.calibration_pairs == 0) throw ConfigError("data.calibration_pairs must be >= 1");
  checked("mixture", [&] {
    const MixtureSpec m = resolved_mixture();
    validate_mixture(m);
    for (auto lang : m.languages) {
      if (lang.id >= environment.num_languages)
        throw ConfigError("language " + lang.name() + " is outside the environment");
    }
  });
  checked("trainer.dpo", [&] { trainer.dpo.validate(); });
  checked("trainer.rloo", [&] { trainer.rloo.validate(); });
  if (evaluation.prompts_per_language == 0)
    throw ConfigError("evaluation.prompts_per_language must be >= 1");
  if (evaluation.validation_prompts_per_language == 0)
    throw ConfigError("evaluation.validation_prompts_per_language must be >= 1");
  if (!(evaluation.tie_epsilon >= 0.0)) throw ConfigError("evaluation.tie_epsilon must be >= 0");
  checked("evaluation.sampling", [&] { evaluation.sampling.validate(); });
  if (evaluation.judge_reward) checked("evaluation.judge_reward", [&] { evaluation.judge_reward->validate(); });
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

std::string emit_config(const ExperimentConfig& c) {
  json j;
  j["environment"] = {{"num_languages", c.environment.num_languages},
                      {"vocab_size", c.environment.vocab_size},
                      {"universal_fraction", c.environment.universal_fraction},
                      {"seed", c.environment.seed}};
  j["reward"] = reward_json(c.reward);
  j["data"] = {{"prompt_len", c.data.gen.prompt_len},
               {"completion_len", c.data.gen.completion_len},
               {"seed", c.data.gen.seed},
               {"tie_epsilon", c.data.gen.tie_epsilon},
               {"marker_rate", optional_json(c.data.marker_rate)},
               {"calibration_target", c.data.calibration_target},
               {"calibration_pairs", c.data.calibration_pairs},
               {"check_pairs", c.data.check_pairs}};
  j["mixture_preset"] = c.mixture_preset;
  j["mixture"] = c.mixture ? json::parse(encode_mixture_json(*c.mixture)) : json(nullptr);
  const auto& d = c.trainer.dpo;
  const auto& r = c.trainer.rloo;
  j["trainer"] = {{"kind", std::string(to_string(c.trainer.kind))},
                  {"dpo",
                   {{"beta", d.beta},
                    {"learning_rate", d.learning_rate},
                    {"epochs", d.epochs},
                    {"batch_size", d.batch_size},
                    {"seed", d.seed},
                    {"max_len", d.max_len}}},
                  {"rloo",
                   {{"k", r.k},
                    {"beta", r.beta},
                    {"temperature", r.temperature},
                    {"learning_rate", r.learning_rate},
                    {"epochs", r.epochs},
                    {"prompts_per_step", r.prompts_per_step},
                    {"seed", r.seed},
                    {"max_len", r.max_len},
                    {"checkpoint_every", r.checkpoint_every}}}};
  const auto& e = c.evaluation;
  j["evaluation"] = {{"prompts_per_language", e.prompts_per_language},
                     {"validation_prompts_per_language", e.validation_prompts_per_language},
                     {"prompt_seed", e.prompt_seed},
                     {"tie_epsilon", e.tie_epsilon},
                     {"position_seed", e.position_seed},
                     {"sampling",
                      {{"temperature", e.sampling.temperature},
                       {"max_len", e.sampling.max_len},
                       {"seed", e.sampling.seed}}},
                     {"judge_reward", e.judge_reward ? reward_json(*e.judge_reward) : json(nullptr)}};
  j["output_dir"] = c.output_dir;
  return j.dump(2) + "\n";
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  Section root(j, "");

  if (auto s = root.sub("environment")) {
    s->get("num_languages", c.environment.num_languages);
    s->get("vocab_size", c.environment.vocab_size);
    s->get("universal_fraction", c.environment.universal_fraction);
    s->get("seed", c.environment.seed);
    s->finish();
  }
  if (auto s = root.sub("reward")) read_reward(*s, c.reward);
  if (auto s = root.sub("data")) {
    s->get("prompt_len", c.data.gen.prompt_len);
    s->get("completion_len", c.data.gen.completion_len);
    s->get("seed", c.data.gen.seed);
    s->get("tie_epsilon", c.data.gen.tie_epsilon);
    s->get_optional("marker_rate", c.data.marker_rate);
    s->get("calibration_target", c.data.calibration_target);
    s->get("calibration_pairs", c.data.calibration_pairs);
    s->get("check_pairs", c.data.check_pairs);
    s->finish();
  }
  root.get("mixture_preset", c.mixture_preset);
  if (const json* m = root.raw("mixture"); m && !m->is_null()) {
    try {
      c.mixture = decode_mixture_json(m->dump());
    } catch (const std::exception& e) {
      throw ConfigError(std::string("mixture: ") + e.what());
    }
  }
  if (auto s = root.sub("trainer")) {
    std::string kind(to_string(c.trainer.kind));
    s->get("kind", kind);
    c.trainer.kind = trainer_from_string(kind);
    if (auto d = s->sub("dpo")) {
      auto& x = c.trainer.dpo;
      d->get("beta", x.beta);
      d->get("learning_rate", x.learning_rate);
      d->get("epochs", x.epochs);
      d->get("batch_size", x.batch_size);
      d->get("seed", x.seed);
      d->get("max_len", x.max_len);
      d->finish();
    }
    if (auto r = s->sub("rloo")) {
      auto& x = c.trainer.rloo;
      r->get("k", x.k);
      r->get("beta", x.beta);
      r->get("temperature", x.temperature);
      r->get("learning_rate", x.learning_rate);
      r->get("epochs", x.epochs);
      r->get("prompts_per_step", x.prompts_per_step);
      r->get("seed", x.seed);
      r->get("max_len", x.max_len);
      r->get("checkpoint_every", x.checkpoint_every);
      r->finish();
    }
    s->finish();
  }
  if (auto s = root.sub("evaluation")) {
    auto& e = c.evaluation;
    s->get("prompts_per_language", e.prompts_per_language);
    s->get("validation_prompts_per_language", e.validation_prompts_per_language);
    s->get("prompt_seed", e.prompt_seed);
    s->get("tie_epsilon", e.tie_epsilon);
    s->get("position_seed", e.position_seed);
    if (auto samp = s->sub("sampling")) read_sampling(*samp, e.sampling);
    if (auto jr = s->sub("judge_reward")) {
      RewardWeights w;
      read_reward(*jr, w);
      e.judge_reward = w;
    }
    s->finish();
  }
  root.get("output_dir", c.output_dir);
  root.finish();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void apply_seed(ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.environment.seed = seed;
  cfg.data.gen.seed = seed;
  cfg.trainer.dpo.seed = seed;
  cfg.trainer.rloo.seed = seed;
  cfg.evaluation.prompt_seed = seed;
  cfg.evaluation.position_seed = seed;
  cfg.evaluation.sampling.seed = seed;
}

}  // namespace mlpo
