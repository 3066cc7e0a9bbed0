#include "mlpo/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace mlpo {

using nlohmann::json;

namespace {

std::string fmt_g(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, x);
  return buf;
}

void append_tokens(std::string& out, const std::vector<Token>& toks) {
  out += '[';
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(toks[i]);
  }
  out += ']';
}

std::vector<Token> tokens_from(const json& j, const char* field) {
  if (!j.contains(field) || !j.at(field).is_array()) {
    throw LoadError(std::string("record field '") + field + "' missing or not an array");
  }
  std::vector<Token> out;
  for (const auto& v : j.at(field)) {
    if (!v.is_number_unsigned()) throw LoadError(std::string("non-token entry in '") + field + "'");
    out.push_back(v.get<Token>());
  }
  return out;
}

json mixture_to_json(const MixtureSpec& spec) {
  json j = json::object();
  j["name"] = spec.name;
  std::vector<std::uint32_t> langs;
  for (auto l : spec.languages) langs.push_back(l.id);
  j["languages"] = langs;
  if (const auto* f = std::get_if<FixedTotal>(&spec.mode)) {
    j["mode"] = "fixed_total";
    j["total"] = f->total;
  } else {
    j["mode"] = "per_language";
    j["count"] = std::get<PerLanguage>(spec.mode).count;
  }
  return j;
}

MixtureSpec mixture_from_json(const json& j) {
  MixtureSpec spec;
  spec.name = j.value("name", std::string{});
  for (auto id : j.at("languages")) spec.languages.push_back(LanguageId{id.get<std::uint32_t>()});
  const auto mode = j.at("mode").get<std::string>();
  if (mode == "fixed_total") {
    spec.mode = FixedTotal{j.at("total").get<std::size_t>()};
  } else if (mode == "per_language") {
    spec.mode = PerLanguage{j.at("count").get<std::size_t>()};
  } else {
    throw ConfigError("mixture.mode must be fixed_total or per_language, got '" + mode + "'");
  }
  return spec;
}

}  // namespace

std::string encode_pair(const PreferencePair& pair) {
  std::string out = "{\"lang\":" + std::to_string(pair.prompt.lang.id) + ",\"prompt\":";
  append_tokens(out, pair.prompt.tokens);
  out += ",\"chosen\":";
  append_tokens(out, pair.chosen.tokens);
  out += ",\"rejected\":";
  append_tokens(out, pair.rejected.tokens);
  out += ",\"ch_chosen\":\"";
  out += to_string(pair.channel_chosen);
  out += "\",\"ch_rejected\":\"";
  out += to_string(pair.channel_rejected);
  out += "\",\"margin\":" + fmt_g(pair.labeler_margin, 9) + "}";
  return out;
}

PreferencePair decode_pair(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw LoadError(std::string("malformed JSONL record: ") + e.what());
  }
  if (!j.is_object()) throw LoadError("JSONL record is not an object");
  try {
    PreferencePair p;
    const LanguageId lang{j.at("lang").get<std::uint32_t>()};
    p.prompt = Prompt{tokens_from(j, "prompt"), lang};
    p.chosen = Completion{tokens_from(j, "chosen"), lang};
    p.rejected = Completion{tokens_from(j, "rejected"), lang};
    p.channel_chosen = channel_from_string(j.at("ch_chosen").get<std::string>());
    p.channel_rejected = channel_from_string(j.at("ch_rejected").get<std::string>());
    p.labeler_margin = j.at("margin").get<double>();
    return p;
  } catch (const json::exception& e) {
    throw LoadError(std::string("bad JSONL record: ") + e.what());
  } catch (const ConfigError& e) {
    throw LoadError(std::string("bad JSONL record: ") + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string encode_mixture_json(const MixtureSpec& spec) { return mixture_to_json(spec).dump(); }

MixtureSpec decode_mixture_json(const std::string& text) { return mixture_from_json(json::parse(text)); }

void write_dataset(const fs::path& path, const Dataset& data) {
  std::string body;
  for (const auto& p : data.pairs) {
    body += encode_pair(p);
    body += '\n';
  }
  write_text(path, body);
  json meta = {{"mixture", mixture_to_json(data.mixture)}, {"seed", data.seed}};
  write_text(fs::path(path.string() + ".meta.json"), meta.dump(2) + "\n");
}

Dataset read_dataset(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot read dataset " + path.string());
  Dataset ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      ds.pairs.push_back(decode_pair(line));
    } catch (const LoadError& e) {
      throw LoadError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  const fs::path meta_path(path.string() + ".meta.json");
  if (fs::exists(meta_path)) {
    const auto meta = json::parse(read_text(meta_path));
    ds.mixture = mixture_from_json(meta.at("mixture"));
    ds.seed = meta.at("seed").get<std::uint64_t>();
  }
  return ds;
}

std::string encode_checkpoint(const PolicyParams& params) {
  std::string out = "mlpo-policy 1\n";
  out += "V " + std::to_string(params.vocab.size) + " K " + std::to_string(params.num_languages) +
         " F " + std::to_string(params.num_features()) + "\n";
  for (std::size_t r = 0; r < params.weights.rows(); ++r) {
    const auto row = params.weights.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ' ';
      out += fmt_g(row[c], 17);
    }
    out += '\n';
  }
  return out;
}

PolicyParams decode_checkpoint(const std::string& text) {
  std::istringstream in(text);
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "mlpo-policy" || version != 1) throw LoadError("not an mlpo-policy v1 checkpoint");
  std::string tv, tk, tf;
  std::uint32_t v = 0, k = 0;
  std::size_t f = 0;
  in >> tv >> v >> tk >> k >> tf >> f;
  if (!in || tv != "V" || tk != "K" || tf != "F") throw LoadError("bad checkpoint header");
  if (v < 2 || k < 1 || f != static_cast<std::size_t>(v) + k + 1) {
    throw LoadError("inconsistent checkpoint header (V=" + std::to_string(v) +
                    ", K=" + std::to_string(k) + ", F=" + std::to_string(f) + ")");
  }
  auto params = PolicyParams::zeros(VocabSpec{v}, k);
  for (auto& x : params.weights.flat()) {
    // operator>> rejects "inf"/"nan", so read tokens and convert.
    std::string tok;
    if (!(in >> tok)) throw LoadError("checkpoint truncated");
    try {
      x = std::stod(tok);
    } catch (const std::exception&) {
      throw LoadError("bad checkpoint value '" + tok + "'");
    }
  }
  std::string extra;
  if (in >> extra) throw LoadError("trailing data in checkpoint");
  try {
    params.validate();
  } catch (const ConfigError& e) {
    throw LoadError(e.what());
  }
  return params;
}

void save_checkpoint(const fs::path& path, const PolicyParams& params) {
  write_text(path, encode_checkpoint(params));
}

PolicyParams load_checkpoint(const fs::path& path) {
  try {
    return decode_checkpoint(read_text(path));
  } catch (const LoadError& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
}

PolicyParams load_checkpoint(const fs::path& path, std::uint32_t expected_v,
                             std::uint32_t expected_k) {
  auto p = load_checkpoint(path);
  if (p.vocab.size != expected_v || p.num_languages != expected_k) {
    throw LoadError(path.string() + ": shape mismatch, expected (V=" + std::to_string(expected_v) +
                    ", K=" + std::to_string(expected_k) + "), got (V=" +
                    std::to_string(p.vocab.size) + ", K=" + std::to_string(p.num_languages) + ")");
  }
  return p;
}

std::string dpo_history_csv(const DpoHistory& history) {
  std::string out = "epoch,step,mean_loss,mean_margin,grad_norm\n";
  for (const auto& r : history.steps) {
    out += std::to_string(r.epoch) + ',' + std::to_string(r.step) + ',' + fmt_g(r.mean_loss, 9) +
           ',' + fmt_g(r.mean_margin, 9) + ',' + fmt_g(r.grad_norm, 9) + '\n';
  }
  return out;
}

std::string rloo_history_csv(const std::vector<RlooRecord>& history) {
  std::string out =
      "step,lang,mean_reward_raw,mean_reward_shaped,mean_cond_kl,grad_norm,exploit_freq\n";
  for (const auto& r : history) {
    out += std::to_string(r.step) + ',' + std::to_string(r.lang.id) + ',' +
           fmt_g(r.mean_reward_raw, 9) + ',' + fmt_g(r.mean_reward_shaped, 9) + ',' +
           fmt_g(r.mean_cond_kl, 9) + ',' + fmt_g(r.grad_norm, 9) + ',' +
           fmt_g(r.exploit_freq, 9) + '\n';
  }
  return out;
}

fs::path write_manifest(const fs::path& dir, const Environment& env,
                        std::optional<double> marker_rate) {
  json j = json::object();
  j["vocab_size"] = env.vocab.size;
  j["num_languages"] = env.num_languages();
  j["universal_fraction"] = env.universal_fraction;
  j["seed"] = env.seed;
  j["exploit_token"] = env.exploit_token;
  j["universal_tokens"] = env.universal_tokens;
  if (marker_rate) j["marker_rate"] = *marker_rate;
  json langs = json::array();
  for (const auto& p : env.profiles) {
    const std::string rel = "generators/" + p.lang.name() + ".ckpt";
    save_checkpoint(dir / rel, p.generator);
    json l = json::object();
    l["id"] = p.lang.id;
    l["name"] = p.lang.name();
    l["preferred"] = p.preferred_tokens;
    l["markers"] = p.marker_tokens;
    l["generator_strength"] = p.generator_strength;
    l["generator"] = rel;
    langs.push_back(l);
  }
  j["languages"] = langs;
  const fs::path path = dir / "manifest.json";
  write_text(path, j.dump(2) + "\n");
  return path;
}

Environment read_manifest(const fs::path& manifest_path) {
  json j;
  try {
    j = json::parse(read_text(manifest_path));
  } catch (const json::exception& e) {
    throw LoadError(manifest_path.string() + ": " + e.what());
  }
  try {
    Environment env;
    env.vocab = VocabSpec::make(j.at("vocab_size").get<std::uint32_t>());
    env.universal_fraction = j.at("universal_fraction").get<double>();
    env.seed = j.at("seed").get<std::uint64_t>();
    env.exploit_token = j.at("exploit_token").get<Token>();
    env.universal_tokens = j.at("universal_tokens").get<std::vector<Token>>();
    const auto k = j.at("num_languages").get<std::uint32_t>();
    const fs::path base = manifest_path.parent_path();
    for (const auto& l : j.at("languages")) {
      LanguageProfile p;
      p.lang = LanguageId{l.at("id").get<std::uint32_t>()};
      p.preferred_tokens = l.at("preferred").get<std::vector<Token>>();
      p.marker_tokens = l.at("markers").get<std::vector<Token>>();
      p.generator_strength = l.at("generator_strength").get<double>();
      p.generator = load_checkpoint(base / l.at("generator").get<std::string>(), env.vocab.size, k);
      env.profiles.push_back(std::move(p));
    }
    if (env.profiles.size() != k) throw LoadError("manifest language count mismatch");
    return env;
  } catch (const json::exception& e) {
    throw LoadError(manifest_path.string() + ": " + e.what());
  }
}

std::optional<double> read_manifest_marker_rate(const fs::path& manifest_path) {
  const auto j = json::parse(read_text(manifest_path));
  if (j.contains("marker_rate")) return j.at("marker_rate").get<double>();
  return std::nullopt;
}

}  // namespace mlpo
