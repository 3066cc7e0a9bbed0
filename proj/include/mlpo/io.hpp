#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mlpo/dpo.hpp"
#include "mlpo/policy.hpp"
#include "mlpo/rloo.hpp"
#include "mlpo/synthlang.hpp"
#include "mlpo/types.hpp"

namespace mlpo {

namespace fs = std::filesystem;

// One JSONL record, fields in fixed order:
//   {"lang":0,"prompt":[..],"chosen":[..],"rejected":[..],
//    "ch_chosen":"direct","ch_rejected":"translated","margin":0.25}
// margin is printed with 9 significant digits.
std::string encode_pair(const PreferencePair& pair);
// Throws LoadError on malformed records.
PreferencePair decode_pair(const std::string& line);

void write_dataset(const fs::path& path, const Dataset& data);
// Reads the JSONL records and, when present, the provenance sidecar
// (<path>.meta.json) written by write_dataset.
Dataset read_dataset(const fs::path& path);

std::string encode_mixture_json(const MixtureSpec& spec);
MixtureSpec decode_mixture_json(const std::string& text);

// Text checkpoint: a header line "mlpo-policy 1", a shape line "V <V> K <K> F <F>",
// then F rows of V values at full precision.
std::string encode_checkpoint(const PolicyParams& params);
PolicyParams decode_checkpoint(const std::string& text);

void save_checkpoint(const fs::path& path, const PolicyParams& params);
PolicyParams load_checkpoint(const fs::path& path);
// Also checks the shape; LoadError names expected and actual (V, K).
PolicyParams load_checkpoint(const fs::path& path, std::uint32_t expected_v,
                             std::uint32_t expected_k);

std::string dpo_history_csv(const DpoHistory& history);
std::string rloo_history_csv(const std::vector<RlooRecord>& history);

// Environment manifest (JSON) with generator checkpoints under
// <dir>/generators/. Returns the manifest path.
fs::path write_manifest(const fs::path& dir, const Environment& env,
                        std::optional<double> marker_rate = std::nullopt);
Environment read_manifest(const fs::path& manifest_path);
std::optional<double> read_manifest_marker_rate(const fs::path& manifest_path);

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

}  // namespace mlpo
