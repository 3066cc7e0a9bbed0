#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include "mlpo/policy.hpp"
#include "mlpo/types.hpp"

namespace mlpo::testing {

inline PolicyParams random_params(std::uint32_t v, std::uint32_t k, std::uint64_t seed,
                                  double scale = 1.0) {
  PolicyParams p = PolicyParams::zeros(VocabSpec::make(v), k);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  for (double& w : p.weights.flat()) w = n(rng);
  return p;
}

inline Completion completion(std::vector<Token> content, const VocabSpec& vocab,
                             LanguageId lang = {}) {
  content.push_back(vocab.eos());
  return {std::move(content), lang};
}

// Fresh scratch directory for a test; removed and recreated on each call.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const char* base = std::getenv("MLPO_TEST_TMP");
  std::filesystem::path dir =
      std::filesystem::path(base ? base : std::filesystem::temp_directory_path().string()) /
      ("mlpo_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// |a - b| <= rtol * max(|a|, |b|, floor)
inline bool close_rel(double a, double b, double rtol, double floor = 1e-3) {
  return std::abs(a - b) <= rtol * std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace mlpo::testing
