#include "mlpo/rng.hpp"

namespace mlpo {

SeedPath SeedPath::child(std::uint64_t index) const {
  SeedPath out = *this;
  out.path_.push_back(index);
  return out;
}

SeedPath SeedPath::child(std::initializer_list<std::uint64_t> indices) const {
  SeedPath out = *this;
  out.path_.insert(out.path_.end(), indices);
  return out;
}

Engine SeedPath::engine() const {
  std::vector<std::uint32_t> words;
  words.reserve(2 * (path_.size() + 1) + 1);
  auto push = [&](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(root_);
  // Length tag keeps (a) and (a, 0) apart.
  words.push_back(static_cast<std::uint32_t>(path_.size()));
  for (auto v : path_) push(v);
  std::seed_seq seq(words.begin(), words.end());
  return Engine(seq);
}

double uniform01(Engine& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace mlpo
