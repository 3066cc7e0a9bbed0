#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace mlpo {

using Engine = std::mt19937_64;

// A named position in the seed tree: (root seed, path of indices). Every
// stochastic draw in the library comes from an engine built from one of these,
// so results depend only on the path and never on call order or threading.
class SeedPath {
 public:
  explicit SeedPath(std::uint64_t root) : root_(root) {}
  SeedPath(std::uint64_t root, std::initializer_list<std::uint64_t> path) : root_(root), path_(path) {}

  SeedPath child(std::uint64_t index) const;
  SeedPath child(std::initializer_list<std::uint64_t> indices) const;

  Engine engine() const;

  std::uint64_t root() const { return root_; }

 private:
  std::uint64_t root_;
  std::vector<std::uint64_t> path_;
};

inline Engine make_engine(std::uint64_t seed, std::initializer_list<std::uint64_t> path = {}) {
  return SeedPath(seed, path).engine();
}

// Uniform draw in [0, 1).
double uniform01(Engine& rng);

}  // namespace mlpo
