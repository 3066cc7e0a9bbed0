#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mlpo/errors.hpp"

namespace mlpo {

using Token = std::uint32_t;

// Hard cap on completion content tokens. A completion that reaches it gets a
// forced eos, which carries probability one.
inline constexpr std::size_t kDefaultMaxLen = 8;
inline constexpr std::size_t kDefaultMaxPromptLen = 16;

struct LanguageId {
  std::uint32_t id = 0;

  // Generated label: "L00", "L01", ...
  std::string name() const;

  auto operator<=>(const LanguageId&) const = default;
};

// Language 0 plays the pivot ("English") role.
inline constexpr LanguageId kPivotLanguage{0};

class LanguageRegistry {
 public:
  explicit LanguageRegistry(std::size_t num_languages);

  std::size_t size() const { return size_; }
  bool contains(LanguageId lang) const { return lang.id < size_; }
  // Throws RegistryError when `lang` is out of range.
  void check(LanguageId lang) const;
  std::vector<LanguageId> ids() const;

 private:
  std::size_t size_;
};

// V tokens, the last of which (V - 1) is the reserved end-of-sequence token.
struct VocabSpec {
  std::uint32_t size = 0;

  Token eos() const { return size - 1; }
  // Number of non-eos tokens.
  std::uint32_t content_size() const { return size - 1; }
  bool contains(Token t) const { return t < size; }

  static VocabSpec make(std::uint32_t size);

  bool operator==(const VocabSpec&) const = default;
};

struct Prompt {
  std::vector<Token> tokens;
  LanguageId lang;

  bool operator==(const Prompt&) const = default;
};

struct Completion {
  std::vector<Token> tokens;  // ends in eos
  LanguageId lang;

  std::size_t content_length() const { return tokens.empty() ? 0 : tokens.size() - 1; }

  bool operator==(const Completion&) const = default;
};

enum class Channel { Direct, Translated };

std::string_view to_string(Channel channel);
// Accepts "direct" / "translated"; throws ConfigError otherwise.
Channel channel_from_string(std::string_view text);

struct PreferencePair {
  Prompt prompt;
  Completion chosen;
  Completion rejected;
  Channel channel_chosen = Channel::Direct;
  Channel channel_rejected = Channel::Translated;
  double labeler_margin = 0.0;

  LanguageId lang() const { return prompt.lang; }

  bool operator==(const PreferencePair&) const = default;
};

struct FixedTotal {
  std::size_t total = 0;
  bool operator==(const FixedTotal&) const = default;
};

struct PerLanguage {
  std::size_t count = 0;
  bool operator==(const PerLanguage&) const = default;
};

struct MixtureSpec {
  std::string name;
  std::vector<LanguageId> languages;
  std::variant<FixedTotal, PerLanguage> mode;

  bool operator==(const MixtureSpec&) const = default;
};

struct Dataset {
  std::vector<PreferencePair> pairs;
  MixtureSpec mixture;
  std::uint64_t seed = 0;

  bool operator==(const Dataset&) const = default;
};

// Violations of the Completion invariants; empty when well formed.
std::vector<std::string> check_completion(const Completion& completion, const VocabSpec& vocab,
                                          std::size_t max_len = kDefaultMaxLen);

bool is_well_formed(const Completion& completion, const VocabSpec& vocab,
                    std::size_t max_len = kDefaultMaxLen);

// Every violated PreferencePair invariant. An empty result means the pair is valid.
std::vector<std::string> validate_pair(const PreferencePair& pair, const VocabSpec& vocab,
                                       std::size_t max_len = kDefaultMaxLen,
                                       std::size_t max_prompt_len = kDefaultMaxPromptLen);

}  // namespace mlpo
