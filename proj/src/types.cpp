#include "mlpo/types.hpp"

#include <algorithm>
#include <cstdio>

namespace mlpo {

std::string LanguageId::name() const {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "L%02u", id);
  return buf;
}

LanguageRegistry::LanguageRegistry(std::size_t num_languages) : size_(num_languages) {
  if (num_languages == 0) throw ConfigError("language registry needs at least one language");
}

void LanguageRegistry::check(LanguageId lang) const {
  if (!contains(lang)) {
    throw RegistryError("language " + std::to_string(lang.id) + " outside registry of size " +
                        std::to_string(size_));
  }
}

std::vector<LanguageId> LanguageRegistry::ids() const {
  std::vector<LanguageId> out;
  out.reserve(size_);
  for (std::uint32_t i = 0; i < size_; ++i) out.push_back(LanguageId{i});
  return out;
}

VocabSpec VocabSpec::make(std::uint32_t size) {
  if (size < 2) throw ConfigError("vocab size must be at least 2, got " + std::to_string(size));
  return VocabSpec{size};
}

std::string_view to_string(Channel channel) {
  return channel == Channel::Direct ? "direct" : "translated";
}

Channel channel_from_string(std::string_view text) {
  if (text == "direct") return Channel::Direct;
  if (text == "translated") return Channel::Translated;
  throw ConfigError("unknown channel '" + std::string(text) + "'");
}

std::vector<std::string> check_completion(const Completion& completion, const VocabSpec& vocab,
                                          std::size_t max_len) {
  std::vector<std::string> out;
  const auto& toks = completion.tokens;
  if (toks.empty()) {
    out.emplace_back("empty completion");
    return out;
  }
  if (std::any_of(toks.begin(), toks.end(), [&](Token t) { return !vocab.contains(t); })) {
    out.emplace_back("token id out of vocabulary");
  }
  if (toks.back() != vocab.eos()) out.emplace_back("unterminated completion");
  const auto eos_count = std::count(toks.begin(), toks.end(), vocab.eos());
  if (eos_count > 1) out.emplace_back("eos appears more than once");
  if (toks.size() > max_len + 1) out.emplace_back("completion longer than max_len");
  return out;
}

bool is_well_formed(const Completion& completion, const VocabSpec& vocab, std::size_t max_len) {
  return check_completion(completion, vocab, max_len).empty();
}

std::vector<std::string> validate_pair(const PreferencePair& pair, const VocabSpec& vocab,
                                       std::size_t max_len, std::size_t max_prompt_len) {
  std::vector<std::string> out;
  const auto& prompt = pair.prompt.tokens;
  if (std::any_of(prompt.begin(), prompt.end(), [&](Token t) { return !vocab.contains(t); })) {
    out.emplace_back("prompt token id out of vocabulary");
  }
  if (prompt.size() > max_prompt_len) out.emplace_back("prompt longer than max prompt length");

  for (auto& v : check_completion(pair.chosen, vocab, max_len)) out.push_back("chosen: " + v);
  for (auto& v : check_completion(pair.rejected, vocab, max_len)) out.push_back("rejected: " + v);

  if (pair.chosen.tokens == pair.rejected.tokens) out.emplace_back("identical completions");
  if (pair.chosen.lang != pair.prompt.lang || pair.rejected.lang != pair.prompt.lang) {
    out.emplace_back("language tag mismatch");
  }
  if (!(pair.labeler_margin >= 0.0)) out.emplace_back("negative or non-finite margin");
  return out;
}

}  // namespace mlpo
