#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kmt {

// Token -> occurrence count table built from a monolingual corpus; drives the
// trailing-conjunction repair. Immutable after build; lookups are
// thread-safe.
class FrequencyLexicon {
 public:
  FrequencyLexicon() = default;

  static FrequencyLexicon build(const std::vector<std::string>& tokens);

  std::uint64_t count(std::string_view token) const;
  std::uint64_t source_tokens() const { return source_tokens_; }
  std::size_t size() const { return counts_.size(); }

  void add(std::string_view token, std::uint64_t count);

  // TSV, one "token<TAB>count" per line sorted by descending count then
  // token, preceded by a "#total<TAB>N" header.
  void save(const std::string& path) const;
  std::string serialize() const;
  static FrequencyLexicon load(const std::string& path);
  static FrequencyLexicon parse(std::string_view text,
                                const std::string& origin = "<memory>");

 private:
  std::unordered_map<std::string, std::uint64_t> counts_;
  std::uint64_t source_tokens_ = 0;
};

// If `word` ends with the conjunction و (U+0648), the form without it is at
// least two codepoints long, and that form is more frequent in the lexicon,
// the word splits into [stem, "و"]. Otherwise it stays intact.
std::vector<std::string> split_trailing_conjunction(
    std::string_view word, const FrequencyLexicon& lexicon);

std::vector<std::string> repair_text(const std::vector<std::string>& tokens,
                                     const FrequencyLexicon& lexicon);

}  // namespace kmt
