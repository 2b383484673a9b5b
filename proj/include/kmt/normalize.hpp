#pragma once

#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace kmt {

// Ordered codepoint-to-sequence replacement table driving script
// unification. Applying a valid map is idempotent: no target sequence may
// contain a source codepoint of the same map.
class GraphemeMap {
 public:
  GraphemeMap() = default;
  GraphemeMap(std::string profile_name,
              std::vector<std::pair<char32_t, std::u32string>> entries);

  // Built-in "paper" profile: Arabic kaf/yeh folded to the Kurdish forms,
  // ta (ط) to ت, and the Arabic presentation-form variants of ک/ی/ه folded
  // to their canonical codepoints.
  static const GraphemeMap& paper_profile();

  // One rule per line: "U+XXXX<TAB>U+YYYY[,U+ZZZZ...]". '#' starts a
  // comment; blank lines ignored.
  static GraphemeMap parse(std::string_view text, std::string profile_name);
  static GraphemeMap load(const std::string& path);

  std::string serialize() const;

  const std::string& profile_name() const { return profile_name_; }
  const std::vector<std::pair<char32_t, std::u32string>>& entries() const {
    return entries_;
  }
  bool has_source(char32_t cp) const { return lookup_.count(cp) != 0; }

  std::string apply(std::string_view text) const;
  std::u32string apply(std::u32string_view text) const;

 private:
  void validate() const;

  std::string profile_name_;
  std::vector<std::pair<char32_t, std::u32string>> entries_;
  std::map<char32_t, std::u32string> lookup_;
};

struct NormalizationConfig {
  bool unify = true;
  bool remove_zwnj = true;
  bool initial_r = true;
  bool strip_parens = true;
  bool collapse_whitespace = true;
  bool truecase = false;  // English side only; excludes initial_r
  const GraphemeMap* grapheme_profile = nullptr;  // null = paper profile

  static NormalizationConfig kurdish();
  static NormalizationConfig english();

  // Stable hash of the enabled steps and profile, recorded in trained
  // subword models so encode can warn on mismatched preprocessing.
  std::string fingerprint() const;
};

// Frequency-of-casing truecase model. canonical maps the folded form of a
// token to its most frequent non-sentence-initial surface form.
struct TruecaseModel {
  std::map<std::string, std::string> canonical;
  std::uint64_t trained_on = 0;

  void save(const std::string& path) const;
  static TruecaseModel load(const std::string& path);
};

struct NormalizeResult {
  std::string text;
  std::vector<std::string> warnings;
};

std::string unify_graphemes(std::string_view text, const GraphemeMap& map);

std::string remove_zwnj(std::string_view text);

// Word-initial ر (U+0631) becomes ڕ (U+0695). Word-initial means preceded by
// start of string, whitespace, or a non-letter codepoint.
std::string normalize_initial_r(std::string_view text);

// Removes balanced outermost (...) spans, nested content included. If the
// parentheses are unbalanced the text is returned unchanged with a warning.
NormalizeResult strip_parentheticals(std::string_view text,
                                     bool collapse_ws = true);

TruecaseModel train_truecaser(
    const std::vector<std::vector<std::string>>& sentences);

std::vector<std::string> apply_truecase(const std::vector<std::string>& tokens,
                                        const TruecaseModel& model);

// Fixed-order composition of the enabled steps:
//   unify -> remove_zwnj -> strip_parentheticals -> initial_r -> collapse.
// The English side enables only parenthetical stripping and collapsing here;
// truecasing runs at token level via apply_truecase.
NormalizeResult normalize_pipeline(std::string_view text,
                                   const NormalizationConfig& config);

}  // namespace kmt
