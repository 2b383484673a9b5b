#include <string_view>

#include "kmt/subword.hpp"
#include "kmt/unicode.hpp"

namespace kmt {

PreTokenized wordpunct_pretokenize(std::string_view text) {
  PreTokenized out;
  std::u32string cps = uni::decode_utf8(text);
  std::u32string current;
  bool current_is_word = false;
  bool saw_space = false;

  auto flush = [&]() {
    if (current.empty()) return;
    out.tokens.push_back({uni::encode_utf8(current), saw_space});
    current.clear();
    saw_space = false;
  };

  for (char32_t cp : cps) {
    if (uni::is_whitespace(cp)) {
      flush();
      saw_space = true;
      continue;
    }
    const bool word = uni::is_word_char(cp);
    if (!current.empty() && word != current_is_word) flush();
    current_is_word = word;
    current.push_back(cp);
  }
  flush();
  out.trailing_space = saw_space;
  return out;
}

std::vector<std::string> wordpunct_tokenize(std::string_view text) {
  PreTokenized pre = wordpunct_pretokenize(text);
  std::vector<std::string> tokens;
  tokens.reserve(pre.tokens.size());
  for (auto& t : pre.tokens) tokens.push_back(std::move(t.text));
  return tokens;
}

std::map<std::string, std::uint64_t> count_pretokens(
    const std::vector<std::string>& lines) {
  std::map<std::string, std::uint64_t> counts;
  for (const std::string& line : lines) {
    for (std::string& token : wordpunct_tokenize(line)) {
      ++counts[std::move(token)];
    }
  }
  return counts;
}

}  // namespace kmt
