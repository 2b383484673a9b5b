#include "kmt/lexicon.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "kmt/error.hpp"
#include "kmt/unicode.hpp"

namespace kmt {

namespace {
constexpr char32_t kWaw = 0x0648;  // و
}

FrequencyLexicon FrequencyLexicon::build(
    const std::vector<std::string>& tokens) {
  FrequencyLexicon lex;
  for (const std::string& token : tokens) {
    ++lex.counts_[token];
    ++lex.source_tokens_;
  }
  return lex;
}

std::uint64_t FrequencyLexicon::count(std::string_view token) const {
  auto it = counts_.find(std::string(token));
  return it == counts_.end() ? 0 : it->second;
}

void FrequencyLexicon::add(std::string_view token, std::uint64_t count) {
  if (count == 0) return;
  counts_[std::string(token)] += count;
  source_tokens_ += count;
}

std::string FrequencyLexicon::serialize() const {
  std::vector<std::pair<std::string_view, std::uint64_t>> rows;
  rows.reserve(counts_.size());
  for (const auto& [token, count] : counts_) rows.emplace_back(token, count);
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::string out = "#total\t" + std::to_string(source_tokens_) + "\n";
  for (const auto& [token, count] : rows) {
    out.append(token);
    out.push_back('\t');
    out += std::to_string(count);
    out.push_back('\n');
  }
  return out;
}

void FrequencyLexicon::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write lexicon '" + path + "'");
  out << serialize();
}

FrequencyLexicon FrequencyLexicon::parse(std::string_view text,
                                         const std::string& origin) {
  FrequencyLexicon lex;
  std::uint64_t declared_total = 0;
  bool has_total = false;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string_view line = (eol == std::string_view::npos)
                                ? text.substr(pos)
                                : text.substr(pos, eol - pos);
    pos = (eol == std::string_view::npos) ? text.size() : eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw Error("lexicon " + origin + " line " + std::to_string(line_no) +
                  ": missing tab");
    }
    const std::string_view token = line.substr(0, tab);
    const std::string count_str(line.substr(tab + 1));
    std::uint64_t count = 0;
    try {
      count = std::stoull(count_str);
    } catch (const std::exception&) {
      throw Error("lexicon " + origin + " line " + std::to_string(line_no) +
                  ": bad count '" + count_str + "'");
    }
    if (token == "#total") {
      declared_total = count;
      has_total = true;
      continue;
    }
    if (count == 0) {
      throw Error("lexicon " + origin + " line " + std::to_string(line_no) +
                  ": zero count for present token");
    }
    lex.counts_[std::string(token)] += count;
    lex.source_tokens_ += count;
  }
  if (has_total && declared_total != lex.source_tokens_) {
    throw Error("lexicon " + origin + ": #total " +
                std::to_string(declared_total) + " does not match sum " +
                std::to_string(lex.source_tokens_));
  }
  return lex;
}

FrequencyLexicon FrequencyLexicon::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open lexicon '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), "'" + path + "'");
}

std::vector<std::string> split_trailing_conjunction(
    std::string_view word, const FrequencyLexicon& lexicon) {
  std::u32string cps = uni::decode_utf8(word);
  if (cps.size() < 3 || cps.back() != kWaw) {
    return {std::string(word)};
  }
  const std::string stripped =
      uni::encode_utf8(std::u32string_view(cps.data(), cps.size() - 1));
  if (lexicon.count(stripped) > lexicon.count(word)) {
    return {stripped, uni::encode_utf8(std::u32string(1, kWaw))};
  }
  return {std::string(word)};
}

std::vector<std::string> repair_text(const std::vector<std::string>& tokens,
                                     const FrequencyLexicon& lexicon) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const std::string& token : tokens) {
    for (auto& piece : split_trailing_conjunction(token, lexicon)) {
      out.push_back(std::move(piece));
    }
  }
  return out;
}

}  // namespace kmt
