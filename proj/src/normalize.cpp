#include "kmt/normalize.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "kmt/error.hpp"
#include "kmt/unicode.hpp"

namespace kmt {

namespace {

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

char32_t parse_codepoint(std::string_view field, int line_no) {
  if (field.size() < 3 || field[0] != 'U' || field[1] != '+') {
    throw Error("grapheme map line " + std::to_string(line_no) +
                ": expected U+XXXX, got '" + std::string(field) + "'");
  }
  char32_t cp = 0;
  for (std::size_t i = 2; i < field.size(); ++i) {
    const char c = field[i];
    cp <<= 4;
    if (c >= '0' && c <= '9') {
      cp |= static_cast<char32_t>(c - '0');
    } else if (c >= 'A' && c <= 'F') {
      cp |= static_cast<char32_t>(c - 'A' + 10);
    } else if (c >= 'a' && c <= 'f') {
      cp |= static_cast<char32_t>(c - 'a' + 10);
    } else {
      throw Error("grapheme map line " + std::to_string(line_no) +
                  ": bad hex digit in '" + std::string(field) + "'");
    }
  }
  return cp;
}

std::string format_codepoint(char32_t cp) {
  char buf[12];
  std::snprintf(buf, sizeof(buf), "U+%04X", static_cast<unsigned>(cp));
  return std::string(buf);
}

}  // namespace

GraphemeMap::GraphemeMap(
    std::string profile_name,
    std::vector<std::pair<char32_t, std::u32string>> entries)
    : profile_name_(std::move(profile_name)), entries_(std::move(entries)) {
  for (const auto& [src, tgt] : entries_) {
    if (!lookup_.emplace(src, tgt).second) {
      throw Error("grapheme map '" + profile_name_ + "': duplicate source " +
                  format_codepoint(src));
    }
  }
  validate();
}

void GraphemeMap::validate() const {
  for (const auto& [src, tgt] : entries_) {
    for (char32_t cp : tgt) {
      if (lookup_.count(cp)) {
        throw Error("grapheme map '" + profile_name_ + "': target of " +
                    format_codepoint(src) + " contains source codepoint " +
                    format_codepoint(cp) + "; map would not be idempotent");
      }
    }
  }
}

const GraphemeMap& GraphemeMap::paper_profile() {
  static const GraphemeMap profile(
      "paper",
      {
          {0x0643, U"ک"},  // ك -> ک
          {0x064A, U"ی"},  // ي -> ی
          {0x0637, U"ت"},  // ط -> ت (lossy for Arabic quotations)
          {0x0649, U"ی"},  // ى -> ی
          // presentation forms of kaf
          {0xFB8E, U"ک"},
          {0xFB8F, U"ک"},
          {0xFB90, U"ک"},
          {0xFB91, U"ک"},
          {0xFED9, U"ک"},
          {0xFEDA, U"ک"},
          {0xFEDB, U"ک"},
          {0xFEDC, U"ک"},
          // presentation forms of yeh / farsi yeh
          {0xFBFC, U"ی"},
          {0xFBFD, U"ی"},
          {0xFBFE, U"ی"},
          {0xFBFF, U"ی"},
          {0xFEF1, U"ی"},
          {0xFEF2, U"ی"},
          {0xFEF3, U"ی"},
          {0xFEF4, U"ی"},
          // presentation forms of heh
          {0xFEE9, U"ه"},
          {0xFEEA, U"ه"},
          {0xFEEB, U"ه"},
          {0xFEEC, U"ه"},
      });
  return profile;
}

GraphemeMap GraphemeMap::parse(std::string_view text,
                               std::string profile_name) {
  std::vector<std::pair<char32_t, std::u32string>> entries;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string_view line = (eol == std::string_view::npos)
                                ? text.substr(pos)
                                : text.substr(pos, eol - pos);
    pos = (eol == std::string_view::npos) ? text.size() + 1 : eol + 1;
    ++line_no;
    if (std::size_t hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    // only \r and spaces are trimmed; a trailing tab separates an empty
    // (deleting) target
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) {
      line.remove_suffix(1);
    }
    while (!line.empty() && (line.front() == ' ')) line.remove_prefix(1);
    if (line.empty()) continue;

    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw Error("grapheme map line " + std::to_string(line_no) +
                  ": missing tab separator");
    }
    const char32_t src = parse_codepoint(line.substr(0, tab), line_no);
    std::u32string tgt;
    std::string_view rest = line.substr(tab + 1);
    while (!rest.empty()) {
      std::size_t comma = rest.find(',');
      std::string_view field =
          (comma == std::string_view::npos) ? rest : rest.substr(0, comma);
      rest = (comma == std::string_view::npos) ? std::string_view()
                                               : rest.substr(comma + 1);
      if (!field.empty()) tgt.push_back(parse_codepoint(field, line_no));
    }
    entries.emplace_back(src, std::move(tgt));
  }
  return GraphemeMap(std::move(profile_name), std::move(entries));
}

GraphemeMap GraphemeMap::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open grapheme map '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string name = path;
  if (std::size_t slash = name.find_last_of("/\\");
      slash != std::string::npos) {
    name = name.substr(slash + 1);
  }
  if (name.size() > 4 && name.substr(name.size() - 4) == ".map") {
    name = name.substr(0, name.size() - 4);
  }
  return parse(ss.str(), name);
}

std::string GraphemeMap::serialize() const {
  std::string out = "# grapheme unification profile: " + profile_name_ + "\n";
  for (const auto& [src, tgt] : entries_) {
    out += format_codepoint(src);
    out += '\t';
    for (std::size_t i = 0; i < tgt.size(); ++i) {
      if (i) out += ',';
      out += format_codepoint(tgt[i]);
    }
    out += '\n';
  }
  return out;
}

std::u32string GraphemeMap::apply(std::u32string_view text) const {
  std::u32string out;
  out.reserve(text.size());
  for (char32_t cp : text) {
    auto it = lookup_.find(cp);
    if (it == lookup_.end()) {
      out.push_back(cp);
    } else {
      out.append(it->second);
    }
  }
  return out;
}

std::string GraphemeMap::apply(std::string_view text) const {
  return uni::encode_utf8(apply(uni::decode_utf8(text)));
}

NormalizationConfig NormalizationConfig::kurdish() {
  NormalizationConfig c;
  c.truecase = false;
  return c;
}

NormalizationConfig NormalizationConfig::english() {
  NormalizationConfig c;
  c.unify = false;
  c.remove_zwnj = false;
  c.initial_r = false;
  c.strip_parens = true;
  c.collapse_whitespace = true;
  return c;
}

std::string NormalizationConfig::fingerprint() const {
  std::string desc;
  desc += unify ? "u1" : "u0";
  desc += remove_zwnj ? "z1" : "z0";
  desc += initial_r ? "r1" : "r0";
  desc += strip_parens ? "p1" : "p0";
  desc += collapse_whitespace ? "w1" : "w0";
  desc += truecase ? "t1" : "t0";
  desc += ";";
  const GraphemeMap& map =
      grapheme_profile ? *grapheme_profile : GraphemeMap::paper_profile();
  if (unify) desc += map.serialize();
  return hex64(fnv1a64(desc));
}

std::string unify_graphemes(std::string_view text, const GraphemeMap& map) {
  return map.apply(text);
}

std::string remove_zwnj(std::string_view text) {
  std::u32string cps = uni::decode_utf8(text);
  std::u32string out;
  out.reserve(cps.size());
  for (char32_t cp : cps) {
    if (cp != uni::kZwnj) out.push_back(cp);
  }
  return uni::encode_utf8(out);
}

std::string normalize_initial_r(std::string_view text) {
  std::u32string cps = uni::decode_utf8(text);
  bool prev_is_letter = false;
  for (char32_t& cp : cps) {
    if (cp == 0x0631 && !prev_is_letter) cp = 0x0695;
    prev_is_letter = uni::is_letter(cp);
  }
  return uni::encode_utf8(cps);
}

NormalizeResult strip_parentheticals(std::string_view text, bool collapse_ws) {
  std::u32string cps = uni::decode_utf8(text);
  int depth = 0;
  bool balanced = true;
  for (char32_t cp : cps) {
    if (cp == U'(') {
      ++depth;
    } else if (cp == U')') {
      if (--depth < 0) {
        balanced = false;
        break;
      }
    }
  }
  if (depth != 0) balanced = false;

  NormalizeResult result;
  if (!balanced) {
    result.text = std::string(text);
    result.warnings.push_back("unbalanced parentheses; text left unchanged");
    return result;
  }

  std::u32string out;
  out.reserve(cps.size());
  depth = 0;
  for (char32_t cp : cps) {
    if (cp == U'(') {
      ++depth;
      continue;
    }
    if (cp == U')') {
      --depth;
      continue;
    }
    if (depth == 0) out.push_back(cp);
  }
  result.text = uni::encode_utf8(out);
  if (collapse_ws) result.text = uni::collapse_whitespace(result.text);
  return result;
}

TruecaseModel train_truecaser(
    const std::vector<std::vector<std::string>>& sentences) {
  if (sentences.empty()) throw Error("empty training corpus");

  // A type earns an entry by being observed in a non-sentence-initial
  // position; its counts then cover every occurrence, so the canonical form
  // is the majority surface casing overall.
  struct SurfaceStat {
    std::uint64_t count = 0;
    std::uint64_t first_seen = 0;
  };
  std::map<std::string, std::map<std::string, SurfaceStat>> stats;
  std::map<std::string, bool> seen_non_initial;
  std::uint64_t seen = 0;
  TruecaseModel model;
  for (const auto& sentence : sentences) {
    for (std::size_t i = 0; i < sentence.size(); ++i) {
      const std::string& surface = sentence[i];
      const std::string key = uni::fold_case(surface);
      auto& stat = stats[key][surface];
      if (stat.count == 0) stat.first_seen = seen;
      ++stat.count;
      ++seen;
      if (i > 0) seen_non_initial[key] = true;
    }
  }
  model.trained_on = seen;
  for (const auto& [key, surfaces] : stats) {
    if (!seen_non_initial.count(key)) continue;
    const std::string* best = nullptr;
    std::uint64_t best_count = 0;
    std::uint64_t best_first = 0;
    for (const auto& [surface, stat] : surfaces) {
      if (best == nullptr || stat.count > best_count ||
          (stat.count == best_count && stat.first_seen < best_first)) {
        best = &surface;
        best_count = stat.count;
        best_first = stat.first_seen;
      }
    }
    model.canonical.emplace(key, *best);
  }
  return model;
}

std::vector<std::string> apply_truecase(const std::vector<std::string>& tokens,
                                        const TruecaseModel& model) {
  if (tokens.empty()) return tokens;
  std::vector<std::string> out = tokens;
  const std::string key = uni::fold_case(out[0]);
  auto it = model.canonical.find(key);
  out[0] = (it != model.canonical.end()) ? it->second : key;
  return out;
}

void TruecaseModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write truecase model '" + path + "'");
  out << "#tokens\t" << trained_on << "\n";
  for (const auto& [key, surface] : canonical) {
    out << key << '\t' << surface << '\n';
  }
}

TruecaseModel TruecaseModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open truecase model '" + path + "'");
  TruecaseModel model;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw Error("truecase model '" + path + "' line " +
                  std::to_string(line_no) + ": missing tab");
    }
    const std::string key = line.substr(0, tab);
    const std::string value = line.substr(tab + 1);
    if (key == "#tokens") {
      model.trained_on = std::stoull(value);
      continue;
    }
    if (uni::fold_case(value) != key) {
      throw Error("truecase model '" + path + "' line " +
                  std::to_string(line_no) +
                  ": key is not the case-folded surface form");
    }
    model.canonical[key] = value;
  }
  return model;
}

NormalizeResult normalize_pipeline(std::string_view text,
                                   const NormalizationConfig& config) {
  if (config.truecase && config.initial_r) {
    throw Error(
        "truecase and initial_r belong to different language sides and are "
        "mutually exclusive");
  }
  NormalizeResult result;
  result.text = std::string(text);
  if (config.unify) {
    const GraphemeMap& map = config.grapheme_profile
                                 ? *config.grapheme_profile
                                 : GraphemeMap::paper_profile();
    result.text = map.apply(result.text);
  }
  if (config.remove_zwnj) result.text = remove_zwnj(result.text);
  if (config.strip_parens) {
    NormalizeResult stripped = strip_parentheticals(result.text, false);
    result.text = std::move(stripped.text);
    for (auto& w : stripped.warnings) result.warnings.push_back(std::move(w));
  }
  if (config.initial_r) result.text = normalize_initial_r(result.text);
  if (config.collapse_whitespace) {
    result.text = uni::collapse_whitespace(result.text);
  }
  return result;
}

}  // namespace kmt
