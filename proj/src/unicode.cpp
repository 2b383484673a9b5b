#include "kmt/unicode.hpp"

#include <algorithm>
#include <array>

namespace kmt {
namespace uni {

std::u32string decode_utf8(std::string_view text) {
  std::u32string out;
  out.reserve(text.size());
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const unsigned char b0 = static_cast<unsigned char>(text[i]);
    char32_t cp = 0;
    std::size_t len = 0;
    if (b0 < 0x80) {
      cp = b0;
      len = 1;
    } else if ((b0 & 0xE0) == 0xC0) {
      cp = b0 & 0x1F;
      len = 2;
    } else if ((b0 & 0xF0) == 0xE0) {
      cp = b0 & 0x0F;
      len = 3;
    } else if ((b0 & 0xF8) == 0xF0) {
      cp = b0 & 0x07;
      len = 4;
    } else {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    if (i + len > n) {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    bool ok = true;
    for (std::size_t k = 1; k < len; ++k) {
      const unsigned char b = static_cast<unsigned char>(text[i + k]);
      if ((b & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (b & 0x3F);
    }
    // Reject overlong forms, surrogates and out-of-range values.
    if (ok) {
      if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
          (len == 4 && cp < 0x10000) || cp > 0x10FFFF ||
          (cp >= 0xD800 && cp <= 0xDFFF)) {
        ok = false;
      }
    }
    if (!ok) {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) cp = kReplacement;
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::string encode_utf8(std::u32string_view codepoints) {
  std::string out;
  out.reserve(codepoints.size());
  for (char32_t cp : codepoints) append_utf8(out, cp);
  return out;
}

std::size_t codepoint_count(std::string_view text) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) ++count;
  }
  return count;
}

bool is_whitespace(char32_t cp) {
  switch (cp) {
    case 0x0009:
    case 0x000A:
    case 0x000B:
    case 0x000C:
    case 0x000D:
    case 0x0020:
    case 0x0085:
    case 0x00A0:
    case 0x1680:
    case 0x2028:
    case 0x2029:
    case 0x202F:
    case 0x205F:
    case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

namespace {

struct Range {
  char32_t lo;
  char32_t hi;
};

// Letter ranges for the scripts this toolkit targets. Not the full Unicode
// table; documented in the README as extensible.
constexpr std::array<Range, 43> kLetterRanges = {{
    {0x0041, 0x005A},  // A-Z
    {0x0061, 0x007A},  // a-z
    {0x00AA, 0x00AA},  {0x00B5, 0x00B5},  {0x00BA, 0x00BA},
    {0x00C0, 0x00D6},  {0x00D8, 0x00F6},
    {0x00F8, 0x02AF},  // Latin-1 supplement through IPA extensions
    {0x0370, 0x0373},  {0x0376, 0x0377},  {0x037B, 0x037D},  {0x037F, 0x037F},
    {0x0386, 0x0386},  {0x0388, 0x03FF},  // Greek
    {0x0400, 0x052F},  // Cyrillic + supplement
    {0x05D0, 0x05EA},  {0x05EF, 0x05F2},  // Hebrew
    {0x0620, 0x064A},  // Arabic letters incl. hamza forms and tatweel
    {0x066E, 0x066F},
    {0x0671, 0x06D3},  // Arabic extended letters (Kurdish additions live here)
    {0x06D5, 0x06D5},  // Kurdish ae
    {0x06E5, 0x06E6},  {0x06EE, 0x06EF},  {0x06FA, 0x06FF},
    {0x0750, 0x077F},  // Arabic supplement
    {0x08A0, 0x08C9},  // Arabic extended-A letters
    {0x1E00, 0x1FBC},  // Latin/Greek extended additional
    {0x3041, 0x3096},  {0x30A1, 0x30FA},  // kana
    {0x4E00, 0x9FFF},  // han
    {0xAC00, 0xD7A3},  // hangul
    {0xFB00, 0xFB17},  // Latin/Armenian ligatures
    {0xFB1D, 0xFB1D},  {0xFB1F, 0xFB28},  {0xFB2A, 0xFB4F},
    {0xFB50, 0xFBB1},  // Arabic presentation forms A
    {0xFBD3, 0xFD3D},  {0xFDF0, 0xFDFB},
    {0xFE70, 0xFE74},  {0xFE76, 0xFEFC},  // Arabic presentation forms B
    {0x10330, 0x1034A},
    {0x1E900, 0x1E943},
}};

constexpr std::array<Range, 4> kDigitRanges = {{
    {0x0030, 0x0039},  // ASCII
    {0x0660, 0x0669},  // Arabic-Indic
    {0x06F0, 0x06F9},  // extended Arabic-Indic
    {0x0966, 0x096F},  // Devanagari
}};

template <std::size_t N>
bool in_ranges(const std::array<Range, N>& ranges, char32_t cp) {
  auto it = std::upper_bound(
      ranges.begin(), ranges.end(), cp,
      [](char32_t value, const Range& r) { return value < r.lo; });
  if (it == ranges.begin()) return false;
  --it;
  return cp >= it->lo && cp <= it->hi;
}

}  // namespace

bool is_letter(char32_t cp) { return in_ranges(kLetterRanges, cp); }

bool is_digit(char32_t cp) { return in_ranges(kDigitRanges, cp); }

bool is_word_char(char32_t cp) {
  return cp == U'_' || is_letter(cp) || is_digit(cp);
}

char32_t fold_case(char32_t cp) {
  if (cp >= U'A' && cp <= U'Z') return cp + 0x20;
  if (cp >= 0x00C0 && cp <= 0x00DE && cp != 0x00D7) return cp + 0x20;
  if (cp == 0x0178) return 0x00FF;  // Ÿ
  return cp;
}

std::string fold_case(std::string_view text) {
  std::u32string cps = decode_utf8(text);
  for (char32_t& cp : cps) cp = fold_case(cp);
  return encode_utf8(cps);
}

std::string collapse_whitespace(std::string_view text) {
  std::u32string cps = decode_utf8(text);
  std::u32string out;
  out.reserve(cps.size());
  bool pending_space = false;
  for (char32_t cp : cps) {
    if (is_whitespace(cp)) {
      if (!out.empty()) pending_space = true;
      continue;
    }
    if (pending_space) {
      out.push_back(U' ');
      pending_space = false;
    }
    out.push_back(cp);
  }
  return encode_utf8(out);
}

}  // namespace uni
}  // namespace kmt
