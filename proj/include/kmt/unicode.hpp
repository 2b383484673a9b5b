#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace kmt {
namespace uni {

constexpr char32_t kReplacement = 0xFFFD;
constexpr char32_t kZwnj = 0x200C;

// Decodes UTF-8 into codepoints. Invalid sequences become U+FFFD, one
// replacement per bad byte, so decoding is total and deterministic.
std::u32string decode_utf8(std::string_view text);

std::string encode_utf8(std::u32string_view codepoints);

void append_utf8(std::string& out, char32_t cp);

// Number of codepoints in a UTF-8 string.
std::size_t codepoint_count(std::string_view text);

// Unicode White_Space, minus nothing. ZWNJ (U+200C) is a format character,
// not whitespace.
bool is_whitespace(char32_t cp);

// Letters per a curated range table covering Latin, Greek, Cyrillic, Hebrew,
// Arabic (incl. the Kurdish additions and presentation forms), kana, han and
// hangul. Combining marks are not letters, mirroring the regex-\w behaviour
// of the WordPunct rule.
bool is_letter(char32_t cp);

bool is_digit(char32_t cp);

// Letter, digit or underscore.
bool is_word_char(char32_t cp);

// ASCII + Latin-1 lowercase fold, sufficient for the English side of the
// pipeline. Non-cased codepoints pass through.
char32_t fold_case(char32_t cp);

std::string fold_case(std::string_view text);

// Runs of Unicode whitespace collapse to a single U+0020; leading and
// trailing whitespace is removed.
std::string collapse_whitespace(std::string_view text);

}  // namespace uni
}  // namespace kmt
