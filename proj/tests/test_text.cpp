#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "kmt/error.hpp"
#include "kmt/lexicon.hpp"
#include "kmt/normalize.hpp"
#include "kmt/unicode.hpp"

using namespace kmt;

namespace {

// Mixed-script random strings; deterministic across runs.
std::string random_text(std::mt19937_64& gen, std::size_t max_len) {
  static const std::vector<std::pair<char32_t, char32_t>> ranges = {
      {0x0020, 0x007E},  // ASCII incl. parens and punctuation
      {0x0620, 0x064A},  // Arabic letters
      {0x0660, 0x0669},  // Arabic digits
      {0x0695, 0x06D5},  // Kurdish letters
      {0x200C, 0x200C},  // ZWNJ
      {0xFB8E, 0xFB91},  // kaf presentation forms
  };
  std::uniform_int_distribution<std::size_t> len_dist(0, max_len);
  std::uniform_int_distribution<std::size_t> range_dist(0, ranges.size() - 1);
  std::u32string out;
  const std::size_t len = len_dist(gen);
  for (std::size_t i = 0; i < len; ++i) {
    const auto [lo, hi] = ranges[range_dist(gen)];
    std::uniform_int_distribution<std::uint32_t> cp_dist(lo, hi);
    out.push_back(static_cast<char32_t>(cp_dist(gen)));
  }
  return uni::encode_utf8(out);
}

}  // namespace

TEST_CASE("utf8 round trip") {
  std::mt19937_64 gen(11);
  for (int i = 0; i < 500; ++i) {
    const std::string text = random_text(gen, 40);
    CHECK(uni::encode_utf8(uni::decode_utf8(text)) == text);
  }
  CHECK(uni::decode_utf8("\xFF").size() == 1);
  CHECK(uni::decode_utf8("\xFF")[0] == uni::kReplacement);
  CHECK(uni::codepoint_count("کوردی") == 5);
}

TEST_CASE("collapse whitespace") {
  CHECK(uni::collapse_whitespace("  a \t b  c  ") == "a b c");
  CHECK(uni::collapse_whitespace("") == "");
  CHECK(uni::collapse_whitespace(" \t ") == "");
}

TEST_CASE("unify graphemes: paper examples") {
  const GraphemeMap& map = GraphemeMap::paper_profile();
  CHECK(unify_graphemes("كوردي", map) == "کوردی");
  CHECK(unify_graphemes("کوردی", map) == "کوردی");
  CHECK(unify_graphemes("لوط", map) == "لوت");
}

TEST_CASE("unify graphemes: idempotent and length preserving") {
  const GraphemeMap& map = GraphemeMap::paper_profile();
  for (const auto& [src, tgt] : map.entries()) {
    CHECK(tgt.size() == 1);  // default profile maps 1:1
  }
  std::mt19937_64 gen(12);
  for (int i = 0; i < 1000; ++i) {
    const std::string text = random_text(gen, 30);
    const std::string once = unify_graphemes(text, map);
    CHECK(unify_graphemes(once, map) == once);
    CHECK(uni::codepoint_count(once) == uni::codepoint_count(text));
  }
}

TEST_CASE("grapheme map rejects duplicates and non-idempotent targets") {
  CHECK_THROWS_AS(GraphemeMap("bad", {{U'a', U"b"}, {U'a', U"c"}}), Error);
  CHECK_THROWS_AS(GraphemeMap("bad", {{U'a', U"b"}, {U'b', U"c"}}), Error);
}

TEST_CASE("grapheme map file round trip and shipped profile") {
  const GraphemeMap& builtin = GraphemeMap::paper_profile();
  const GraphemeMap reparsed =
      GraphemeMap::parse(builtin.serialize(), "paper");
  CHECK(reparsed.entries() == builtin.entries());

  const GraphemeMap shipped =
      GraphemeMap::load(std::string(KMT_SOURCE_DIR) + "/profiles/paper.map");
  CHECK(shipped.entries() == builtin.entries());

  CHECK_THROWS_AS(GraphemeMap::parse("U+0041 no tab", "bad"), Error);
  CHECK_THROWS_AS(GraphemeMap::parse("X+41\tU+42", "bad"), Error);

  // deletion rule: empty target
  const GraphemeMap deleting = GraphemeMap::parse("U+0041\t", "del");
  CHECK(deleting.apply(std::string_view("cAt")) == "ct");
}

TEST_CASE("remove zwnj") {
  CHECK(remove_zwnj("ده‌کات") == "دهکات");
  CHECK(remove_zwnj("abc") == "abc");
  CHECK(remove_zwnj("‌‌") == "");

  std::mt19937_64 gen(13);
  for (int i = 0; i < 500; ++i) {
    const std::string text = random_text(gen, 30);
    const std::u32string out = uni::decode_utf8(remove_zwnj(text));
    std::u32string expected;
    for (char32_t cp : uni::decode_utf8(text)) {
      if (cp != uni::kZwnj) expected.push_back(cp);
    }
    CHECK(out == expected);
  }
}

TEST_CASE("normalize initial r") {
  CHECK(normalize_initial_r("رەنگ") == "ڕەنگ");
  CHECK(normalize_initial_r("بەر") == "بەر");
  CHECK(normalize_initial_r("رۆژ و رێگا") == "ڕۆژ و ڕێگا");

  std::mt19937_64 gen(14);
  for (int i = 0; i < 500; ++i) {
    const std::string text = random_text(gen, 30);
    const std::u32string before = uni::decode_utf8(text);
    const std::u32string after = uni::decode_utf8(normalize_initial_r(text));
    REQUIRE(before.size() == after.size());
    bool prev_letter = false;
    for (std::size_t k = 0; k < before.size(); ++k) {
      if (after[k] != before[k]) {
        CHECK(before[k] == 0x0631);
        CHECK(after[k] == 0x0695);
        CHECK_FALSE(prev_letter);
      }
      prev_letter = uni::is_letter(before[k]);
    }
    // idempotence
    CHECK(normalize_initial_r(uni::encode_utf8(after)) ==
          uni::encode_utf8(after));
  }
}

TEST_CASE("strip parentheticals") {
  CHECK(strip_parentheticals("سڵاو (لە ئێوەش) هەرچەندە").text ==
        "سڵاو هەرچەندە");
  CHECK(strip_parentheticals("abc").text == "abc");
  CHECK(strip_parentheticals("(a (b) c) d").text == "d");

  const NormalizeResult unbalanced = strip_parentheticals("a ( b");
  CHECK(unbalanced.text == "a ( b");
  CHECK(unbalanced.warnings.size() == 1);
  const NormalizeResult stray = strip_parentheticals("(a) b ) c");
  CHECK(stray.text == "(a) b ) c");
  CHECK(stray.warnings.size() == 1);

  std::mt19937_64 gen(15);
  for (int i = 0; i < 500; ++i) {
    const std::string text = random_text(gen, 30);
    const NormalizeResult result = strip_parentheticals(text);
    if (result.warnings.empty()) {
      CHECK(result.text.find('(') == std::string::npos);
      CHECK(result.text.find(')') == std::string::npos);
      // output is a subsequence of the input modulo whitespace
      std::u32string in, out;
      for (char32_t cp : uni::decode_utf8(text)) {
        if (!uni::is_whitespace(cp)) in.push_back(cp);
      }
      for (char32_t cp : uni::decode_utf8(result.text)) {
        if (!uni::is_whitespace(cp)) out.push_back(cp);
      }
      std::size_t at = 0;
      for (char32_t cp : out) {
        at = in.find(cp, at);
        REQUIRE(at != std::u32string::npos);
        ++at;
      }
    } else {
      CHECK(result.text == text);
    }
    const NormalizeResult again = strip_parentheticals(result.text);
    CHECK(again.text == result.text);
  }
}

TEST_CASE("truecaser training") {
  const TruecaseModel model = train_truecaser(
      {{"We", "saw", "Canada", "."}, {"Canada", "is", "cold", "."}});
  CHECK(model.canonical.at("canada") == "Canada");
  CHECK(model.canonical.at("is") == "is");

  CHECK(train_truecaser({{"Only"}}).canonical.empty());
  CHECK(train_truecaser({{"a", "A", "a"}}).canonical.at("a") == "a");
  CHECK_THROWS_AS(train_truecaser({}), Error);
}

TEST_CASE("apply truecase") {
  TruecaseModel model;
  model.canonical["the"] = "the";
  model.canonical["canada"] = "Canada";
  CHECK(apply_truecase({"The", "cat"}, model) ==
        std::vector<std::string>{"the", "cat"});
  CHECK(apply_truecase({"Canada", "is"}, model) ==
        std::vector<std::string>{"Canada", "is"});
  CHECK(apply_truecase({"Xyzzy", "!"}, model) ==
        std::vector<std::string>{"xyzzy", "!"});
  CHECK(apply_truecase({}, model).empty());

  // only the first token may change
  std::mt19937_64 gen(16);
  for (int i = 0; i < 200; ++i) {
    std::vector<std::string> tokens;
    for (int t = 0; t < 5; ++t) tokens.push_back(random_text(gen, 6));
    const auto out = apply_truecase(tokens, model);
    REQUIRE(out.size() == tokens.size());
    for (std::size_t k = 1; k < tokens.size(); ++k) {
      CHECK(out[k] == tokens[k]);
    }
    CHECK(apply_truecase(out, model) == out);
  }
}

TEST_CASE("truecase model save/load") {
  const TruecaseModel model = train_truecaser(
      {{"We", "saw", "Canada", "."}, {"Canada", "is", "cold", "."}});
  const std::string path = "truecase_roundtrip.tsv";
  model.save(path);
  const TruecaseModel loaded = TruecaseModel::load(path);
  CHECK(loaded.canonical == model.canonical);
  CHECK(loaded.trained_on == model.trained_on);
  std::remove(path.c_str());
}

TEST_CASE("normalize pipeline") {
  const NormalizationConfig kurdish = NormalizationConfig::kurdish();
  CHECK(normalize_pipeline("(وتە) رۆژ‌باش", kurdish).text == "ڕۆژباش");
  CHECK(normalize_pipeline("", kurdish).text == "");

  std::mt19937_64 gen(17);
  for (int i = 0; i < 1000; ++i) {
    const std::string text = random_text(gen, 40);
    const std::string once = normalize_pipeline(text, kurdish).text;
    CHECK(normalize_pipeline(once, kurdish).text == once);
  }

  NormalizationConfig bad = NormalizationConfig::kurdish();
  bad.truecase = true;
  CHECK_THROWS_AS(normalize_pipeline("x", bad), Error);

  const NormalizationConfig english = NormalizationConfig::english();
  CHECK(normalize_pipeline("keep ك (drop me) here", english).text ==
        "keep ك here");
  CHECK(kurdish.fingerprint() != english.fingerprint());
  CHECK(kurdish.fingerprint() == NormalizationConfig::kurdish().fingerprint());
}

TEST_CASE("lexicon building and lookups") {
  const FrequencyLexicon lex = FrequencyLexicon::build({"a", "b", "a"});
  CHECK(lex.count("a") == 2);
  CHECK(lex.count("b") == 1);
  CHECK(lex.count("missing") == 0);
  CHECK(lex.source_tokens() == 3);

  const FrequencyLexicon empty = FrequencyLexicon::build({});
  CHECK(empty.source_tokens() == 0);
  CHECK(empty.size() == 0);
}

TEST_CASE("lexicon counts match an independent counter, any order") {
  std::mt19937_64 gen(18);
  std::vector<std::string> tokens;
  std::map<std::string, std::uint64_t> oracle;
  for (int i = 0; i < 1000; ++i) {
    std::string token = "t" + std::to_string(gen() % 50);
    ++oracle[token];
    tokens.push_back(std::move(token));
  }
  const FrequencyLexicon lex = FrequencyLexicon::build(tokens);
  std::uint64_t total = 0;
  for (const auto& [token, count] : oracle) {
    CHECK(lex.count(token) == count);
    total += count;
  }
  CHECK(lex.source_tokens() == total);

  std::vector<std::string> shuffled = tokens;
  std::shuffle(shuffled.begin(), shuffled.end(), gen);
  const FrequencyLexicon lex2 = FrequencyLexicon::build(shuffled);
  CHECK(lex.serialize() == lex2.serialize());
}

TEST_CASE("lexicon file format") {
  FrequencyLexicon lex;
  lex.add("زۆر", 7);
  lex.add("کەم", 7);
  lex.add("ناو", 2);
  const std::string text = lex.serialize();
  CHECK(text.substr(0, 9) == "#total\t16");
  CHECK(FrequencyLexicon::parse(text).count("ناو") == 2);
  CHECK_THROWS_AS(FrequencyLexicon::parse("#total\t5\nx\t1\n"), Error);
  CHECK_THROWS_AS(FrequencyLexicon::parse("x no tab\n"), Error);
  CHECK_THROWS_AS(FrequencyLexicon::parse("x\t0\n"), Error);
}

TEST_CASE("split trailing conjunction") {
  FrequencyLexicon lex;
  lex.add("تاوانبارو", 5);
  lex.add("تاوانبار", 1218);
  CHECK(split_trailing_conjunction("تاوانبارو", lex) ==
        std::vector<std::string>{"تاوانبار", "و"});
  CHECK(split_trailing_conjunction("و", lex) ==
        std::vector<std::string>{"و"});

  FrequencyLexicon choo;
  choo.add("چوو", 900);
  choo.add("چو", 3);
  CHECK(split_trailing_conjunction("چوو", choo) ==
        std::vector<std::string>{"چوو"});

  // stripped form must keep at least two codepoints
  FrequencyLexicon tiny;
  tiny.add("د", 100);
  tiny.add("دو", 1);
  CHECK(split_trailing_conjunction("دو", tiny) ==
        std::vector<std::string>{"دو"});

  // ties keep the word: strictly greater is required
  FrequencyLexicon tie;
  tie.add("بارو", 5);
  tie.add("بار", 5);
  CHECK(split_trailing_conjunction("بارو", tie) ==
        std::vector<std::string>{"بارو"});
}

TEST_CASE("split decision properties") {
  std::mt19937_64 gen(19);
  const std::string waw = "و";
  for (int i = 0; i < 500; ++i) {
    std::string word = random_text(gen, 8);
    if (word.empty() || gen() % 2) word += waw;
    FrequencyLexicon lex;
    lex.add(word, 1 + gen() % 100);
    std::u32string cps = uni::decode_utf8(word);
    if (cps.size() >= 3) {
      lex.add(uni::encode_utf8(cps.substr(0, cps.size() - 1)),
              1 + gen() % 2000);
    }
    const auto out = split_trailing_conjunction(word, lex);
    REQUIRE(!out.empty());
    REQUIRE(out.size() <= 2);
    for (const auto& token : out) CHECK(!token.empty());
    std::string joined;
    for (const auto& token : out) joined += token;
    CHECK(joined == word);

    if (out.size() == 2) {
      // monotonicity: raising the word's own count can only flip to KEEP
      FrequencyLexicon raised = lex;
      raised.add(word, 1000000);
      const auto kept = split_trailing_conjunction(word, raised);
      CHECK(kept.size() == 1);
    }
  }
}

TEST_CASE("repair text") {
  FrequencyLexicon lex;
  lex.add("تاوانبارو", 5);
  lex.add("تاوانبار", 1218);
  CHECK(repair_text({"تاوانبارو", "بوو"}, lex) ==
        std::vector<std::string>{"تاوانبار", "و", "بوو"});
  CHECK(repair_text({}, lex).empty());
  CHECK(repair_text({"بەر", "ناو"}, lex) ==
        std::vector<std::string>{"بەر", "ناو"});
}
