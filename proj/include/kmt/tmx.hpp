#pragma once

#include <string>
#include <string_view>

#include "kmt/corpus.hpp"

namespace kmt {

struct TmxParseResult {
  ParallelCorpus corpus;
  std::uint64_t skipped_tus = 0;  // <tu> lacking either requested language
  std::vector<std::string> warnings;
};

// Parses the TMX subset: a body of <tu> elements holding <tuv xml:lang="..">
// with one <seg> each. Multiple target-language <tuv> in one <tu> become
// multiple refs. The five predefined XML entities and numeric character
// references are decoded. Malformed XML raises an error with a line number;
// so does a document yielding zero usable <tu>.
TmxParseResult parse_tmx(std::string_view document, const std::string& src_lang,
                         const std::string& tgt_lang,
                         const std::string& corpus_tag);

TmxParseResult parse_tmx_file(const std::string& path,
                              const std::string& src_lang,
                              const std::string& tgt_lang,
                              const std::string& corpus_tag);

}  // namespace kmt
