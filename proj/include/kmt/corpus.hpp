#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace kmt {

struct SentencePair {
  std::int64_t id = 0;
  std::string corpus_tag;  // tanzil | ted | kurdnet | other:<name>
  std::string src_lang;
  std::string tgt_lang;
  std::string src;
  std::vector<std::string> refs;  // non-empty, ordered
};

struct ParallelCorpus {
  std::vector<SentencePair> pairs;  // ids strictly increasing
  std::vector<std::string> provenance;  // "<path>:<digest>" per source file

  void validate() const;
};

// One JSON object per line with fields id, corpus, src_lang, tgt_lang, src,
// refs.
std::string pairs_to_jsonl(const ParallelCorpus& corpus);
ParallelCorpus pairs_from_jsonl(std::string_view text,
                                const std::string& origin = "<memory>");
void save_pairs(const ParallelCorpus& corpus, const std::string& path);
ParallelCorpus load_pairs(const std::string& path);

// Multi-reference pairs expand into one single-reference pair per ref;
// fresh ids are assigned in order.
ParallelCorpus explode_refs(const ParallelCorpus& corpus);

// Two aligned plain-text files, one segment per line.
ParallelCorpus read_plain_parallel(const std::string& src_path,
                                   const std::string& tgt_path,
                                   const std::string& corpus_tag,
                                   const std::string& src_lang,
                                   const std::string& tgt_lang);

struct SideStats {
  std::uint64_t line_count = 0;
  std::uint64_t token_count = 0;
  std::uint64_t char_count = 0;

  double tokens_per_line() const;
  double chars_per_line() const;
};

struct CorpusStats {
  SideStats src;
  SideStats tgt;
};

enum class TokenizerSelector { kWordPunct, kWhitespace };

// Per-line statistics: tokens via the selected tokenizer, characters as
// codepoints per line including internal spaces. The target side counts
// every reference as a line.
CorpusStats compute_stats(const ParallelCorpus& corpus,
                          TokenizerSelector tokenizer);

struct SplitSpec {
  std::uint64_t seed = 0;
  double test2_fraction = 0.10;
  double train_fraction = 0.80;
  double val_fraction = 0.10;
  double test1_fraction = 0.10;

  void validate() const;
};

struct SplitResult {
  // test2 holds one held-out slice per input corpus, in input order.
  std::vector<ParallelCorpus> test2;
  ParallelCorpus train;
  ParallelCorpus val;
  ParallelCorpus test1;
};

// The two-stage protocol: per corpus a seeded shuffle sets aside the test2
// fraction; the remainders are concatenated, shuffled with the same
// generator, and cut train/val/test1 by index.
SplitResult split_corpus(const std::vector<ParallelCorpus>& corpora,
                         const SplitSpec& spec);

struct LengthBucket {
  // Upper edge of the bucket, inclusive; the last bucket is unbounded.
  std::uint64_t upper_edge = 0;
  bool unbounded = false;
  std::vector<SentencePair> pairs;

  std::string label() const;
};

// Partitions pairs by source-side token count into buckets
// (<= e1], (e1, e2], ..., (ek, inf).
std::vector<LengthBucket> filter_by_length(
    const std::vector<SentencePair>& pairs, TokenizerSelector tokenizer,
    const std::vector<std::uint64_t>& edges);

}  // namespace kmt
