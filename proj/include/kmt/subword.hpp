#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace kmt {

// WordPunct rule: maximal runs of word characters (letters, digits,
// underscore) or maximal runs of non-word non-whitespace characters;
// whitespace separates and is discarded.
std::vector<std::string> wordpunct_tokenize(std::string_view text);

struct PreToken {
  std::string text;
  bool space_before = false;  // whitespace preceded this pre-token
};

struct PreTokenized {
  std::vector<PreToken> tokens;
  bool trailing_space = false;
};

// WordPunct split that also records where whitespace sat, so encode can emit
// boundary markers and decode can restore single spaces.
PreTokenized wordpunct_pretokenize(std::string_view text);

// Pre-token -> count table in canonical (sorted) order; the unit trainers
// consume. Deterministic under any input ordering.
std::map<std::string, std::uint64_t> count_pretokens(
    const std::vector<std::string>& lines);

enum class SubwordKind { kBpe, kWordPiece, kUnigram };

std::string to_string(SubwordKind kind);
SubwordKind subword_kind_from_string(std::string_view name);

struct TrainerConfig {
  std::uint32_t vocabulary_size = 50000;
  double character_coverage = 1.0;
  std::uint32_t max_piece_length = 16;
  std::uint64_t min_pair_frequency = 2;  // BPE / WordPiece
  std::uint32_t unigram_seed_factor = 4;
  double unigram_prune_keep = 0.75;
  std::uint32_t em_iterations_per_round = 2;
  std::uint32_t shards = 1;  // counting/E-step parallelism; result-invariant
  std::string normalization_fingerprint = "unspecified";

  void validate() const;
};

struct VocabEntry {
  std::string piece;
  std::int32_t id = 0;
  double score = 0.0;  // log-probability for Unigram, 0 otherwise
};

// A trained subword tokenizer. Immutable once built; encode/decode are safe
// to call concurrently.
struct SubwordModel {
  SubwordKind kind = SubwordKind::kBpe;
  std::vector<VocabEntry> vocab;
  std::vector<std::pair<std::string, std::string>> merges;  // BPE/WordPiece
  std::string unk_piece = "<unk>";
  std::string continuation_prefix;       // "##" for WordPiece
  std::string boundary_piece = "▁"; // marks whitespace in encode output
  std::string normalization_fingerprint = "unspecified";

  // Rebuilds the piece index; call after mutating vocab by hand.
  void finalize();

  std::optional<std::int32_t> piece_id(std::string_view piece) const;

  std::vector<std::string> encode(std::string_view text) const;
  std::vector<std::string> encode_pretoken(std::string_view pretoken) const;
  std::string decode(const std::vector<std::string>& pieces) const;

  std::string serialize() const;
  void save(const std::string& path) const;
  static SubwordModel parse(std::string_view text,
                            const std::string& origin = "<memory>");
  static SubwordModel load(const std::string& path);

  bool structurally_equal(const SubwordModel& other) const;

 private:
  std::unordered_map<std::string, std::int32_t> piece_index_;
  std::unordered_map<std::string, std::int32_t> merge_rank_;
  std::size_t max_piece_cps_ = 0;

  std::vector<std::string> encode_bpe(std::string_view pretoken) const;
  std::vector<std::string> encode_wordpiece(std::string_view pretoken) const;
  std::vector<std::string> encode_unigram(std::string_view pretoken) const;
};

SubwordModel train_bpe(const std::map<std::string, std::uint64_t>& word_counts,
                       const TrainerConfig& config);

SubwordModel train_wordpiece(
    const std::map<std::string, std::uint64_t>& word_counts,
    const TrainerConfig& config);

SubwordModel train_unigram(
    const std::map<std::string, std::uint64_t>& word_counts,
    const TrainerConfig& config);

namespace unigram {

// One exact EM step over the words' full segmentation lattices: the E-step
// computes expected piece counts by forward/backward dynamic programming,
// the M-step renormalizes them into the returned probabilities.
// `loglik` is the corpus log-likelihood under the *input* probabilities.
struct EmStepResult {
  std::vector<double> probs;
  double loglik = 0.0;
};

EmStepResult em_step(const std::map<std::string, std::uint64_t>& word_counts,
                     const std::vector<std::string>& pieces,
                     const std::vector<double>& probs,
                     std::uint32_t shards = 1);

}  // namespace unigram

}  // namespace kmt
