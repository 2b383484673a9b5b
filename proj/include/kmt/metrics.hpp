#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace kmt {

using Tokens = std::vector<std::string>;

enum class BleuSmoothing { kNone, kFloor };  // floor: p_n = 1e-9 when zero

struct NgramPrecision {
  std::uint64_t clipped = 0;
  std::uint64_t total = 0;
  double ratio = 0.0;
};

struct BleuReport {
  double bleu = 0.0;  // [0, 100]
  std::vector<NgramPrecision> precisions;  // orders 1..max_order
  double brevity_penalty = 1.0;
  std::uint64_t hyp_len = 0;
  std::uint64_t ref_len = 0;  // sum of closest-reference lengths
};

// Corpus-level multi-reference BLEU: clipped n-gram matches against the best
// per-reference clip, geometric mean over orders, brevity penalty against
// the closest reference length (ties favour the shorter reference).
BleuReport bleu_corpus(const std::vector<Tokens>& hypotheses,
                       const std::vector<std::vector<Tokens>>& reference_sets,
                       int max_order = 4,
                       BleuSmoothing smoothing = BleuSmoothing::kNone);

struct MeteorReport {
  double score = 0.0;  // [0, 1]
  std::uint64_t matches = 0;
  std::uint64_t chunks = 0;
  double precision = 0.0;
  double recall = 0.0;
  double fmean = 0.0;
  double penalty = 0.0;
};

// Exact-match METEOR: unigram alignment maximising the match count and,
// among those, minimising chunks (exhaustively up to 12 matches, greedily
// beyond); Fmean = 10PR/(R+9P), penalty = 0.5 (chunks/m)^3. Multi-reference
// takes the best-scoring reference.
MeteorReport meteor_sentence(const Tokens& hyp,
                             const std::vector<Tokens>& refs);

struct TerReport {
  double score = 0.0;  // >= 0
  std::uint64_t edits = 0;
  std::uint64_t shifts = 0;
  double normalizer = 0.0;  // average reference length
  std::size_t best_ref = 0;
};

// Translation edit rate with greedy shift search: each round moves the
// block (length <= 10) that exactly matches a misplaced reference block to
// the reference position and yields the largest edit-distance reduction;
// ties prefer the leftmost then shortest block. Shifts cost 1 each.
TerReport ter_sentence(const Tokens& hyp, const std::vector<Tokens>& refs);

// Word-level edit distance, insert/delete/substitute all cost 1.
std::uint64_t edit_distance(const Tokens& a, const Tokens& b);

enum class ScoreTokenizer { kWordPunct, kNone };  // none: split on whitespace

struct ScoreOptions {
  int max_order = 4;
  BleuSmoothing smoothing = BleuSmoothing::kNone;
  ScoreTokenizer tokenizer = ScoreTokenizer::kWordPunct;
};

struct ScoreReport {
  BleuReport bleu;
  double meteor = 0.0;  // macro average over segments
  std::uint64_t meteor_matches = 0;
  std::uint64_t meteor_chunks = 0;
  double ter = 0.0;  // macro average over segments
  std::uint64_t ter_edits = 0;
  std::uint64_t ter_shifts = 0;
  double ter_normalizer = 0.0;  // summed per-segment normalizers
  std::uint64_t segments = 0;

  std::string to_text() const;
  std::string to_json() const;
};

// Scores a hypothesis file against one or more line-aligned reference
// files. Pairs whose hypothesis and every reference are blank are dropped;
// blank individual references are ignored for that segment.
ScoreReport score_files(const std::string& hyp_path,
                        const std::vector<std::string>& ref_paths,
                        const ScoreOptions& options);

ScoreReport score_lines(const std::vector<std::string>& hyp_lines,
                        const std::vector<std::vector<std::string>>& ref_lines,
                        const ScoreOptions& options);

}  // namespace kmt
