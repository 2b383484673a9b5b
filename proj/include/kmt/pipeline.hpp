#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kmt/corpus.hpp"
#include "kmt/error.hpp"
#include "kmt/metrics.hpp"
#include "kmt/subword.hpp"

namespace kmt {

struct CorpusInput {
  std::string tag;
  std::string tmx_path;             // either a TMX file...
  std::string src_path, tgt_path;   // ...or two aligned plain-text files
};

// End-to-end run configuration; see the README for the JSON schema.
struct PipelineConfig {
  std::vector<CorpusInput> corpora;
  std::string src_lang = "ckb";
  std::string tgt_lang = "en";
  bool explode_refs = false;
  std::string lexicon_path;
  std::vector<std::string> repair_tags;  // default: every "tanzil" tag
  bool repair_tags_set = false;
  std::string tokenizer_kind = "wordpunct";  // or bpe|unigram|wordpiece
  TrainerConfig trainer;
  SplitSpec split;
  std::string truecase_model_path;
  std::string out_dir;

  static PipelineConfig from_json_file(const std::string& path);
  static PipelineConfig from_json(std::string_view text,
                                  const std::string& origin = "<memory>");
};

// A stage failure carries the stage name so the CLI can report where the
// run aborted. Partial outputs are removed before this is thrown.
struct StageError : Error {
  StageError(const std::string& stage, const std::string& message)
      : Error("stage " + stage + ": " + message), stage_name(stage) {}
  std::string stage_name;
};

// Executes ingest -> normalize -> repair -> train-tokenizer -> tokenize ->
// split -> stats, writing every intermediate artifact plus manifest.json
// into the output directory. Returns the manifest document. Re-running an
// identical config reproduces identical bytes.
std::string run_pipeline(const PipelineConfig& config);

// Re-checks the digests recorded in a manifest; returns a human-readable
// report and sets `ok`.
std::string verify_manifest(const std::string& manifest_path, bool& ok);

struct BucketRow {
  std::string label;
  std::uint64_t count = 0;
  std::vector<double> bleu;  // per order 1..max_order; empty bucket -> empty
};

// Length-bucketed evaluation: partitions aligned hyp/ref lines into length
// buckets (reference side by default) and reports BLEU-1..max with floor
// smoothing per bucket.
std::vector<BucketRow> eval_buckets(const std::vector<std::string>& hyp_lines,
                                    const std::vector<std::string>& ref_lines,
                                    const std::vector<std::uint64_t>& edges,
                                    int max_order, bool bucket_by_source);

std::string buckets_to_csv(const std::vector<BucketRow>& rows, int max_order);

}  // namespace kmt
