#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "kmt/corpus.hpp"
#include "kmt/digest.hpp"
#include "kmt/error.hpp"
#include "kmt/lexicon.hpp"
#include "kmt/metrics.hpp"
#include "kmt/normalize.hpp"
#include "kmt/pipeline.hpp"
#include "kmt/subword.hpp"
#include "kmt/tmx.hpp"

namespace py = pybind11;
using namespace kmt;

namespace {

NormalizationConfig config_for(const std::string& lang) {
  if (lang == "ckb") return NormalizationConfig::kurdish();
  if (lang == "en") return NormalizationConfig::english();
  throw Error("unknown language side '" + lang + "' (expected ckb or en)");
}

py::dict bleu_to_dict(const BleuReport& report) {
  py::dict out;
  out["bleu"] = report.bleu;
  py::list precisions;
  for (const NgramPrecision& p : report.precisions) {
    py::dict row;
    row["clipped"] = p.clipped;
    row["total"] = p.total;
    row["ratio"] = p.ratio;
    precisions.append(row);
  }
  out["ngram_precisions"] = precisions;
  out["brevity_penalty"] = report.brevity_penalty;
  out["hyp_len"] = report.hyp_len;
  out["ref_len"] = report.ref_len;
  return out;
}

SubwordModel train_dispatch(const std::string& kind,
                            const std::map<std::string, std::uint64_t>& counts,
                            const TrainerConfig& config) {
  switch (subword_kind_from_string(kind)) {
    case SubwordKind::kBpe:
      return train_bpe(counts, config);
    case SubwordKind::kWordPiece:
      return train_wordpiece(counts, config);
    case SubwordKind::kUnigram:
      return train_unigram(counts, config);
  }
  throw Error("unreachable");
}

}  // namespace

PYBIND11_MODULE(kmt, m) {
  m.doc() = "Sorani Kurdish / English MT preprocessing and evaluation toolkit";

  py::register_exception<Error>(m, "KmtError");

  // --- normalization -------------------------------------------------
  m.def(
      "normalize",
      [](const std::string& text, const std::string& lang) {
        const NormalizeResult result =
            normalize_pipeline(text, config_for(lang));
        return py::make_tuple(result.text, result.warnings);
      },
      py::arg("text"), py::arg("lang") = "ckb",
      "Full normalization for one language side; returns (text, warnings).");
  m.def("unify_graphemes", [](const std::string& text) {
    return unify_graphemes(text, GraphemeMap::paper_profile());
  });
  m.def("remove_zwnj",
        [](const std::string& text) { return remove_zwnj(text); });
  m.def("normalize_initial_r",
        [](const std::string& text) { return normalize_initial_r(text); });
  m.def(
      "strip_parentheticals",
      [](const std::string& text, bool collapse) {
        const NormalizeResult result = strip_parentheticals(text, collapse);
        return py::make_tuple(result.text, result.warnings);
      },
      py::arg("text"), py::arg("collapse_whitespace") = true);
  m.def("train_truecaser", &train_truecaser, py::arg("sentences"));
  m.def("apply_truecase", &apply_truecase, py::arg("tokens"),
        py::arg("model"));
  py::class_<TruecaseModel>(m, "TruecaseModel")
      .def_readonly("canonical", &TruecaseModel::canonical)
      .def_readonly("trained_on", &TruecaseModel::trained_on)
      .def("save", &TruecaseModel::save)
      .def_static("load", &TruecaseModel::load);

  // --- tokenization ---------------------------------------------------
  m.def("wordpunct_tokenize",
        [](const std::string& text) { return wordpunct_tokenize(text); });
  m.def("count_pretokens", &count_pretokens, py::arg("lines"));

  py::class_<TrainerConfig>(m, "TrainerConfig")
      .def(py::init<>())
      .def_readwrite("vocabulary_size", &TrainerConfig::vocabulary_size)
      .def_readwrite("character_coverage", &TrainerConfig::character_coverage)
      .def_readwrite("max_piece_length", &TrainerConfig::max_piece_length)
      .def_readwrite("min_pair_frequency", &TrainerConfig::min_pair_frequency)
      .def_readwrite("unigram_seed_factor", &TrainerConfig::unigram_seed_factor)
      .def_readwrite("unigram_prune_keep", &TrainerConfig::unigram_prune_keep)
      .def_readwrite("em_iterations_per_round",
                     &TrainerConfig::em_iterations_per_round)
      .def_readwrite("shards", &TrainerConfig::shards)
      .def_readwrite("normalization_fingerprint",
                     &TrainerConfig::normalization_fingerprint);

  py::class_<SubwordModel>(m, "SubwordModel")
      .def_property_readonly(
          "kind", [](const SubwordModel& model) { return to_string(model.kind); })
      .def_readonly("unk_piece", &SubwordModel::unk_piece)
      .def_readonly("continuation_prefix", &SubwordModel::continuation_prefix)
      .def_readonly("boundary_piece", &SubwordModel::boundary_piece)
      .def_readonly("normalization_fingerprint",
                    &SubwordModel::normalization_fingerprint)
      .def_readonly("merges", &SubwordModel::merges)
      .def_property_readonly(
          "vocab",
          [](const SubwordModel& model) {
            py::list vocab;
            for (const VocabEntry& entry : model.vocab) {
              vocab.append(
                  py::make_tuple(entry.piece, entry.id, entry.score));
            }
            return vocab;
          })
      .def("encode", &SubwordModel::encode, py::arg("text"))
      .def("encode_pretoken", &SubwordModel::encode_pretoken,
           py::arg("pretoken"))
      .def("decode", &SubwordModel::decode, py::arg("pieces"))
      .def("serialize", &SubwordModel::serialize)
      .def("save", &SubwordModel::save, py::arg("path"))
      .def_static("load", &SubwordModel::load, py::arg("path"));

  m.def("train_tokenizer", &train_dispatch, py::arg("kind"),
        py::arg("word_counts"), py::arg("config") = TrainerConfig(),
        "Train a bpe, wordpiece or unigram model from pre-token counts.");
  m.def(
      "unigram_em_step",
      [](const std::map<std::string, std::uint64_t>& counts,
         const std::vector<std::string>& pieces,
         const std::vector<double>& probs, std::uint32_t shards) {
        const unigram::EmStepResult result =
            unigram::em_step(counts, pieces, probs, shards);
        return py::make_tuple(result.probs, result.loglik);
      },
      py::arg("word_counts"), py::arg("pieces"), py::arg("probs"),
      py::arg("shards") = 1);

  // --- lexical repair -------------------------------------------------
  py::class_<FrequencyLexicon>(m, "FrequencyLexicon")
      .def(py::init<>())
      .def_static("build", &FrequencyLexicon::build, py::arg("tokens"))
      .def("count", &FrequencyLexicon::count, py::arg("token"))
      .def("add", &FrequencyLexicon::add, py::arg("token"), py::arg("count"))
      .def_property_readonly("source_tokens", &FrequencyLexicon::source_tokens)
      .def("save", &FrequencyLexicon::save, py::arg("path"))
      .def_static("load", &FrequencyLexicon::load, py::arg("path"));
  m.def("split_trailing_conjunction",
        [](const std::string& word, const FrequencyLexicon& lexicon) {
          return split_trailing_conjunction(word, lexicon);
        });
  m.def("repair_text", &repair_text, py::arg("tokens"), py::arg("lexicon"));

  // --- corpus ----------------------------------------------------------
  py::class_<SentencePair>(m, "SentencePair")
      .def(py::init<>())
      .def_readwrite("id", &SentencePair::id)
      .def_readwrite("corpus_tag", &SentencePair::corpus_tag)
      .def_readwrite("src_lang", &SentencePair::src_lang)
      .def_readwrite("tgt_lang", &SentencePair::tgt_lang)
      .def_readwrite("src", &SentencePair::src)
      .def_readwrite("refs", &SentencePair::refs);

  py::class_<ParallelCorpus>(m, "ParallelCorpus")
      .def(py::init<>())
      .def_readwrite("pairs", &ParallelCorpus::pairs)
      .def_readonly("provenance", &ParallelCorpus::provenance);

  m.def(
      "parse_tmx",
      [](const std::string& document, const std::string& src_lang,
         const std::string& tgt_lang, const std::string& tag) {
        const TmxParseResult result =
            parse_tmx(document, src_lang, tgt_lang, tag);
        return py::make_tuple(result.corpus, result.warnings);
      },
      py::arg("document"), py::arg("src_lang") = "ckb",
      py::arg("tgt_lang") = "en", py::arg("corpus_tag") = "other");
  m.def("parse_tmx_file",
        [](const std::string& path, const std::string& src_lang,
           const std::string& tgt_lang, const std::string& tag) {
          const TmxParseResult result =
              parse_tmx_file(path, src_lang, tgt_lang, tag);
          return py::make_tuple(result.corpus, result.warnings);
        },
        py::arg("path"), py::arg("src_lang") = "ckb",
        py::arg("tgt_lang") = "en", py::arg("corpus_tag") = "other");
  m.def("explode_refs", &explode_refs, py::arg("corpus"));
  m.def("pairs_to_jsonl", &pairs_to_jsonl, py::arg("corpus"));
  m.def("save_pairs", &save_pairs, py::arg("corpus"), py::arg("path"));
  m.def("load_pairs", &load_pairs, py::arg("path"));
  m.def(
      "compute_stats",
      [](const ParallelCorpus& corpus, const std::string& tokenizer) {
        const TokenizerSelector selector =
            tokenizer == "whitespace" ? TokenizerSelector::kWhitespace
                                      : TokenizerSelector::kWordPunct;
        const CorpusStats stats = compute_stats(corpus, selector);
        auto side = [](const SideStats& s) {
          py::dict out;
          out["lines"] = s.line_count;
          out["tokens"] = s.token_count;
          out["chars"] = s.char_count;
          out["tokens_per_line"] = s.tokens_per_line();
          out["chars_per_line"] = s.chars_per_line();
          return out;
        };
        py::dict out;
        out["src"] = side(stats.src);
        out["tgt"] = side(stats.tgt);
        return out;
      },
      py::arg("corpus"), py::arg("tokenizer") = "wordpunct");
  m.def(
      "split_corpus",
      [](const std::vector<ParallelCorpus>& corpora, std::uint64_t seed,
         double test2, double train, double val, double test1) {
        SplitSpec spec;
        spec.seed = seed;
        spec.test2_fraction = test2;
        spec.train_fraction = train;
        spec.val_fraction = val;
        spec.test1_fraction = test1;
        const SplitResult result = split_corpus(corpora, spec);
        py::dict out;
        out["test2"] = result.test2;
        out["train"] = result.train;
        out["val"] = result.val;
        out["test1"] = result.test1;
        return out;
      },
      py::arg("corpora"), py::arg("seed") = 0, py::arg("test2") = 0.10,
      py::arg("train") = 0.80, py::arg("val") = 0.10, py::arg("test1") = 0.10);

  // --- metrics ----------------------------------------------------------
  m.def(
      "bleu_corpus",
      [](const std::vector<Tokens>& hyps,
         const std::vector<std::vector<Tokens>>& refs, int max_order,
         const std::string& smoothing) {
        return bleu_to_dict(bleu_corpus(
            hyps, refs, max_order,
            smoothing == "floor" ? BleuSmoothing::kFloor
                                 : BleuSmoothing::kNone));
      },
      py::arg("hypotheses"), py::arg("reference_sets"),
      py::arg("max_order") = 4, py::arg("smoothing") = "none");
  m.def(
      "meteor_sentence",
      [](const Tokens& hyp, const std::vector<Tokens>& refs) {
        const MeteorReport report = meteor_sentence(hyp, refs);
        py::dict out;
        out["score"] = report.score;
        out["matches"] = report.matches;
        out["chunks"] = report.chunks;
        out["precision"] = report.precision;
        out["recall"] = report.recall;
        out["fmean"] = report.fmean;
        out["penalty"] = report.penalty;
        return out;
      },
      py::arg("hyp"), py::arg("refs"));
  m.def(
      "ter_sentence",
      [](const Tokens& hyp, const std::vector<Tokens>& refs) {
        const TerReport report = ter_sentence(hyp, refs);
        py::dict out;
        out["score"] = report.score;
        out["edits"] = report.edits;
        out["shifts"] = report.shifts;
        out["normalizer"] = report.normalizer;
        return out;
      },
      py::arg("hyp"), py::arg("refs"));
  m.def(
      "score_files",
      [](const std::string& hyp, const std::vector<std::string>& refs,
         int max_order, const std::string& smoothing,
         const std::string& tokenize) {
        ScoreOptions options;
        options.max_order = max_order;
        options.smoothing = smoothing == "floor" ? BleuSmoothing::kFloor
                                                 : BleuSmoothing::kNone;
        options.tokenizer = tokenize == "none" ? ScoreTokenizer::kNone
                                               : ScoreTokenizer::kWordPunct;
        const ScoreReport report = score_files(hyp, refs, options);
        py::dict out;
        out["bleu"] = bleu_to_dict(report.bleu);
        out["meteor"] = report.meteor;
        out["meteor_matches"] = report.meteor_matches;
        out["meteor_chunks"] = report.meteor_chunks;
        out["ter"] = report.ter;
        out["ter_edits"] = report.ter_edits;
        out["ter_shifts"] = report.ter_shifts;
        out["segments"] = report.segments;
        return out;
      },
      py::arg("hyp_path"), py::arg("ref_paths"), py::arg("max_order") = 4,
      py::arg("smoothing") = "none", py::arg("tokenize") = "wordpunct");

  m.def("sha256_hex",
        [](const std::string& data) { return sha256_hex(data); });
}
