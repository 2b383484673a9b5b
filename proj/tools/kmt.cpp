// kmt: preprocessing and evaluation toolkit for Sorani Kurdish <-> English
// parallel data. One subcommand per pipeline stage; see README.md.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kmt/corpus.hpp"
#include "kmt/digest.hpp"
#include "kmt/error.hpp"
#include "kmt/lexicon.hpp"
#include "kmt/metrics.hpp"
#include "kmt/normalize.hpp"
#include "kmt/pipeline.hpp"
#include "kmt/subword.hpp"
#include "kmt/tmx.hpp"
#include "kmt/unicode.hpp"

namespace {

namespace fs = std::filesystem;

std::vector<std::string> read_lines_from(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::vector<std::string> read_lines_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw kmt::Error("cannot open '" + path + "'");
  return read_lines_from(in);
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::vector<std::uint64_t> parse_edges(const std::string& csv) {
  std::vector<std::uint64_t> edges;
  std::stringstream ss(csv);
  std::string field;
  while (std::getline(ss, field, ',')) {
    if (field.empty()) continue;
    edges.push_back(std::stoull(field));
  }
  return edges;
}

struct NormalizeArgs {
  std::string lang;
  std::string profile;
  bool no_initial_r = false;
  bool no_parens = false;
  bool keep_zwnj = false;
  bool no_unify = false;
  std::string truecase_model;
};

int cmd_normalize(const NormalizeArgs& args) {
  kmt::GraphemeMap profile_storage;
  const kmt::GraphemeMap* profile = &kmt::GraphemeMap::paper_profile();
  if (!args.profile.empty()) {
    profile_storage = kmt::GraphemeMap::load(args.profile);
    profile = &profile_storage;
  }
  kmt::NormalizationConfig config = args.lang == "ckb"
                                        ? kmt::NormalizationConfig::kurdish()
                                        : kmt::NormalizationConfig::english();
  config.grapheme_profile = profile;
  if (args.no_initial_r) config.initial_r = false;
  if (args.no_parens) config.strip_parens = false;
  if (args.keep_zwnj) config.remove_zwnj = false;
  if (args.no_unify) config.unify = false;

  std::optional<kmt::TruecaseModel> truecase;
  if (!args.truecase_model.empty()) {
    if (args.lang != "en") {
      throw kmt::Error("--truecase-model applies to --lang en only");
    }
    truecase = kmt::TruecaseModel::load(args.truecase_model);
  }

  std::string line;
  std::uint64_t warned = 0;
  while (std::getline(std::cin, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    kmt::NormalizeResult result = kmt::normalize_pipeline(line, config);
    for (const std::string& warning : result.warnings) {
      ++warned;
      std::cerr << "warning: line " << warned << ": " << warning << "\n";
    }
    if (truecase) {
      result.text = join_tokens(
          kmt::apply_truecase(kmt::wordpunct_tokenize(result.text), *truecase));
    }
    std::cout << result.text << "\n";
  }
  return 0;
}

int cmd_score(const std::string& hyp, const std::vector<std::string>& refs,
              int max_order, const std::string& smooth,
              const std::string& tokenize, bool json) {
  kmt::ScoreOptions options;
  options.max_order = max_order;
  options.smoothing = smooth == "floor" ? kmt::BleuSmoothing::kFloor
                                        : kmt::BleuSmoothing::kNone;
  options.tokenizer = tokenize == "none" ? kmt::ScoreTokenizer::kNone
                                         : kmt::ScoreTokenizer::kWordPunct;
  const kmt::ScoreReport report = kmt::score_files(hyp, refs, options);
  std::cout << (json ? report.to_json() : report.to_text());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kurdish-English MT preprocessing and evaluation toolkit"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  std::uint64_t global_seed = 0;
  bool global_json = false;
  std::string global_out;
  app.add_option("--seed", global_seed, "default RNG seed")->group("Global");
  app.add_flag("--json", global_json, "JSON output where supported")
      ->group("Global");
  app.add_option("--out", global_out, "default output path")->group("Global");

  // normalize
  NormalizeArgs norm_args;
  auto* normalize = app.add_subcommand("normalize",
                                       "normalize text, stdin to stdout");
  normalize->add_option("--lang", norm_args.lang, "language side")
      ->required()
      ->check(CLI::IsMember({"ckb", "en"}));
  normalize->add_option("--profile", norm_args.profile,
                        "grapheme map file (default: built-in paper profile)");
  normalize->add_flag("--no-initial-r", norm_args.no_initial_r,
                      "keep word-initial r unchanged");
  normalize->add_flag("--no-parens", norm_args.no_parens,
                      "keep parenthesised text");
  normalize->add_flag("--keep-zwnj", norm_args.keep_zwnj, "keep U+200C");
  normalize->add_flag("--no-unify", norm_args.no_unify,
                      "skip grapheme unification");
  normalize->add_option("--truecase-model", norm_args.truecase_model,
                        "apply a trained truecase model (en only)");

  // build-lexicon
  std::string lex_in, lex_out;
  auto* build_lexicon =
      app.add_subcommand("build-lexicon", "count WordPunct tokens");
  build_lexicon->add_option("--in", lex_in, "normalized corpus")->required();
  build_lexicon->add_option("--out", lex_out, "lexicon TSV")->required();

  // repair
  std::string repair_lexicon;
  auto* repair = app.add_subcommand(
      "repair", "split trailing conjunctions, stdin to stdout");
  repair->add_option("--lexicon", repair_lexicon, "frequency lexicon TSV")
      ->required();

  // train-tokenizer
  std::string tt_kind, tt_in, tt_out, tt_fingerprint = "unspecified";
  kmt::TrainerConfig tt_config;
  auto* train_tok = app.add_subcommand("train-tokenizer",
                                       "train a subword tokenizer");
  train_tok->add_option("--kind", tt_kind, "bpe|unigram|wordpiece")
      ->required()
      ->check(CLI::IsMember({"bpe", "unigram", "wordpiece"}));
  train_tok->add_option("--vocab-size", tt_config.vocabulary_size,
                        "target vocabulary size");
  train_tok->add_option("--coverage", tt_config.character_coverage,
                        "character coverage in (0,1]");
  train_tok->add_option("--max-piece-length", tt_config.max_piece_length,
                        "maximum piece length in codepoints");
  train_tok->add_option("--min-pair-frequency", tt_config.min_pair_frequency,
                        "minimum merge pair frequency");
  train_tok->add_option("--shards", tt_config.shards,
                        "counting/E-step shards");
  train_tok->add_option("--norm-fingerprint", tt_fingerprint,
                        "normalization fingerprint to record");
  train_tok->add_option("--in", tt_in, "normalized corpus")->required();
  train_tok->add_option("--out", tt_out, "model file")->required();

  // tokenize
  std::string tok_model, tok_fingerprint;
  bool tok_wordpunct = false;
  auto* tokenize =
      app.add_subcommand("tokenize", "tokenize lines, stdin to stdout");
  tokenize->add_option("--model", tok_model, "trained model file");
  tokenize->add_flag("--wordpunct", tok_wordpunct,
                     "rule-based WordPunct tokenization (no model)");
  tokenize->add_option("--norm-fingerprint", tok_fingerprint,
                       "fingerprint of the normalization applied to the "
                       "input; warns when it differs from the model's");

  // ingest-tmx
  std::string tmx_src = "ckb", tmx_tgt = "en", tmx_tag = "other", tmx_in,
              tmx_out;
  bool tmx_explode = false;
  auto* ingest = app.add_subcommand("ingest-tmx", "TMX to JSONL pairs");
  ingest->add_option("--src", tmx_src, "source language code");
  ingest->add_option("--tgt", tmx_tgt, "target language code");
  ingest->add_option("--tag", tmx_tag, "corpus tag");
  ingest->add_option("--in", tmx_in, "TMX file")->required();
  ingest->add_option("--out", tmx_out, "pairs JSONL")->required();
  ingest->add_flag("--explode", tmx_explode,
                   "one pair per reference instead of grouped refs");

  // stats
  std::string stats_pairs, stats_src_file, stats_tgt_file,
      stats_tokenize = "wordpunct";
  bool stats_normalized = false;
  auto* stats = app.add_subcommand("stats", "tokens/chars per line");
  stats->add_option("--pairs", stats_pairs, "pairs JSONL");
  stats->add_option("--src-file", stats_src_file, "plain source file");
  stats->add_option("--tgt-file", stats_tgt_file, "plain target file");
  stats->add_option("--tokenize", stats_tokenize, "wordpunct|whitespace")
      ->check(CLI::IsMember({"wordpunct", "whitespace"}));
  stats->add_flag("--normalized", stats_normalized,
                  "normalize each side per its language before counting");

  // split
  std::vector<std::string> split_pairs;
  std::string split_ratios = "0.8,0.1,0.1", split_out_dir = ".";
  double split_test2 = 0.10;
  std::uint64_t split_seed = 0;
  bool split_seed_set = false;
  auto* split = app.add_subcommand("split", "two-stage corpus split");
  split->add_option("--pairs", split_pairs, "pairs JSONL, one per corpus")
      ->required();
  split
      ->add_option_function<std::uint64_t>(
          "--seed",
          [&](const std::uint64_t& v) {
            split_seed = v;
            split_seed_set = true;
          },
          "shuffle seed")
      ->expected(1);
  split->add_option("--test2", split_test2, "per-corpus held-out fraction");
  split->add_option("--ratios", split_ratios, "train,val,test1 fractions");
  split->add_option("--out-dir", split_out_dir, "output directory");

  // buckets
  std::string buckets_pairs, buckets_hyp, buckets_ref,
      buckets_edges = "25,50,75";
  int buckets_max_order = 4;
  bool buckets_source_side = false;
  auto* buckets =
      app.add_subcommand("buckets", "length buckets; with --hyp/--ref, "
                                    "BLEU per bucket as CSV");
  buckets->add_option("--pairs", buckets_pairs, "pairs JSONL to partition");
  buckets->add_option("--hyp", buckets_hyp, "hypothesis file");
  buckets->add_option("--ref", buckets_ref, "reference file");
  buckets->add_option("--edges", buckets_edges, "bucket edges");
  buckets->add_option("--max-order", buckets_max_order, "highest BLEU order");
  buckets->add_flag("--source-side", buckets_source_side,
                    "bucket by hypothesis side instead of reference side");

  // score
  std::string score_hyp, score_smooth = "none", score_tokenize = "wordpunct";
  std::vector<std::string> score_refs;
  int score_max_order = 4;
  auto* score = app.add_subcommand("score", "BLEU, METEOR and TER");
  score->add_option("--hyp", score_hyp, "hypothesis file")->required();
  score->add_option("--ref", score_refs, "reference file (repeatable)")
      ->required();
  score->add_option("--max-order", score_max_order, "BLEU order")
      ->check(CLI::Range(1, 4));
  score->add_option("--smooth", score_smooth, "none|floor")
      ->check(CLI::IsMember({"none", "floor"}));
  score->add_option("--tokenize", score_tokenize, "wordpunct|none")
      ->check(CLI::IsMember({"wordpunct", "none"}));

  // run
  std::string run_config;
  auto* run = app.add_subcommand("run", "full pipeline from a JSON config");
  run->add_option("--config", run_config, "pipeline config JSON")->required();

  // verify
  std::string verify_manifest_path;
  auto* verify = app.add_subcommand("verify", "re-check manifest digests");
  verify->add_option("--manifest", verify_manifest_path, "manifest.json")
      ->required();

  // train-truecaser
  std::string tc_in, tc_out;
  auto* train_tc =
      app.add_subcommand("train-truecaser", "frequency-of-casing model");
  train_tc->add_option("--in", tc_in, "tokenizable corpus")->required();
  train_tc->add_option("--out", tc_out, "model TSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (normalize->parsed()) return cmd_normalize(norm_args);

    if (build_lexicon->parsed()) {
      std::vector<std::string> tokens;
      for (const std::string& line : read_lines_file(lex_in)) {
        for (std::string& token : kmt::wordpunct_tokenize(line)) {
          tokens.push_back(std::move(token));
        }
      }
      kmt::FrequencyLexicon::build(tokens).save(lex_out);
      return 0;
    }

    if (repair->parsed()) {
      const kmt::FrequencyLexicon lexicon =
          kmt::FrequencyLexicon::load(repair_lexicon);
      std::string line;
      while (std::getline(std::cin, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::cout << join_tokens(
                         kmt::repair_text(kmt::wordpunct_tokenize(line),
                                          lexicon))
                  << "\n";
      }
      return 0;
    }

    if (train_tok->parsed()) {
      tt_config.normalization_fingerprint = tt_fingerprint;
      const auto word_counts =
          kmt::count_pretokens(read_lines_file(tt_in));
      kmt::SubwordModel model;
      switch (kmt::subword_kind_from_string(tt_kind)) {
        case kmt::SubwordKind::kBpe:
          model = kmt::train_bpe(word_counts, tt_config);
          break;
        case kmt::SubwordKind::kWordPiece:
          model = kmt::train_wordpiece(word_counts, tt_config);
          break;
        case kmt::SubwordKind::kUnigram:
          model = kmt::train_unigram(word_counts, tt_config);
          break;
      }
      model.save(tt_out);
      return 0;
    }

    if (tokenize->parsed()) {
      if (tok_wordpunct == !tok_model.empty()) {
        throw CLI::ValidationError(
            "tokenize", "pass exactly one of --model or --wordpunct");
      }
      std::optional<kmt::SubwordModel> model;
      if (!tok_model.empty()) model = kmt::SubwordModel::load(tok_model);
      if (model && !tok_fingerprint.empty() &&
          tok_fingerprint != model->normalization_fingerprint) {
        std::cerr << "warning: input normalization fingerprint '"
                  << tok_fingerprint << "' differs from the model's '"
                  << model->normalization_fingerprint << "'\n";
      }
      std::string line;
      while (std::getline(std::cin, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (model) {
          std::cout << join_tokens(model->encode(line)) << "\n";
        } else {
          std::cout << join_tokens(kmt::wordpunct_tokenize(line)) << "\n";
        }
      }
      return 0;
    }

    if (ingest->parsed()) {
      kmt::TmxParseResult parsed =
          kmt::parse_tmx_file(tmx_in, tmx_src, tmx_tgt, tmx_tag);
      for (const std::string& warning : parsed.warnings) {
        std::cerr << "warning: " << warning << "\n";
      }
      const kmt::ParallelCorpus out =
          tmx_explode ? kmt::explode_refs(parsed.corpus) : parsed.corpus;
      kmt::save_pairs(out, tmx_out);
      std::cerr << out.pairs.size() << " pairs written to " << tmx_out << "\n";
      return 0;
    }

    if (stats->parsed()) {
      kmt::ParallelCorpus corpus;
      if (!stats_pairs.empty()) {
        corpus = kmt::load_pairs(stats_pairs);
      } else if (!stats_src_file.empty() && !stats_tgt_file.empty()) {
        corpus = kmt::read_plain_parallel(stats_src_file, stats_tgt_file,
                                          "other", "src", "tgt");
      } else {
        throw CLI::ValidationError(
            "stats", "pass --pairs or both --src-file and --tgt-file");
      }
      if (stats_normalized) {
        const kmt::NormalizationConfig src_norm =
            corpus.pairs.empty() || corpus.pairs[0].src_lang != "en"
                ? kmt::NormalizationConfig::kurdish()
                : kmt::NormalizationConfig::english();
        const kmt::NormalizationConfig tgt_norm =
            corpus.pairs.empty() || corpus.pairs[0].tgt_lang != "en"
                ? kmt::NormalizationConfig::kurdish()
                : kmt::NormalizationConfig::english();
        for (kmt::SentencePair& pair : corpus.pairs) {
          pair.src = kmt::normalize_pipeline(pair.src, src_norm).text;
          for (std::string& ref : pair.refs) {
            ref = kmt::normalize_pipeline(ref, tgt_norm).text;
          }
        }
      }
      const kmt::TokenizerSelector selector =
          stats_tokenize == "whitespace" ? kmt::TokenizerSelector::kWhitespace
                                         : kmt::TokenizerSelector::kWordPunct;
      const kmt::CorpusStats result = kmt::compute_stats(corpus, selector);
      auto print_side = [&](const char* name, const kmt::SideStats& side) {
        if (global_json) return;
        std::printf("%-8s lines %8llu  tokens/line %8.2f  chars/line %8.2f\n",
                    name, static_cast<unsigned long long>(side.line_count),
                    side.tokens_per_line(), side.chars_per_line());
      };
      if (global_json) {
        nlohmann::ordered_json doc;
        auto side_json = [](const kmt::SideStats& side) {
          nlohmann::ordered_json out;
          out["lines"] = side.line_count;
          out["tokens"] = side.token_count;
          out["chars"] = side.char_count;
          out["tokens_per_line"] = side.tokens_per_line();
          out["chars_per_line"] = side.chars_per_line();
          return out;
        };
        doc["src"] = side_json(result.src);
        doc["tgt"] = side_json(result.tgt);
        std::cout << doc.dump(2) << "\n";
      } else {
        print_side("src", result.src);
        print_side("tgt", result.tgt);
      }
      return 0;
    }

    if (split->parsed()) {
      kmt::SplitSpec spec;
      spec.seed = split_seed_set ? split_seed : global_seed;
      spec.test2_fraction = split_test2;
      std::stringstream ss(split_ratios);
      std::string field;
      std::vector<double> ratios;
      while (std::getline(ss, field, ',')) ratios.push_back(std::stod(field));
      if (ratios.size() != 3) {
        throw CLI::ValidationError("split",
                                   "--ratios needs train,val,test1");
      }
      spec.train_fraction = ratios[0];
      spec.val_fraction = ratios[1];
      spec.test1_fraction = ratios[2];

      std::vector<kmt::ParallelCorpus> corpora;
      std::vector<std::string> stems;
      for (const std::string& path : split_pairs) {
        corpora.push_back(kmt::load_pairs(path));
        stems.push_back(fs::path(path).stem().string());
      }
      const kmt::SplitResult result = kmt::split_corpus(corpora, spec);
      fs::create_directories(split_out_dir);
      auto emit = [&](const std::string& name, const kmt::ParallelCorpus& c) {
        const std::string path =
            (fs::path(split_out_dir) / (name + ".jsonl")).string();
        kmt::save_pairs(c, path);
        std::cerr << name << ": " << c.pairs.size() << " pairs\n";
      };
      for (std::size_t i = 0; i < result.test2.size(); ++i) {
        emit("test2-" + stems[i], result.test2[i]);
      }
      emit("train", result.train);
      emit("val", result.val);
      emit("test1", result.test1);
      return 0;
    }

    if (buckets->parsed()) {
      const std::vector<std::uint64_t> edges = parse_edges(buckets_edges);
      if (!buckets_hyp.empty() || !buckets_ref.empty()) {
        if (buckets_hyp.empty() || buckets_ref.empty()) {
          throw CLI::ValidationError("buckets",
                                     "--hyp and --ref go together");
        }
        const auto rows = kmt::eval_buckets(
            read_lines_file(buckets_hyp), read_lines_file(buckets_ref), edges,
            buckets_max_order, buckets_source_side);
        std::cout << kmt::buckets_to_csv(rows, buckets_max_order);
        return 0;
      }
      if (buckets_pairs.empty()) {
        throw CLI::ValidationError("buckets",
                                   "pass --pairs or --hyp/--ref");
      }
      const kmt::ParallelCorpus corpus = kmt::load_pairs(buckets_pairs);
      const auto partition = kmt::filter_by_length(
          corpus.pairs, kmt::TokenizerSelector::kWordPunct, edges);
      nlohmann::ordered_json doc;
      for (const kmt::LengthBucket& bucket : partition) {
        doc[bucket.label()] = bucket.pairs.size();
      }
      std::cout << doc.dump(2) << "\n";
      return 0;
    }

    if (score->parsed()) {
      return cmd_score(score_hyp, score_refs, score_max_order, score_smooth,
                       score_tokenize, global_json);
    }

    if (run->parsed()) {
      kmt::PipelineConfig config =
          kmt::PipelineConfig::from_json_file(run_config);
      if (!global_out.empty()) config.out_dir = global_out;
      if (global_seed != 0 && config.split.seed == 0) {
        config.split.seed = global_seed;
      }
      kmt::run_pipeline(config);
      std::cout << (fs::path(config.out_dir) / "manifest.json").string()
                << "\n";
      return 0;
    }

    if (verify->parsed()) {
      bool ok = false;
      std::cout << kmt::verify_manifest(verify_manifest_path, ok);
      return ok ? 0 : 2;
    }

    if (train_tc->parsed()) {
      std::vector<std::vector<std::string>> sentences;
      for (const std::string& line : read_lines_file(tc_in)) {
        sentences.push_back(kmt::wordpunct_tokenize(line));
      }
      kmt::train_truecaser(sentences).save(tc_out);
      return 0;
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const kmt::StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const kmt::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
