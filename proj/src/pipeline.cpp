#include "kmt/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "kmt/digest.hpp"
#include "kmt/error.hpp"
#include "kmt/lexicon.hpp"
#include "kmt/normalize.hpp"
#include "kmt/tmx.hpp"
#include "kmt/unicode.hpp"

namespace kmt {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Tracks files created during a run so a failing stage can sweep them away.
class RunDir {
 public:
  explicit RunDir(const std::string& dir) : dir_(dir) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error("cannot create output directory '" + dir + "'");
  }

  std::string write(const std::string& name, const std::string& bytes) {
    const fs::path path = fs::path(dir_) / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << bytes;
    out.close();
    created_.push_back(path.string());
    return path.string();
  }

  void remove_created() {
    for (const std::string& path : created_) {
      std::error_code ec;
      fs::remove(path, ec);
    }
    created_.clear();
  }

  const std::vector<std::string>& created() const { return created_; }
  const std::string& dir() const { return dir_; }

 private:
  std::string dir_;
  std::vector<std::string> created_;
};

NormalizationConfig config_for_language(const std::string& lang) {
  return lang == "ckb" ? NormalizationConfig::kurdish()
                       : NormalizationConfig::english();
}

}  // namespace

PipelineConfig PipelineConfig::from_json(std::string_view text,
                                         const std::string& origin) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("config " + origin + ": " + e.what());
  }
  PipelineConfig config;
  try {
    config.src_lang = doc.value("src_lang", config.src_lang);
    config.tgt_lang = doc.value("tgt_lang", config.tgt_lang);
    config.explode_refs = doc.value("explode_refs", config.explode_refs);
    config.lexicon_path = doc.value("lexicon", std::string());
    config.truecase_model_path = doc.value("truecase_model", std::string());
    config.out_dir = doc.value("out_dir", std::string());
    if (doc.contains("repair")) {
      config.repair_tags = doc.at("repair").get<std::vector<std::string>>();
      config.repair_tags_set = true;
    }
    if (!doc.contains("corpora") || !doc.at("corpora").is_array()) {
      throw Error("config " + origin + ": missing 'corpora' array");
    }
    for (const auto& entry : doc.at("corpora")) {
      CorpusInput input;
      input.tag = entry.at("tag").get<std::string>();
      input.tmx_path = entry.value("tmx", std::string());
      input.src_path = entry.value("src", std::string());
      input.tgt_path = entry.value("tgt", std::string());
      const bool tmx = !input.tmx_path.empty();
      const bool plain = !input.src_path.empty() && !input.tgt_path.empty();
      if (tmx == plain) {
        throw Error("config " + origin + ": corpus '" + input.tag +
                    "' needs either 'tmx' or both 'src' and 'tgt'");
      }
      config.corpora.push_back(std::move(input));
    }
    if (doc.contains("tokenizer")) {
      const auto& tok = doc.at("tokenizer");
      config.tokenizer_kind = tok.value("kind", config.tokenizer_kind);
      config.trainer.vocabulary_size =
          tok.value("vocab_size", config.trainer.vocabulary_size);
      config.trainer.character_coverage =
          tok.value("coverage", config.trainer.character_coverage);
      config.trainer.max_piece_length =
          tok.value("max_piece_length", config.trainer.max_piece_length);
      config.trainer.min_pair_frequency =
          tok.value("min_pair_frequency", config.trainer.min_pair_frequency);
      config.trainer.shards = tok.value("shards", config.trainer.shards);
    }
    if (doc.contains("split")) {
      const auto& split = doc.at("split");
      config.split.seed = split.value("seed", config.split.seed);
      config.split.test2_fraction =
          split.value("test2", config.split.test2_fraction);
      if (split.contains("ratios")) {
        const auto ratios = split.at("ratios").get<std::vector<double>>();
        if (ratios.size() != 3) {
          throw Error("config " + origin + ": 'split.ratios' needs 3 values");
        }
        config.split.train_fraction = ratios[0];
        config.split.val_fraction = ratios[1];
        config.split.test1_fraction = ratios[2];
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("config " + origin + ": " + e.what());
  }
  if (config.out_dir.empty()) {
    throw Error("config " + origin + ": missing 'out_dir'");
  }
  if (config.corpora.empty()) {
    throw Error("config " + origin + ": no corpora configured");
  }
  return config;
}

PipelineConfig PipelineConfig::from_json_file(const std::string& path) {
  return from_json(read_file(path), "'" + path + "'");
}

std::string run_pipeline(const PipelineConfig& config) {
  // Input paths must exist up front; the lexicon is the repair stage's
  // concern and is deliberately not checked here.
  for (const CorpusInput& input : config.corpora) {
    for (const std::string& path :
         {input.tmx_path, input.src_path, input.tgt_path}) {
      if (!path.empty() && !fs::exists(path)) {
        throw Error("input path does not exist: '" + path + "'");
      }
    }
  }

  RunDir run(config.out_dir);
  ordered_json manifest;
  ordered_json inputs = ordered_json::array();
  ordered_json warnings = ordered_json::array();
  std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> counts;

  std::string stage = "ingest";
  try {
    // ingest
    std::vector<ParallelCorpus> corpora;
    for (const CorpusInput& input : config.corpora) {
      ParallelCorpus corpus;
      if (!input.tmx_path.empty()) {
        TmxParseResult parsed = parse_tmx_file(input.tmx_path, config.src_lang,
                                               config.tgt_lang, input.tag);
        for (const std::string& w : parsed.warnings) warnings.push_back(w);
        corpus = std::move(parsed.corpus);
      } else {
        corpus = read_plain_parallel(input.src_path, input.tgt_path, input.tag,
                                     config.src_lang, config.tgt_lang);
      }
      for (const std::string& entry : corpus.provenance) {
        inputs.push_back(entry);
      }
      if (config.explode_refs) corpus = explode_refs(corpus);
      run.write(input.tag + ".pairs.jsonl", pairs_to_jsonl(corpus));
      corpora.push_back(std::move(corpus));
    }

    // normalize
    stage = "normalize";
    const NormalizationConfig src_norm = config_for_language(config.src_lang);
    const NormalizationConfig tgt_norm = config_for_language(config.tgt_lang);
    TruecaseModel truecase;
    const bool use_truecase = !config.truecase_model_path.empty();
    if (use_truecase) {
      truecase = TruecaseModel::load(config.truecase_model_path);
    }
    for (std::size_t c = 0; c < corpora.size(); ++c) {
      for (SentencePair& pair : corpora[c].pairs) {
        pair.src = normalize_pipeline(pair.src, src_norm).text;
        for (std::string& ref : pair.refs) {
          ref = normalize_pipeline(ref, tgt_norm).text;
          if (use_truecase) {
            ref = join_tokens(apply_truecase(wordpunct_tokenize(ref), truecase));
          }
        }
      }
      run.write(config.corpora[c].tag + ".norm.jsonl",
                pairs_to_jsonl(corpora[c]));
    }

    // repair (source side; defaults to tanzil-tagged corpora)
    stage = "repair";
    std::vector<std::string> repair_tags = config.repair_tags;
    if (!config.repair_tags_set) {
      for (const CorpusInput& input : config.corpora) {
        if (input.tag == "tanzil") repair_tags.push_back(input.tag);
      }
    }
    if (!repair_tags.empty()) {
      if (config.lexicon_path.empty()) {
        throw Error("repair requested but no lexicon configured");
      }
      const FrequencyLexicon lexicon =
          FrequencyLexicon::load(config.lexicon_path);
      for (std::size_t c = 0; c < corpora.size(); ++c) {
        if (std::find(repair_tags.begin(), repair_tags.end(),
                      config.corpora[c].tag) == repair_tags.end()) {
          continue;
        }
        for (SentencePair& pair : corpora[c].pairs) {
          pair.src =
              join_tokens(repair_text(wordpunct_tokenize(pair.src), lexicon));
        }
        run.write(config.corpora[c].tag + ".repaired.jsonl",
                  pairs_to_jsonl(corpora[c]));
      }
    }

    // train-tokenizer (source side of every corpus)
    stage = "train-tokenizer";
    SubwordModel model;
    const bool subword = config.tokenizer_kind != "wordpunct";
    if (subword) {
      std::vector<std::string> lines;
      for (const ParallelCorpus& corpus : corpora) {
        for (const SentencePair& pair : corpus.pairs) {
          lines.push_back(pair.src);
        }
      }
      const auto word_counts = count_pretokens(lines);
      const SubwordKind kind = subword_kind_from_string(config.tokenizer_kind);
      TrainerConfig trainer = config.trainer;
      trainer.normalization_fingerprint = src_norm.fingerprint();
      switch (kind) {
        case SubwordKind::kBpe:
          model = train_bpe(word_counts, trainer);
          break;
        case SubwordKind::kWordPiece:
          model = train_wordpiece(word_counts, trainer);
          break;
        case SubwordKind::kUnigram:
          model = train_unigram(word_counts, trainer);
          break;
      }
      run.write("tokenizer." + config.tokenizer_kind + ".json",
                model.serialize());
    }

    auto count_tokens = [&](const std::string& text) -> std::uint64_t {
      if (subword) return model.encode(text).size();
      return wordpunct_tokenize(text).size();
    };

    // tokenize: emit the tokenized source side per corpus
    stage = "tokenize";
    for (std::size_t c = 0; c < corpora.size(); ++c) {
      std::string out;
      for (const SentencePair& pair : corpora[c].pairs) {
        if (subword) {
          out += join_tokens(model.encode(pair.src));
        } else {
          out += join_tokens(wordpunct_tokenize(pair.src));
        }
        out.push_back('\n');
      }
      run.write(config.corpora[c].tag + ".tokens.txt", out);
    }

    // split
    stage = "split";
    SplitResult split = split_corpus(corpora, config.split);
    auto record_set = [&](const std::string& name, const ParallelCorpus& set) {
      run.write(name + ".jsonl", pairs_to_jsonl(set));
      std::uint64_t tokens = 0;
      for (const SentencePair& pair : set.pairs) {
        tokens += count_tokens(pair.src);
      }
      counts[name] = {set.pairs.size(), tokens};
    };
    for (std::size_t c = 0; c < split.test2.size(); ++c) {
      record_set("test2-" + config.corpora[c].tag, split.test2[c]);
    }
    record_set("train", split.train);
    record_set("val", split.val);
    record_set("test1", split.test1);

    // stats
    stage = "stats";
    ordered_json stats_json;
    std::ostringstream stats_text;
    stats_text << "corpus\tlanguage\ttokens per line\tcharacters per line\n";
    for (std::size_t c = 0; c < corpora.size(); ++c) {
      const CorpusStats stats =
          compute_stats(corpora[c], TokenizerSelector::kWordPunct);
      ordered_json entry;
      auto side_json = [](const SideStats& side) {
        ordered_json out;
        out["lines"] = side.line_count;
        out["tokens"] = side.token_count;
        out["chars"] = side.char_count;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.2f", side.tokens_per_line());
        out["tokens_per_line"] = std::string(buf);
        std::snprintf(buf, sizeof(buf), "%.2f", side.chars_per_line());
        out["chars_per_line"] = std::string(buf);
        return out;
      };
      entry[config.src_lang] = side_json(stats.src);
      entry[config.tgt_lang] = side_json(stats.tgt);
      stats_json[config.corpora[c].tag] = std::move(entry);
      char src_t[32], src_c[32], tgt_t[32], tgt_c[32];
      std::snprintf(src_t, sizeof(src_t), "%.2f", stats.src.tokens_per_line());
      std::snprintf(src_c, sizeof(src_c), "%.2f", stats.src.chars_per_line());
      std::snprintf(tgt_t, sizeof(tgt_t), "%.2f", stats.tgt.tokens_per_line());
      std::snprintf(tgt_c, sizeof(tgt_c), "%.2f", stats.tgt.chars_per_line());
      stats_text << config.corpora[c].tag << '\t' << config.src_lang << '\t'
                 << src_t << '\t' << src_c << '\n';
      stats_text << config.corpora[c].tag << '\t' << config.tgt_lang << '\t'
                 << tgt_t << '\t' << tgt_c << '\n';
    }
    run.write("stats.json", stats_json.dump(2) + "\n");
    run.write("stats.txt", stats_text.str());
  } catch (const Error& e) {
    run.remove_created();
    throw StageError(stage, e.what());
  }

  manifest["inputs"] = std::move(inputs);
  {
    ordered_json echo;
    echo["src_lang"] = config.src_lang;
    echo["tgt_lang"] = config.tgt_lang;
    echo["explode_refs"] = config.explode_refs;
    echo["lexicon"] = config.lexicon_path;
    echo["tokenizer"] = config.tokenizer_kind;
    echo["vocab_size"] = config.trainer.vocabulary_size;
    echo["coverage"] = config.trainer.character_coverage;
    echo["seed"] = config.split.seed;
    echo["test2_fraction"] = config.split.test2_fraction;
    echo["ratios"] = {config.split.train_fraction, config.split.val_fraction,
                      config.split.test1_fraction};
    manifest["config"] = std::move(echo);
  }
  manifest["warnings"] = std::move(warnings);
  ordered_json counts_json;
  for (const auto& [name, value] : counts) {
    counts_json[name] = {{"sentences", value.first}, {"tokens", value.second}};
  }
  manifest["counts"] = std::move(counts_json);

  std::map<std::string, std::string> digests;
  for (const std::string& path : run.created()) {
    digests[fs::path(path).filename().string()] = sha256_file(path);
  }
  ordered_json artifacts;
  for (const auto& [name, digest] : digests) {
    artifacts[name] = digest;
  }
  manifest["artifacts"] = std::move(artifacts);

  const std::string manifest_text = manifest.dump(2) + "\n";
  run.write("manifest.json", manifest_text);
  return manifest_text;
}

std::string verify_manifest(const std::string& manifest_path, bool& ok) {
  ordered_json manifest;
  try {
    manifest = ordered_json::parse(read_file(manifest_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("manifest '" + manifest_path + "': " + e.what());
  }
  const fs::path dir = fs::path(manifest_path).parent_path();
  std::ostringstream report;
  ok = true;
  if (!manifest.contains("artifacts")) {
    throw Error("manifest '" + manifest_path + "': missing 'artifacts'");
  }
  for (const auto& [name, digest] : manifest.at("artifacts").items()) {
    const fs::path path = dir / name;
    std::string status;
    if (!fs::exists(path)) {
      status = "MISSING";
      ok = false;
    } else if (sha256_file(path.string()) != digest.get<std::string>()) {
      status = "DIGEST MISMATCH";
      ok = false;
    } else {
      status = "ok";
    }
    report << name << "\t" << status << "\n";
  }
  return report.str();
}

std::vector<BucketRow> eval_buckets(const std::vector<std::string>& hyp_lines,
                                    const std::vector<std::string>& ref_lines,
                                    const std::vector<std::uint64_t>& edges,
                                    int max_order, bool bucket_by_source) {
  if (hyp_lines.size() != ref_lines.size()) {
    throw Error("buckets: hypothesis has " + std::to_string(hyp_lines.size()) +
                " lines but reference has " +
                std::to_string(ref_lines.size()));
  }
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (edges[i] <= edges[i - 1]) {
      throw Error("bucket edges must be strictly increasing");
    }
  }

  struct Bucket {
    std::vector<Tokens> hyps;
    std::vector<std::vector<Tokens>> refs;
  };
  std::vector<Bucket> buckets(edges.size() + 1);
  for (std::size_t i = 0; i < hyp_lines.size(); ++i) {
    const Tokens hyp = wordpunct_tokenize(hyp_lines[i]);
    const Tokens ref = wordpunct_tokenize(ref_lines[i]);
    const std::size_t measure = bucket_by_source ? hyp.size() : ref.size();
    std::size_t slot = edges.size();
    for (std::size_t e = 0; e < edges.size(); ++e) {
      if (measure <= edges[e]) {
        slot = e;
        break;
      }
    }
    buckets[slot].hyps.push_back(hyp);
    buckets[slot].refs.push_back({ref});
  }

  std::vector<BucketRow> rows;
  for (std::size_t b = 0; b < buckets.size(); ++b) {
    BucketRow row;
    row.label = b < edges.size()
                    ? "<=" + std::to_string(edges[b])
                    : ">" + (edges.empty() ? std::string("0")
                                           : std::to_string(edges.back()));
    row.count = buckets[b].hyps.size();
    if (row.count > 0) {
      for (int order = 1; order <= max_order; ++order) {
        row.bleu.push_back(bleu_corpus(buckets[b].hyps, buckets[b].refs, order,
                                       BleuSmoothing::kFloor)
                               .bleu);
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string buckets_to_csv(const std::vector<BucketRow>& rows, int max_order) {
  std::ostringstream out;
  out << "bucket,count";
  for (int order = 1; order <= max_order; ++order) out << ",bleu" << order;
  out << "\n";
  out.setf(std::ios::fixed);
  out.precision(3);
  for (const BucketRow& row : rows) {
    out << row.label << "," << row.count;
    for (int order = 1; order <= max_order; ++order) {
      out << ",";
      if (static_cast<std::size_t>(order) <= row.bleu.size()) {
        out << row.bleu[order - 1];
      }
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace kmt
