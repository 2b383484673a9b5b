#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kmt/error.hpp"
#include "kmt/pipeline.hpp"
#include "kmt/subword.hpp"

using namespace kmt;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out << content;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::path("kmt_test_tmp") / name;
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const {
    return (path / name).string();
  }
};

// 200 aligned lines; a few carry the merged conjunction so repair has work.
void write_fixture_corpus(const std::string& src_path,
                          const std::string& tgt_path) {
  std::ostringstream src, tgt;
  for (int i = 0; i < 200; ++i) {
    if (i % 10 == 0) {
      src << "وشە تاوانبارو ژمارە " << i << "\n";
    } else {
      src << "وشە ژمارە " << i << " ڕستە\n";
    }
    tgt << "word number " << i << " sentence\n";
  }
  write_file(src_path, src.str());
  write_file(tgt_path, tgt.str());
}

std::string fixture_lexicon() {
  return "#total\t1223\nتاوانبار\t1218\nتاوانبارو\t5\n";
}

PipelineConfig fixture_config(const TempDir& dir,
                              const std::string& tokenizer) {
  write_fixture_corpus(dir / "src.txt", dir / "tgt.txt");
  write_file(dir / "lex.tsv", fixture_lexicon());
  PipelineConfig config;
  CorpusInput input;
  input.tag = "tanzil";
  input.src_path = dir / "src.txt";
  input.tgt_path = dir / "tgt.txt";
  config.corpora.push_back(input);
  config.lexicon_path = dir / "lex.tsv";
  config.tokenizer_kind = tokenizer;
  config.trainer.vocabulary_size = 64;
  config.trainer.min_pair_frequency = 2;
  config.split.seed = 9;
  config.out_dir = dir / "out";
  return config;
}

}  // namespace

TEST_CASE("run_pipeline: counts, artifacts and determinism") {
  TempDir dir("pipeline_wordpunct");
  const PipelineConfig config = fixture_config(dir, "wordpunct");
  const std::string manifest_text = run_pipeline(config);

  const auto manifest = nlohmann::ordered_json::parse(manifest_text);
  CHECK(manifest.at("counts").at("test2-tanzil").at("sentences") == 20);
  CHECK(manifest.at("counts").at("train").at("sentences") == 144);
  CHECK(manifest.at("counts").at("val").at("sentences") == 18);
  CHECK(manifest.at("counts").at("test1").at("sentences") == 18);

  // token totals match an independent recount of the set files
  for (const char* set : {"test2-tanzil", "train", "val", "test1"}) {
    const ParallelCorpus pairs =
        load_pairs((fs::path(config.out_dir) / (std::string(set) + ".jsonl"))
                       .string());
    std::uint64_t tokens = 0;
    for (const SentencePair& pair : pairs.pairs) {
      tokens += wordpunct_tokenize(pair.src).size();
    }
    CHECK(manifest.at("counts").at(set).at("tokens") == tokens);
  }

  // repair ran on the tanzil-tagged corpus: the merged form is gone
  const std::string repaired = slurp(config.out_dir + "/tanzil.repaired.jsonl");
  CHECK(repaired.find("تاوانبارو") == std::string::npos);
  CHECK(repaired.find("تاوانبار و") != std::string::npos);

  // re-running the identical config is byte-identical
  const std::string train_before = slurp(config.out_dir + "/train.jsonl");
  fs::remove_all(config.out_dir);
  const std::string manifest2 = run_pipeline(config);
  CHECK(manifest2 == manifest_text);
  CHECK(slurp(config.out_dir + "/train.jsonl") == train_before);
}

TEST_CASE("run_pipeline: subword tokenizer artifacts") {
  for (const std::string kind : {"bpe", "wordpiece", "unigram"}) {
    TempDir dir("pipeline_" + kind);
    const PipelineConfig config = fixture_config(dir, kind);
    run_pipeline(config);
    const SubwordModel model =
        SubwordModel::load(config.out_dir + "/tokenizer." + kind + ".json");
    CHECK(to_string(model.kind) == kind);
    CHECK(model.normalization_fingerprint != "unspecified");
    const auto manifest = nlohmann::ordered_json::parse(
        slurp(config.out_dir + "/manifest.json"));
    CHECK(manifest.at("artifacts").contains("tokenizer." + kind + ".json"));

    // manifest token totals match an independent re-encode of the set file
    const ParallelCorpus train =
        load_pairs((fs::path(config.out_dir) / "train.jsonl").string());
    std::uint64_t recount = 0;
    for (const SentencePair& pair : train.pairs) {
      recount += model.encode(pair.src).size();
    }
    CHECK(manifest.at("counts").at("train").at("tokens").get<std::uint64_t>() ==
          recount);
    CHECK(recount > 0);
  }
}

TEST_CASE("run_pipeline: TMX input with exploded references") {
  TempDir dir("pipeline_tmx");
  std::ostringstream tmx;
  tmx << "<?xml version=\"1.0\"?>\n<tmx version=\"1.4\"><body>\n";
  for (int i = 0; i < 60; ++i) {
    tmx << "<tu><tuv xml:lang=\"ckb\"><seg>ڕستە ژمارە " << i
        << "</seg></tuv>";
    tmx << "<tuv xml:lang=\"en\"><seg>sentence " << i << "</seg></tuv>";
    if (i % 6 == 0) {
      tmx << "<tuv xml:lang=\"en\"><seg>alternate " << i << "</seg></tuv>";
    }
    tmx << "</tu>\n";
  }
  tmx << "</body></tmx>\n";
  write_file(dir / "corpus.tmx", tmx.str());

  PipelineConfig config;
  CorpusInput input;
  input.tag = "ted";
  input.tmx_path = dir / "corpus.tmx";
  config.corpora.push_back(input);
  config.explode_refs = true;
  config.tokenizer_kind = "wordpunct";
  config.split.seed = 2;
  config.out_dir = dir / "out";
  const std::string manifest_text = run_pipeline(config);
  const auto manifest = nlohmann::ordered_json::parse(manifest_text);
  // 60 units, ten of them double-referenced -> 70 exploded pairs
  CHECK(manifest.at("counts").at("test2-ted").at("sentences") == 7);
  const ParallelCorpus pairs =
      load_pairs((fs::path(config.out_dir) / "ted.pairs.jsonl").string());
  CHECK(pairs.pairs.size() == 70);
  // ted is not tanzil-tagged: no repair artifact
  CHECK(!fs::exists(fs::path(config.out_dir) / "ted.repaired.jsonl"));
}

TEST_CASE("run_pipeline: missing lexicon aborts at the repair stage") {
  TempDir dir("pipeline_missing_lex");
  PipelineConfig config = fixture_config(dir, "wordpunct");
  config.lexicon_path = dir / "no_such_lexicon.tsv";
  try {
    run_pipeline(config);
    FAIL("expected a stage error");
  } catch (const StageError& e) {
    CHECK(e.stage_name == "repair");
  }
  // partial outputs were removed
  CHECK(!fs::exists(fs::path(config.out_dir) / "tanzil.pairs.jsonl"));
  CHECK(!fs::exists(fs::path(config.out_dir) / "manifest.json"));
}

TEST_CASE("run_pipeline: nonexistent input fails before any writing") {
  TempDir dir("pipeline_missing_input");
  PipelineConfig config;
  CorpusInput input;
  input.tag = "x";
  input.src_path = dir / "missing_src.txt";
  input.tgt_path = dir / "missing_tgt.txt";
  config.corpora.push_back(input);
  config.out_dir = dir / "out";
  CHECK_THROWS_AS(run_pipeline(config), Error);
}

TEST_CASE("verify_manifest") {
  TempDir dir("pipeline_verify");
  const PipelineConfig config = fixture_config(dir, "wordpunct");
  run_pipeline(config);
  bool ok = false;
  verify_manifest(config.out_dir + "/manifest.json", ok);
  CHECK(ok);

  write_file(config.out_dir + "/train.jsonl", "tampered\n");
  const std::string report =
      verify_manifest(config.out_dir + "/manifest.json", ok);
  CHECK(!ok);
  CHECK(report.find("DIGEST MISMATCH") != std::string::npos);

  fs::remove(fs::path(config.out_dir) / "val.jsonl");
  const std::string missing =
      verify_manifest(config.out_dir + "/manifest.json", ok);
  CHECK(!ok);
  CHECK(missing.find("MISSING") != std::string::npos);
}

TEST_CASE("pipeline config parsing") {
  const std::string text = R"({
    "src_lang": "ckb", "tgt_lang": "en",
    "corpora": [{"tag": "tanzil", "src": "a.txt", "tgt": "b.txt"}],
    "lexicon": "lex.tsv",
    "tokenizer": {"kind": "unigram", "vocab_size": 128, "shards": 4},
    "split": {"seed": 3, "test2": 0.2, "ratios": [0.7, 0.2, 0.1]},
    "out_dir": "out"
  })";
  const PipelineConfig config = PipelineConfig::from_json(text);
  CHECK(config.tokenizer_kind == "unigram");
  CHECK(config.trainer.vocabulary_size == 128);
  CHECK(config.trainer.shards == 4);
  CHECK(config.split.seed == 3);
  CHECK(config.split.test2_fraction == 0.2);
  CHECK(config.split.train_fraction == 0.7);

  CHECK_THROWS_AS(PipelineConfig::from_json("{}"), Error);
  CHECK_THROWS_AS(PipelineConfig::from_json("{\"corpora\": []}"), Error);
  CHECK_THROWS_AS(
      PipelineConfig::from_json(
          R"({"corpora":[{"tag":"x"}], "out_dir":"o"})"),
      Error);
}

// ---- CLI surface ----------------------------------------------------------

namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
};

CliResult run_cli(const std::string& args, const std::string& stdin_text = "",
                  const std::string& workdir = ".") {
  static int counter = 0;
  const std::string out_path =
      (fs::path(workdir) / ("cli_out_" + std::to_string(counter++) + ".txt"))
          .string();
  std::string command = "cd " + workdir + " && ";
  if (!stdin_text.empty()) {
    const std::string in_path = out_path + ".in";
    write_file(in_path, stdin_text);
    command += std::string(KMT_CLI_PATH) + " " + args + " < " +
               fs::path(in_path).filename().string();
  } else {
    command += std::string(KMT_CLI_PATH) + " " + args;
  }
  command += " > " + fs::path(out_path).filename().string() + " 2>/dev/null";
  const int status = std::system(command.c_str());
  CliResult result;
  result.exit_code = WEXITSTATUS(status);
  result.out = slurp(out_path);
  return result;
}

}  // namespace

TEST_CASE("cli: exit codes 0/1/2") {
  TempDir dir("cli_codes");
  CHECK(run_cli("--help", "", dir.path.string()).exit_code == 0);
  CHECK(run_cli("bogus-subcommand", "", dir.path.string()).exit_code == 1);
  CHECK(run_cli("normalize", "", dir.path.string()).exit_code == 1);
  CHECK(run_cli("score --hyp missing.txt --ref missing.txt", "",
                dir.path.string())
            .exit_code == 2);
}

TEST_CASE("cli: normalize and repair pipe") {
  TempDir dir("cli_pipe");
  const CliResult norm =
      run_cli("normalize --lang ckb", "(وتە) رۆژ‌باش\n",
              dir.path.string());
  CHECK(norm.exit_code == 0);
  CHECK(norm.out == "ڕۆژباش\n");

  write_file(dir / "lex.tsv", fixture_lexicon());
  const CliResult repaired =
      run_cli("repair --lexicon lex.tsv", "تاوانبارو بوو\n",
              dir.path.string());
  CHECK(repaired.exit_code == 0);
  CHECK(repaired.out == "تاوانبار و بوو\n");

  // truecasing belongs to the English side
  write_file(dir / "tc.tsv", "#tokens\t1\nthe\tthe\n");
  CHECK(run_cli("normalize --lang ckb --truecase-model tc.tsv", "x\n",
                dir.path.string())
            .exit_code == 2);
}

TEST_CASE("cli: train-tokenizer + tokenize round trip") {
  TempDir dir("cli_tok");
  write_file(dir / "corpus.txt", "ab ab ab cd cd\nab cd ab\n");
  const CliResult trained = run_cli(
      "train-tokenizer --kind bpe --vocab-size 10 --min-pair-frequency 2 "
      "--in corpus.txt --out model.json",
      "", dir.path.string());
  CHECK(trained.exit_code == 0);
  const CliResult pieces =
      run_cli("tokenize --model model.json", "ab cd\n", dir.path.string());
  CHECK(pieces.exit_code == 0);
  CHECK(pieces.out == "ab ▁ cd\n");

  const CliResult wp =
      run_cli("tokenize --wordpunct", "cost $3.88\n", dir.path.string());
  CHECK(wp.out == "cost $ 3 . 88\n");
}

TEST_CASE("cli: score json") {
  TempDir dir("cli_score");
  write_file(dir / "hyp.txt", "the cat sat\n");
  write_file(dir / "ref.txt", "the cat sat down\n");
  const CliResult result = run_cli(
      "--json score --hyp hyp.txt --ref ref.txt --max-order 3", "",
      dir.path.string());
  CHECK(result.exit_code == 0);
  const auto doc = nlohmann::ordered_json::parse(result.out);
  CHECK(doc.at("bleu").get<double>() == doctest::Approx(71.6531).epsilon(1e-4));
  CHECK(doc.at("ter_edits") == 1);

  write_file(dir / "short.txt", "");
  const CliResult mismatch = run_cli(
      "score --hyp short.txt --ref ref.txt", "", dir.path.string());
  CHECK(mismatch.exit_code == 2);
}

TEST_CASE("cli: multi-reference scoring") {
  TempDir dir("cli_multiref");
  write_file(dir / "hyp.txt", "a a b c\n");
  write_file(dir / "ref1.txt", "a b x y\n");
  write_file(dir / "ref2.txt", "a a c z\n");
  const CliResult result = run_cli(
      "--json score --hyp hyp.txt --ref ref1.txt --ref ref2.txt "
      "--max-order 1",
      "", dir.path.string());
  CHECK(result.exit_code == 0);
  const auto doc = nlohmann::ordered_json::parse(result.out);
  // clip maxima across references: a:2, b:1, c:1 -> 4/4
  CHECK(doc.at("ngram_precisions")[0].at("clipped") == 4);
  CHECK(doc.at("ngram_precisions")[0].at("total") == 4);
}

TEST_CASE("cli: global seed drives the split") {
  TempDir dir("cli_seed");
  write_fixture_corpus(dir / "src.txt", dir / "tgt.txt");
  const CliResult ingest = run_cli(
      "--json stats --src-file src.txt --tgt-file tgt.txt", "",
      dir.path.string());
  CHECK(ingest.exit_code == 0);

  ParallelCorpus corpus = read_plain_parallel(dir / "src.txt", dir / "tgt.txt",
                                              "t", "ckb", "en");
  save_pairs(corpus, dir / "pairs.jsonl");
  for (const char* args :
       {"--seed 21 split --pairs pairs.jsonl --out-dir s1",
        "--seed 21 split --pairs pairs.jsonl --out-dir s2",
        "--seed 22 split --pairs pairs.jsonl --out-dir s3"}) {
    CHECK(run_cli(args, "", dir.path.string()).exit_code == 0);
  }
  CHECK(slurp(dir / "s1/train.jsonl") == slurp(dir / "s2/train.jsonl"));
  CHECK(slurp(dir / "s1/train.jsonl") != slurp(dir / "s3/train.jsonl"));
}

TEST_CASE("cli: ingest, stats, split, buckets, run, verify") {
  TempDir dir("cli_flow");
  write_fixture_corpus(dir / "src.txt", dir / "tgt.txt");
  write_file(dir / "lex.tsv", fixture_lexicon());

  const CliResult stats = run_cli(
      "--json stats --src-file src.txt --tgt-file tgt.txt", "",
      dir.path.string());
  CHECK(stats.exit_code == 0);
  const auto stats_doc = nlohmann::ordered_json::parse(stats.out);
  CHECK(stats_doc.at("src").at("lines") == 200);

  const std::string fixture_tmx =
      std::string(KMT_SOURCE_DIR) + "/tests/data/mini.tmx";
  const CliResult exploded = run_cli(
      "ingest-tmx --src ckb --tgt en --tag mini --in " + fixture_tmx +
          " --out exploded.jsonl --explode",
      "", dir.path.string());
  CHECK(exploded.exit_code == 0);
  CHECK(load_pairs(dir / "exploded.jsonl").pairs.size() == 13);

  const std::string config_json = R"({
    "src_lang": "ckb", "tgt_lang": "en",
    "corpora": [{"tag": "tanzil", "src": "src.txt", "tgt": "tgt.txt"}],
    "lexicon": "lex.tsv",
    "tokenizer": {"kind": "wordpunct"},
    "split": {"seed": 11},
    "out_dir": "run_out"
  })";
  write_file(dir / "config.json", config_json);
  const CliResult run_result =
      run_cli("run --config config.json", "", dir.path.string());
  CHECK(run_result.exit_code == 0);
  CHECK(run_result.out.find("manifest.json") != std::string::npos);

  const CliResult verify_result = run_cli(
      "verify --manifest run_out/manifest.json", "", dir.path.string());
  CHECK(verify_result.exit_code == 0);

  const CliResult split_result = run_cli(
      "split --pairs run_out/tanzil.pairs.jsonl --seed 3 --out-dir splits",
      "", dir.path.string());
  CHECK(split_result.exit_code == 0);
  CHECK(fs::exists(dir.path / "splits" / "train.jsonl"));

  write_file(dir / "hyp.txt", "a b c\na b\n");
  write_file(dir / "ref.txt", "a b c\na b\n");
  const CliResult buckets = run_cli(
      "buckets --hyp hyp.txt --ref ref.txt --edges 2 --max-order 2", "",
      dir.path.string());
  CHECK(buckets.exit_code == 0);
  CHECK(buckets.out.find("bucket,count,bleu1,bleu2") == 0);

  // missing lexicon aborts the run at the repair stage with exit 2
  const std::string bad_config = R"({
    "corpora": [{"tag": "tanzil", "src": "src.txt", "tgt": "tgt.txt"}],
    "lexicon": "missing.tsv",
    "out_dir": "run_bad"
  })";
  write_file(dir / "bad_config.json", bad_config);
  const CliResult bad_run =
      run_cli("run --config bad_config.json", "", dir.path.string());
  CHECK(bad_run.exit_code == 2);
}
