// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Each criterion carries its runtime budget.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "kmt/corpus.hpp"
#include "kmt/lexicon.hpp"
#include "kmt/metrics.hpp"
#include "kmt/normalize.hpp"
#include "kmt/subword.hpp"
#include "kmt/unicode.hpp"
#include "oracles.hpp"

using namespace kmt;
namespace fs = std::filesystem;

namespace {

int failures = 0;
std::vector<std::string> reasons;

#define EXPECT(cond)                                              \
  do {                                                            \
    if (!(cond)) {                                                \
      ok = false;                                                 \
      reasons.push_back(std::string("    assertion failed: ") +   \
                        #cond + " (" + __FILE__ + ":" +           \
                        std::to_string(__LINE__) + ")");          \
    }                                                             \
  } while (0)

void report(const std::string& name, bool ok, double seconds,
            double budget_seconds) {
  if (seconds > budget_seconds) {
    ok = false;
    reasons.push_back("    runtime " + std::to_string(seconds) +
                      " s exceeded the " + std::to_string(budget_seconds) +
                      " s budget");
  }
  std::printf("%s  %-22s (%.2f s, budget %.0f s)\n", ok ? "PASS" : "FAIL",
              name.c_str(), seconds, budget_seconds);
  for (const std::string& reason : reasons) {
    std::printf("%s\n", reason.c_str());
  }
  reasons.clear();
  if (!ok) ++failures;
}

template <typename Fn>
void criterion(const std::string& name, double budget_seconds, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  bool ok = true;
  fn(ok);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  report(name, ok, seconds, budget_seconds);
}

Tokens random_tokens(std::mt19937_64& gen, std::size_t min_len,
                     std::size_t max_len, int vocab) {
  std::uniform_int_distribution<std::size_t> len_dist(min_len, max_len);
  std::uniform_int_distribution<int> word_dist(0, vocab - 1);
  Tokens out;
  const std::size_t len = len_dist(gen);
  for (std::size_t i = 0; i < len; ++i) {
    out.push_back(std::string(1, static_cast<char>('a' + word_dist(gen))));
  }
  return out;
}

std::string random_word(std::mt19937_64& gen, const std::string& alphabet,
                        std::size_t min_len, std::size_t max_len) {
  std::uniform_int_distribution<std::size_t> len_dist(min_len, max_len);
  std::uniform_int_distribution<std::size_t> char_dist(0, alphabet.size() - 1);
  std::string out;
  const std::size_t len = len_dist(gen);
  for (std::size_t i = 0; i < len; ++i) out.push_back(alphabet[char_dist(gen)]);
  return out;
}

std::string random_mixed_text(std::mt19937_64& gen, std::size_t max_len) {
  static const std::vector<std::pair<char32_t, char32_t>> ranges = {
      {0x0020, 0x007E}, {0x0620, 0x064A}, {0x0660, 0x0669},
      {0x0695, 0x06D5}, {0x200C, 0x200C}, {0xFB8E, 0xFB91},
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

int main() {
  // Conjunction heuristic: the frequency rule splits the documented word,
  // through the library and through the repair CLI.
  criterion("conjunction-heuristic", 1.0, [](bool& ok) {
    FrequencyLexicon lexicon;
    lexicon.add("تاوانبارو", 5);
    lexicon.add("تاوانبار", 1218);
    const auto split = split_trailing_conjunction("تاوانبارو", lexicon);
    EXPECT(split == (std::vector<std::string>{"تاوانبار", "و"}));
    const auto repaired = repair_text({"تاوانبارو", "بوو"}, lexicon);
    EXPECT(repaired == (std::vector<std::string>{"تاوانبار", "و", "بوو"}));

#ifdef KMT_CLI_PATH
    const fs::path dir = fs::path("kmt_acceptance_tmp");
    fs::create_directories(dir);
    lexicon.save((dir / "lex.tsv").string());
    {
      std::ofstream in(dir / "in.txt", std::ios::binary);
      in << "تاوانبارو\n";
    }
    const std::string command =
        std::string(KMT_CLI_PATH) + " repair --lexicon " +
        (dir / "lex.tsv").string() + " < " + (dir / "in.txt").string() +
        " > " + (dir / "out.txt").string();
    EXPECT(std::system(command.c_str()) == 0);
    std::ifstream out(dir / "out.txt", std::ios::binary);
    std::string line;
    std::getline(out, line);
    EXPECT(line == "تاوانبار و");
    fs::remove_all(dir);
#endif
  });

  // Metric oracles: exact identities, the hand-computed BLEU cases, and
  // greedy TER equal to exhaustive shift search over a 500-case fuzz.
  criterion("metric-oracles", 30.0, [](bool& ok) {
    const std::vector<std::string> lines = {"the cat sat on the mat",
                                            "a b c d"};
    const ScoreReport identity = score_lines(lines, {lines}, {});
    EXPECT(identity.bleu.bleu == 100.0);
    EXPECT(identity.ter == 0.0);

    const Tokens four = {"a", "b", "c", "d"};
    EXPECT(meteor_sentence(four, {four}).score == 0.9921875);

    const BleuReport clipping =
        bleu_corpus({{"the", "the", "the", "the"}},
                    {{{"the", "cat", "the", "mat"}}}, 1);
    EXPECT(clipping.precisions[0].clipped == 2);
    EXPECT(clipping.precisions[0].total == 4);

    const BleuReport brevity = bleu_corpus(
        {{"the", "cat", "sat"}}, {{{"the", "cat", "sat", "down"}}}, 3);
    EXPECT(std::abs(brevity.bleu - 100.0 * std::exp(-1.0 / 3.0)) < 1e-6);

    std::mt19937_64 gen(36);
    for (int round = 0; round < 500; ++round) {
      const Tokens hyp = random_tokens(gen, 0, 7, 3);
      const Tokens ref = random_tokens(gen, 1, 7, 3);
      const TerReport greedy = ter_sentence(hyp, {ref});
      const std::uint64_t exhaustive =
          kmt_oracles::oracle_shift_search(hyp, ref, 10);
      if (greedy.edits + greedy.shifts != exhaustive) {
        EXPECT(greedy.edits + greedy.shifts == exhaustive);
        break;
      }
    }
  });

  // Tokenizer oracles: the documented BPE merge sequence against the
  // brute-force recount, the one-EM-step probabilities, Viterbi against
  // exhaustive argmax, and bitwise-deterministic training.
  criterion("tokenizer-oracles", 60.0, [](bool& ok) {
    const std::map<std::string, std::uint64_t> corpus = {
        {"low", 5}, {"lower", 2}, {"newest", 6}, {"widest", 3}};
    TrainerConfig config;
    config.vocabulary_size = 14;
    const SubwordModel bpe = train_bpe(corpus, config);
    EXPECT(bpe.merges.size() == 3);
    if (bpe.merges.size() == 3) {
      EXPECT(bpe.merges[0] ==
             std::make_pair(std::string("e"), std::string("s")));
      EXPECT(bpe.merges[1] ==
             std::make_pair(std::string("es"), std::string("t")));
      EXPECT(bpe.merges[2] ==
             std::make_pair(std::string("l"), std::string("o")));
    }
    EXPECT(kmt_oracles::merges_are_maximal(corpus, bpe,
                                           config.min_pair_frequency));

    const unigram::EmStepResult em = unigram::em_step(
        {{"ab", 1}}, {"a", "b", "ab"}, {1.0 / 3, 1.0 / 3, 1.0 / 3});
    EXPECT(std::abs(em.probs[0] - 0.2) < 1e-12);
    EXPECT(std::abs(em.probs[1] - 0.2) < 1e-12);
    EXPECT(std::abs(em.probs[2] - 0.6) < 1e-12);

    std::mt19937_64 gen(26);
    for (int round = 0; round < 200; ++round) {
      std::vector<std::pair<std::string, double>> entries;
      std::set<std::string> seen = {"a", "b", "c"};
      for (const std::string& c : seen) {
        entries.emplace_back(c, 0.05 + (gen() % 100) / 100.0);
      }
      const int extra = 1 + static_cast<int>(gen() % 6);
      for (int p = 0; p < extra; ++p) {
        const std::string piece = random_word(gen, "abc", 2, 4);
        if (seen.insert(piece).second) {
          entries.emplace_back(piece, 0.05 + (gen() % 100) / 100.0);
        }
      }
      double total = 0.0;
      for (auto& [piece, prob] : entries) total += prob;
      SubwordModel model;
      model.kind = SubwordKind::kUnigram;
      model.vocab.push_back({model.unk_piece, 0, std::log(1e-9)});
      std::int32_t id = 1;
      std::map<std::u32string, double> prob_map;
      for (auto& [piece, prob] : entries) {
        const double p = prob / total * (1.0 - 1e-9);
        model.vocab.push_back({piece, id++, std::log(p)});
        prob_map[uni::decode_utf8(piece)] = p;
      }
      model.finalize();

      const std::string word = random_word(gen, "abc", 1, 8);
      std::vector<kmt_oracles::Segmentation> segs;
      std::vector<std::string> stack;
      kmt_oracles::enumerate_segmentations(uni::decode_utf8(word), 0,
                                           prob_map, stack, segs);
      const kmt_oracles::Segmentation* best = &segs[0];
      for (const auto& seg : segs) {
        if (seg.logp > best->logp ||
            (seg.logp == best->logp &&
             (seg.pieces.size() < best->pieces.size() ||
              (seg.pieces.size() == best->pieces.size() &&
               seg.pieces < best->pieces)))) {
          best = &seg;
        }
      }
      if (model.encode_pretoken(word) != best->pieces) {
        EXPECT(model.encode_pretoken(word) == best->pieces);
        break;
      }
    }

    // determinism: permuted input and 1/4/8-way sharding are byte-identical
    std::vector<std::string> train_lines;
    for (int i = 0; i < 80; ++i) {
      std::string line;
      for (int w = 0; w < 6; ++w) {
        if (w) line.push_back(' ');
        line += random_word(gen, "abcdef", 1, 6);
      }
      train_lines.push_back(line);
    }
    std::vector<std::string> permuted = train_lines;
    std::shuffle(permuted.begin(), permuted.end(), gen);
    const auto counts = count_pretokens(train_lines);
    const auto counts_permuted = count_pretokens(permuted);
    EXPECT(counts == counts_permuted);
    for (const char* kind : {"bpe", "wordpiece", "unigram"}) {
      std::vector<std::string> serialized;
      for (std::uint32_t shards : {1u, 4u, 8u}) {
        TrainerConfig tc;
        tc.vocabulary_size = 40;
        tc.shards = shards;
        SubwordModel model;
        switch (subword_kind_from_string(kind)) {
          case SubwordKind::kBpe:
            model = train_bpe(shards == 4 ? counts_permuted : counts, tc);
            break;
          case SubwordKind::kWordPiece:
            model = train_wordpiece(shards == 4 ? counts_permuted : counts, tc);
            break;
          case SubwordKind::kUnigram:
            model = train_unigram(shards == 4 ? counts_permuted : counts, tc);
            break;
        }
        serialized.push_back(model.serialize());
      }
      EXPECT(serialized[0] == serialized[1]);
      EXPECT(serialized[0] == serialized[2]);
    }
  });

  // Split protocol: disjoint, exhaustive, sized within one of the 80/10/10
  // fractions, and seed-reproducible over 100 fuzz seeds.
  criterion("split-protocol", 10.0, [](bool& ok) {
    std::mt19937_64 gen(44);
    for (int round = 0; round < 100; ++round) {
      const std::size_t na = 10 + gen() % 80;
      const std::size_t nb = 10 + gen() % 80;
      std::vector<ParallelCorpus> corpora;
      for (const auto& [tag, n] :
           std::vector<std::pair<std::string, std::size_t>>{{"a", na},
                                                            {"b", nb}}) {
        ParallelCorpus corpus;
        for (std::size_t i = 0; i < n; ++i) {
          SentencePair pair;
          pair.id = static_cast<std::int64_t>(i);
          pair.corpus_tag = tag;
          pair.src = "s" + std::to_string(i);
          pair.refs = {"r"};
          corpus.pairs.push_back(std::move(pair));
        }
        corpora.push_back(std::move(corpus));
      }
      SplitSpec spec;
      spec.seed = gen();
      const SplitResult split = split_corpus(corpora, spec);

      std::set<std::pair<std::string, std::int64_t>> all;
      std::size_t total = 0;
      bool disjoint = true;
      for (const ParallelCorpus* part :
           {&split.test2[0], &split.test2[1], &split.train, &split.val,
            &split.test1}) {
        for (const SentencePair& pair : part->pairs) {
          disjoint &= all.emplace(pair.corpus_tag, pair.id).second;
          ++total;
        }
      }
      EXPECT(disjoint);
      EXPECT(total == na + nb);
      EXPECT(std::abs(static_cast<double>(split.test2[0].pairs.size()) -
                      0.1 * na) <= 1.0);
      EXPECT(std::abs(static_cast<double>(split.test2[1].pairs.size()) -
                      0.1 * nb) <= 1.0);
      const double pool = static_cast<double>(
          na + nb - split.test2[0].pairs.size() - split.test2[1].pairs.size());
      EXPECT(std::abs(static_cast<double>(split.train.pairs.size()) -
                      0.8 * pool) <= 1.0);
      EXPECT(std::abs(static_cast<double>(split.val.pairs.size()) -
                      0.1 * pool) <= 1.0);
      EXPECT(std::abs(static_cast<double>(split.test1.pairs.size()) -
                      0.1 * pool) <= 1.0);

      const SplitResult again = split_corpus(corpora, spec);
      EXPECT(pairs_to_jsonl(again.train) == pairs_to_jsonl(split.train));
      EXPECT(pairs_to_jsonl(again.test1) == pairs_to_jsonl(split.test1));
      if (!ok) break;
    }
  });

  // Round-trips: encode/decode identity per tokenizer kind, model and pairs
  // serialization identities, idempotent normalization.
  criterion("round-trips", 30.0, [](bool& ok) {
    std::mt19937_64 gen(45);
    std::vector<std::string> lines;
    for (int i = 0; i < 40; ++i) {
      lines.push_back(random_word(gen, "abcd.!", 1, 12));
    }
    TrainerConfig config;
    config.vocabulary_size = 24;
    config.min_pair_frequency = 1;
    const auto counts = count_pretokens(lines);
    const SubwordModel models[3] = {train_bpe(counts, config),
                                    train_wordpiece(counts, config),
                                    train_unigram(counts, config)};
    for (const SubwordModel& model : models) {
      for (int i = 0; i < 1000; ++i) {
        std::string text;
        const int words = 1 + static_cast<int>(gen() % 4);
        for (int w = 0; w < words; ++w) {
          if (w) text.push_back(' ');
          text += random_word(gen, "abcd.!", 1, 8);
        }
        if (model.decode(model.encode(text)) != text) {
          EXPECT(model.decode(model.encode(text)) == text);
          break;
        }
      }
      const SubwordModel reloaded = SubwordModel::parse(model.serialize());
      EXPECT(reloaded.structurally_equal(model));
      EXPECT(reloaded.serialize() == model.serialize());
    }

    ParallelCorpus corpus;
    for (int i = 0; i < 50; ++i) {
      SentencePair pair;
      pair.id = i;
      pair.corpus_tag = "t";
      pair.src_lang = "ckb";
      pair.tgt_lang = "en";
      pair.src = random_mixed_text(gen, 20);
      pair.refs = {random_mixed_text(gen, 20), random_mixed_text(gen, 10)};
      corpus.pairs.push_back(std::move(pair));
    }
    const std::string jsonl = pairs_to_jsonl(corpus);
    const ParallelCorpus reloaded = pairs_from_jsonl(jsonl);
    EXPECT(pairs_to_jsonl(reloaded) == jsonl);

    const GraphemeMap& map = GraphemeMap::paper_profile();
    const NormalizationConfig kurdish = NormalizationConfig::kurdish();
    for (int i = 0; i < 1000; ++i) {
      const std::string text = random_mixed_text(gen, 40);
      const std::string unified = unify_graphemes(text, map);
      if (unify_graphemes(unified, map) != unified) {
        EXPECT(unify_graphemes(unified, map) == unified);
        break;
      }
      const std::string zwnj_free = remove_zwnj(text);
      if (remove_zwnj(zwnj_free) != zwnj_free) {
        EXPECT(remove_zwnj(zwnj_free) == zwnj_free);
        break;
      }
      const std::string r_done = normalize_initial_r(text);
      if (normalize_initial_r(r_done) != r_done) {
        EXPECT(normalize_initial_r(r_done) == r_done);
        break;
      }
      const std::string stripped = strip_parentheticals(text).text;
      if (strip_parentheticals(stripped).text != stripped) {
        EXPECT(strip_parentheticals(stripped).text == stripped);
        break;
      }
      const std::string once = normalize_pipeline(text, kurdish).text;
      if (normalize_pipeline(once, kurdish).text != once) {
        EXPECT(normalize_pipeline(once, kurdish).text == once);
        break;
      }
    }
  });

  if (failures == 0) {
    std::printf("acceptance: all criteria passed\n");
    return 0;
  }
  std::printf("acceptance: %d criterion(s) failed\n", failures);
  return 1;
}
