#include "kmt/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "kmt/digest.hpp"
#include "kmt/error.hpp"
#include "kmt/subword.hpp"
#include "kmt/unicode.hpp"

namespace kmt {

namespace {

using ordered_json = nlohmann::ordered_json;

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> tokens;
  std::u32string cps = uni::decode_utf8(text);
  std::u32string current;
  for (char32_t cp : cps) {
    if (uni::is_whitespace(cp)) {
      if (!current.empty()) {
        tokens.push_back(uni::encode_utf8(current));
        current.clear();
      }
    } else {
      current.push_back(cp);
    }
  }
  if (!current.empty()) tokens.push_back(uni::encode_utf8(current));
  return tokens;
}

std::uint64_t token_count(std::string_view text, TokenizerSelector selector) {
  switch (selector) {
    case TokenizerSelector::kWordPunct:
      return wordpunct_tokenize(text).size();
    case TokenizerSelector::kWhitespace:
      return split_whitespace(text).size();
  }
  return 0;
}

// Deterministic Fisher-Yates driven by a shared mt19937_64; std::shuffle is
// implementation-defined, this is not.
template <typename T>
void seeded_shuffle(std::vector<T>& items, std::mt19937_64& gen) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(gen() % i);
    std::swap(items[i - 1], items[j]);
  }
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

}  // namespace

void ParallelCorpus::validate() const {
  // ids must be strictly increasing within each corpus tag; merged sets
  // (train/val/test1) carry pairs from several corpora.
  std::map<std::string_view, std::int64_t> prev;
  for (const SentencePair& pair : pairs) {
    auto [it, inserted] = prev.emplace(pair.corpus_tag, pair.id);
    if (!inserted) {
      if (pair.id <= it->second) {
        throw Error("corpus '" + pair.corpus_tag +
                    "' ids must be strictly increasing: id " +
                    std::to_string(pair.id) + " after " +
                    std::to_string(it->second));
      }
      it->second = pair.id;
    }
    if (pair.refs.empty()) {
      throw Error("pair " + std::to_string(pair.id) + " has no references");
    }
  }
}

std::string pairs_to_jsonl(const ParallelCorpus& corpus) {
  std::string out;
  for (const SentencePair& pair : corpus.pairs) {
    ordered_json row;
    row["id"] = pair.id;
    row["corpus"] = pair.corpus_tag;
    row["src_lang"] = pair.src_lang;
    row["tgt_lang"] = pair.tgt_lang;
    row["src"] = pair.src;
    row["refs"] = pair.refs;
    out += row.dump();
    out += '\n';
  }
  return out;
}

ParallelCorpus pairs_from_jsonl(std::string_view text,
                                const std::string& origin) {
  ParallelCorpus corpus;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string_view line = (eol == std::string_view::npos)
                                ? text.substr(pos)
                                : text.substr(pos, eol - pos);
    pos = (eol == std::string_view::npos) ? text.size() : eol + 1;
    ++line_no;
    if (line.empty() || line == "\r") continue;
    ordered_json row;
    try {
      row = ordered_json::parse(line);
      SentencePair pair;
      pair.id = row.at("id").get<std::int64_t>();
      pair.corpus_tag = row.at("corpus").get<std::string>();
      pair.src_lang = row.at("src_lang").get<std::string>();
      pair.tgt_lang = row.at("tgt_lang").get<std::string>();
      pair.src = row.at("src").get<std::string>();
      pair.refs = row.at("refs").get<std::vector<std::string>>();
      corpus.pairs.push_back(std::move(pair));
    } catch (const nlohmann::json::exception& e) {
      throw Error("pairs " + origin + " line " + std::to_string(line_no) +
                  ": " + e.what());
    }
  }
  corpus.validate();
  return corpus;
}

void save_pairs(const ParallelCorpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write pairs '" + path + "'");
  out << pairs_to_jsonl(corpus);
}

ParallelCorpus load_pairs(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open pairs '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  ParallelCorpus corpus = pairs_from_jsonl(ss.str(), "'" + path + "'");
  corpus.provenance.push_back(path + ":" + sha256_file(path));
  return corpus;
}

ParallelCorpus explode_refs(const ParallelCorpus& corpus) {
  ParallelCorpus out;
  out.provenance = corpus.provenance;
  std::int64_t next_id = 0;
  for (const SentencePair& pair : corpus.pairs) {
    for (const std::string& ref : pair.refs) {
      SentencePair single = pair;
      single.id = next_id++;
      single.refs = {ref};
      out.pairs.push_back(std::move(single));
    }
  }
  return out;
}

ParallelCorpus read_plain_parallel(const std::string& src_path,
                                   const std::string& tgt_path,
                                   const std::string& corpus_tag,
                                   const std::string& src_lang,
                                   const std::string& tgt_lang) {
  const std::vector<std::string> src_lines = read_lines(src_path);
  const std::vector<std::string> tgt_lines = read_lines(tgt_path);
  if (src_lines.size() != tgt_lines.size()) {
    throw Error("aligned files differ in length: '" + src_path + "' has " +
                std::to_string(src_lines.size()) + " lines, '" + tgt_path +
                "' has " + std::to_string(tgt_lines.size()));
  }
  ParallelCorpus corpus;
  corpus.pairs.reserve(src_lines.size());
  for (std::size_t i = 0; i < src_lines.size(); ++i) {
    SentencePair pair;
    pair.id = static_cast<std::int64_t>(i);
    pair.corpus_tag = corpus_tag;
    pair.src_lang = src_lang;
    pair.tgt_lang = tgt_lang;
    pair.src = src_lines[i];
    pair.refs = {tgt_lines[i]};
    corpus.pairs.push_back(std::move(pair));
  }
  corpus.provenance.push_back(src_path + ":" + sha256_file(src_path));
  corpus.provenance.push_back(tgt_path + ":" + sha256_file(tgt_path));
  return corpus;
}

double SideStats::tokens_per_line() const {
  return line_count == 0 ? 0.0
                         : static_cast<double>(token_count) /
                               static_cast<double>(line_count);
}

double SideStats::chars_per_line() const {
  return line_count == 0 ? 0.0
                         : static_cast<double>(char_count) /
                               static_cast<double>(line_count);
}

CorpusStats compute_stats(const ParallelCorpus& corpus,
                          TokenizerSelector tokenizer) {
  if (corpus.pairs.empty()) throw Error("cannot compute stats: empty corpus");
  CorpusStats stats;
  for (const SentencePair& pair : corpus.pairs) {
    ++stats.src.line_count;
    stats.src.token_count += token_count(pair.src, tokenizer);
    stats.src.char_count += uni::codepoint_count(pair.src);
    for (const std::string& ref : pair.refs) {
      ++stats.tgt.line_count;
      stats.tgt.token_count += token_count(ref, tokenizer);
      stats.tgt.char_count += uni::codepoint_count(ref);
    }
  }
  return stats;
}

void SplitSpec::validate() const {
  auto in_unit = [](double f) { return f > 0.0 && f < 1.0; };
  if (!in_unit(test2_fraction) || !in_unit(train_fraction) ||
      !in_unit(val_fraction) || !in_unit(test1_fraction)) {
    throw Error("split fractions must lie in (0, 1)");
  }
  if (std::abs(train_fraction + val_fraction + test1_fraction - 1.0) > 1e-9) {
    throw Error("train + val + test1 fractions must sum to 1");
  }
}

SplitResult split_corpus(const std::vector<ParallelCorpus>& corpora,
                         const SplitSpec& spec) {
  spec.validate();
  std::mt19937_64 gen(spec.seed);
  SplitResult result;
  std::vector<SentencePair> pool;

  for (const ParallelCorpus& corpus : corpora) {
    const std::size_t n = corpus.pairs.size();
    if (n < 10) {
      throw Error("corpus too small to split: " + std::to_string(n) +
                  " pairs (need at least 10)");
    }
    std::vector<SentencePair> shuffled = corpus.pairs;
    seeded_shuffle(shuffled, gen);
    const auto take = static_cast<std::size_t>(
        std::llround(spec.test2_fraction * static_cast<double>(n)));
    ParallelCorpus held;
    for (std::size_t i = 0; i < take; ++i) {
      held.pairs.push_back(std::move(shuffled[i]));
    }
    std::sort(held.pairs.begin(), held.pairs.end(),
              [](const SentencePair& a, const SentencePair& b) {
                return a.id < b.id;
              });
    result.test2.push_back(std::move(held));
    for (std::size_t i = take; i < shuffled.size(); ++i) {
      pool.push_back(std::move(shuffled[i]));
    }
  }

  seeded_shuffle(pool, gen);
  const std::size_t m = pool.size();
  const auto train_n = static_cast<std::size_t>(
      std::llround(spec.train_fraction * static_cast<double>(m)));
  const auto val_n = static_cast<std::size_t>(
      std::llround(spec.val_fraction * static_cast<double>(m)));
  if (train_n + val_n > m) {
    throw Error("split fractions leave no room for test1");
  }
  auto emit = [](std::vector<SentencePair>::iterator begin,
                 std::vector<SentencePair>::iterator end) {
    ParallelCorpus out;
    out.pairs.assign(std::make_move_iterator(begin),
                     std::make_move_iterator(end));
    std::sort(out.pairs.begin(), out.pairs.end(),
              [](const SentencePair& a, const SentencePair& b) {
                if (a.corpus_tag != b.corpus_tag)
                  return a.corpus_tag < b.corpus_tag;
                return a.id < b.id;
              });
    return out;
  };
  result.train = emit(pool.begin(), pool.begin() + train_n);
  result.val = emit(pool.begin() + train_n, pool.begin() + train_n + val_n);
  result.test1 = emit(pool.begin() + train_n + val_n, pool.end());
  return result;
}

std::string LengthBucket::label() const {
  if (unbounded) return ">" + std::to_string(upper_edge);
  return "<=" + std::to_string(upper_edge);
}

std::vector<LengthBucket> filter_by_length(
    const std::vector<SentencePair>& pairs, TokenizerSelector tokenizer,
    const std::vector<std::uint64_t>& edges) {
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (edges[i] <= edges[i - 1]) {
      throw Error("bucket edges must be strictly increasing");
    }
  }
  std::vector<LengthBucket> buckets;
  for (std::uint64_t edge : edges) buckets.push_back({edge, false, {}});
  buckets.push_back({edges.empty() ? 0 : edges.back(), true, {}});

  for (const SentencePair& pair : pairs) {
    const std::uint64_t len = token_count(pair.src, tokenizer);
    std::size_t slot = buckets.size() - 1;
    for (std::size_t i = 0; i < edges.size(); ++i) {
      if (len <= edges[i]) {
        slot = i;
        break;
      }
    }
    buckets[slot].pairs.push_back(pair);
  }
  return buckets;
}

}  // namespace kmt
