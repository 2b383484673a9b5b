#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <thread>
#include <vector>

#include "kmt/error.hpp"
#include "kmt/subword.hpp"
#include "kmt/unicode.hpp"

namespace kmt {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(double x, double y) {
  if (x == kNegInf) return y;
  if (y == kNegInf) return x;
  const double hi = std::max(x, y);
  const double lo = std::min(x, y);
  return hi + std::log1p(std::exp(lo - hi));
}

struct UWord {
  std::u32string cps;
  std::uint64_t count = 0;
};

// The training piece inventory: canonical order, substring index, and the
// position of the unk pseudo-piece covering out-of-coverage characters.
struct PieceSet {
  std::vector<std::u32string> pieces;
  std::map<std::u32string, std::int32_t> index;
  std::size_t max_len = 0;
  std::int32_t unk_id = -1;

  void rebuild_index() {
    index.clear();
    max_len = 0;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      index.emplace(pieces[i], static_cast<std::int32_t>(i));
      if (static_cast<std::int32_t>(i) != unk_id) {
        max_len = std::max(max_len, pieces[i].size());
      }
    }
  }
};

struct WordExpectation {
  std::map<std::int32_t, double> piece_mass;
  double loglik = 0.0;
};

// Exact E-step for one word: forward/backward over the segmentation lattice
// in log space; posterior edge mass accumulates per piece.
WordExpectation word_expectation(const UWord& word, const PieceSet& set,
                                 const std::vector<double>& log_probs) {
  const std::u32string& cps = word.cps;
  const std::size_t n = cps.size();

  struct Edge {
    std::size_t begin;
    std::size_t end;
    std::int32_t piece;
  };
  std::vector<Edge> edges;
  edges.reserve(n * 2);
  for (std::size_t i = 0; i < n; ++i) {
    bool matched = false;
    const std::size_t longest = std::min(set.max_len, n - i);
    for (std::size_t len = 1; len <= longest; ++len) {
      auto it = set.index.find(cps.substr(i, len));
      if (it == set.index.end()) continue;
      if (it->second == set.unk_id) continue;
      edges.push_back({i, i + len, it->second});
      matched = true;
    }
    if (!matched) {
      if (set.unk_id < 0) {
        throw Error("character '" +
                    uni::encode_utf8(std::u32string(1, cps[i])) +
                    "' has no covering piece and no unk piece exists");
      }
      edges.push_back({i, i + 1, set.unk_id});
    }
  }

  std::vector<double> alpha(n + 1, kNegInf);
  std::vector<double> beta(n + 1, kNegInf);
  alpha[0] = 0.0;
  beta[n] = 0.0;
  for (const Edge& e : edges) {
    // edges are ordered by begin, so alpha[e.begin] is final when read
    alpha[e.end] =
        log_sum_exp(alpha[e.end], alpha[e.begin] + log_probs[e.piece]);
  }
  for (auto it = edges.rbegin(); it != edges.rend(); ++it) {
    beta[it->begin] =
        log_sum_exp(beta[it->begin], log_probs[it->piece] + beta[it->end]);
  }
  const double total = alpha[n];
  if (total == kNegInf) {
    throw Error("word '" + uni::encode_utf8(cps) +
                "' has no segmentation with nonzero probability");
  }

  WordExpectation out;
  out.loglik = static_cast<double>(word.count) * total;
  const double weight = static_cast<double>(word.count);
  for (const Edge& e : edges) {
    const double post =
        std::exp(alpha[e.begin] + log_probs[e.piece] + beta[e.end] - total);
    if (post > 0.0) out.piece_mass[e.piece] += weight * post;
  }
  return out;
}

struct EmOut {
  std::vector<double> expected;
  double loglik = 0.0;
};

// Expected piece counts over the whole corpus. Shards only split the work;
// the reduction runs in canonical word order, so the result is bitwise
// identical for any shard count.
EmOut expectation(const std::vector<UWord>& words, const PieceSet& set,
                  const std::vector<double>& probs, std::uint32_t shards) {
  std::vector<double> log_probs(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    log_probs[i] = probs[i] > 0.0 ? std::log(probs[i]) : kNegInf;
  }

  std::vector<WordExpectation> per_word(words.size());
  const std::size_t nshards =
      std::max<std::size_t>(1, std::min<std::size_t>(shards, words.size()));
  if (nshards <= 1) {
    for (std::size_t w = 0; w < words.size(); ++w) {
      per_word[w] = word_expectation(words[w], set, log_probs);
    }
  } else {
    const std::size_t chunk = (words.size() + nshards - 1) / nshards;
    std::vector<std::thread> threads;
    for (std::size_t s = 0; s < nshards; ++s) {
      const std::size_t begin = s * chunk;
      const std::size_t end = std::min(words.size(), begin + chunk);
      threads.emplace_back([&, begin, end]() {
        for (std::size_t w = begin; w < end; ++w) {
          per_word[w] = word_expectation(words[w], set, log_probs);
        }
      });
    }
    for (auto& t : threads) t.join();
  }

  EmOut out;
  out.expected.assign(probs.size(), 0.0);
  for (const WordExpectation& we : per_word) {
    out.loglik += we.loglik;
    for (const auto& [piece, mass] : we.piece_mass) {
      out.expected[piece] += mass;
    }
  }
  return out;
}

// Probabilities never reach exact zero: rare pieces whose posterior mass
// underflows keep a floor so every word stays segmentable through its
// single characters.
constexpr double kProbFloor = 1e-300;

std::vector<double> maximize(const std::vector<double>& expected) {
  double total = 0.0;
  for (double v : expected) total += v;
  if (total <= 0.0) throw Error("EM collapsed: no expected piece mass");
  std::vector<double> probs(expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    probs[i] = std::max(expected[i] / total, kProbFloor);
  }
  return probs;
}

// Best log-probability over segmentations of `cps`, optionally excluding one
// piece; used for the likelihood-loss pruning criterion.
double viterbi_logp(const std::u32string& cps, const PieceSet& set,
                    const std::vector<double>& log_probs,
                    std::int32_t exclude) {
  const std::size_t n = cps.size();
  std::vector<double> best(n + 1, kNegInf);
  best[0] = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (best[i] == kNegInf) continue;
    bool matched = false;
    const std::size_t longest = std::min(set.max_len, n - i);
    for (std::size_t len = 1; len <= longest; ++len) {
      auto it = set.index.find(cps.substr(i, len));
      if (it == set.index.end()) continue;
      if (it->second == exclude || it->second == set.unk_id) continue;
      matched = true;
      best[i + len] = std::max(best[i + len], best[i] + log_probs[it->second]);
    }
    if (!matched && set.unk_id >= 0 && set.unk_id != exclude) {
      best[i + 1] = std::max(best[i + 1], best[i] + log_probs[set.unk_id]);
    }
  }
  return best[n];
}

}  // namespace

namespace unigram {

EmStepResult em_step(const std::map<std::string, std::uint64_t>& word_counts,
                     const std::vector<std::string>& pieces,
                     const std::vector<double>& probs, std::uint32_t shards) {
  if (pieces.size() != probs.size()) {
    throw Error("em_step: pieces and probs differ in length");
  }
  std::vector<UWord> words;
  words.reserve(word_counts.size());
  for (const auto& [word, count] : word_counts) {
    words.push_back({uni::decode_utf8(word), count});
  }
  PieceSet set;
  set.pieces.reserve(pieces.size());
  for (const std::string& piece : pieces) {
    set.pieces.push_back(uni::decode_utf8(piece));
  }
  set.rebuild_index();
  if (set.index.size() != set.pieces.size()) {
    throw Error("em_step: duplicate pieces");
  }
  EmOut out = expectation(words, set, probs, shards);
  EmStepResult result;
  result.probs = maximize(out.expected);
  result.loglik = out.loglik;
  return result;
}

}  // namespace unigram

SubwordModel train_unigram(
    const std::map<std::string, std::uint64_t>& word_counts,
    const TrainerConfig& config) {
  config.validate();
  if (word_counts.empty()) throw Error("empty training corpus");

  // Character coverage, shared rule with the pair trainers.
  std::map<char32_t, std::uint64_t> char_counts;
  long double char_total = 0.0L;
  for (const auto& [word, count] : word_counts) {
    for (char32_t cp : uni::decode_utf8(word)) {
      char_counts[cp] += count;
      char_total += static_cast<long double>(count);
    }
  }
  std::vector<std::pair<char32_t, std::uint64_t>> ranked(char_counts.begin(),
                                                         char_counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::set<char32_t> retained;
  {
    long double cumulative = 0.0L;
    const long double threshold =
        static_cast<long double>(config.character_coverage) * char_total;
    for (const auto& [cp, count] : ranked) {
      if (cumulative >= threshold) break;
      retained.insert(cp);
      cumulative += static_cast<long double>(count);
    }
  }
  const bool needs_unk = retained.size() != char_counts.size();

  if (config.vocabulary_size < retained.size() + 1) {
    throw Error("vocabulary_size " + std::to_string(config.vocabulary_size) +
                " is smaller than the base vocabulary of " +
                std::to_string(retained.size() + 1) + " pieces");
  }

  std::vector<UWord> words;
  words.reserve(word_counts.size());
  for (const auto& [word, count] : word_counts) {
    words.push_back({uni::decode_utf8(word), count});
  }

  // Seed: every retained character, plus substrings up to max_piece_length
  // occurring at least twice, ranked by frequency * length and truncated to
  // vocabulary_size * unigram_seed_factor pieces in total.
  PieceSet set;
  for (char32_t cp : retained) set.pieces.push_back(std::u32string(1, cp));
  if (needs_unk) {
    set.unk_id = static_cast<std::int32_t>(set.pieces.size());
    set.pieces.push_back(uni::decode_utf8("<unk>"));
  }
  {
    std::map<std::u32string, std::uint64_t> substring_counts;
    for (const UWord& word : words) {
      const std::size_t n = word.cps.size();
      for (std::size_t len = 2;
           len <= std::min<std::size_t>(config.max_piece_length, n); ++len) {
        for (std::size_t i = 0; i + len <= n; ++i) {
          bool clean = true;
          for (std::size_t k = i; k < i + len; ++k) {
            if (!retained.count(word.cps[k])) {
              clean = false;
              break;
            }
          }
          if (clean) substring_counts[word.cps.substr(i, len)] += word.count;
        }
      }
    }
    std::vector<std::pair<std::u32string, std::uint64_t>> candidates;
    for (const auto& [sub, count] : substring_counts) {
      if (count >= 2) candidates.emplace_back(sub, count);
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const auto& a, const auto& b) {
                const std::uint64_t sa = a.second * a.first.size();
                const std::uint64_t sb = b.second * b.first.size();
                if (sa != sb) return sa > sb;
                return a.first < b.first;
              });
    const std::size_t seed_cap =
        static_cast<std::size_t>(config.vocabulary_size) *
        config.unigram_seed_factor;
    std::vector<std::u32string> selected;
    for (const auto& [sub, count] : candidates) {
      if (set.pieces.size() + selected.size() >= seed_cap) break;
      selected.push_back(sub);
    }
    std::sort(selected.begin(), selected.end());
    for (auto& sub : selected) set.pieces.push_back(std::move(sub));
  }
  set.rebuild_index();

  std::vector<double> probs(set.pieces.size(),
                            1.0 / static_cast<double>(set.pieces.size()));

  auto run_em = [&](std::uint32_t iterations) {
    for (std::uint32_t k = 0; k < iterations; ++k) {
      EmOut out = expectation(words, set, probs, config.shards);
      probs = maximize(out.expected);
    }
  };

  const std::size_t floor_size = retained.size() + (needs_unk ? 1 : 0);
  // unk joins the final vocabulary either way; reserve its slot when it is
  // not already a training piece.
  const std::size_t size_target =
      needs_unk ? config.vocabulary_size : config.vocabulary_size - 1;
  while (set.pieces.size() > size_target) {
    run_em(config.em_iterations_per_round);

    // Prune the pieces whose removal costs the least likelihood; single
    // characters and unk always stay.
    EmOut out = expectation(words, set, probs, config.shards);
    std::vector<double> log_probs(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
      log_probs[i] = probs[i] > 0.0 ? std::log(probs[i]) : kNegInf;
    }
    struct Candidate {
      double loss;
      std::int32_t piece;
    };
    std::vector<Candidate> candidates;
    for (std::size_t i = 0; i < set.pieces.size(); ++i) {
      if (set.pieces[i].size() <= 1) continue;
      if (static_cast<std::int32_t>(i) == set.unk_id) continue;
      const double alt = viterbi_logp(set.pieces[i], set, log_probs,
                                      static_cast<std::int32_t>(i));
      const double score = log_probs[i];
      const double freq = out.expected[i];
      // a piece whose string has no alternative segmentation must stay
      const double loss =
          alt == kNegInf
              ? std::numeric_limits<double>::infinity()
              : (freq > 0.0 ? freq * (score - alt) : 0.0);
      candidates.push_back({loss, static_cast<std::int32_t>(i)});
    }
    std::sort(candidates.begin(), candidates.end(),
              [&](const Candidate& a, const Candidate& b) {
                if (a.loss != b.loss) return a.loss < b.loss;
                return set.pieces[a.piece] < set.pieces[b.piece];
              });

    std::size_t target = std::max<std::size_t>(
        size_target,
        static_cast<std::size_t>(std::ceil(
            static_cast<double>(set.pieces.size()) * config.unigram_prune_keep)));
    if (target >= set.pieces.size()) target = set.pieces.size() - 1;
    target = std::max(target, floor_size);
    std::size_t to_remove = set.pieces.size() - target;
    if (to_remove > candidates.size()) to_remove = candidates.size();
    if (to_remove == 0) break;

    std::set<std::int32_t> removed;
    for (std::size_t i = 0; i < to_remove; ++i) {
      removed.insert(candidates[i].piece);
    }
    PieceSet next;
    std::vector<double> next_probs;
    double kept_mass = 0.0;
    for (std::size_t i = 0; i < set.pieces.size(); ++i) {
      if (removed.count(static_cast<std::int32_t>(i))) continue;
      if (static_cast<std::int32_t>(i) == set.unk_id) {
        next.unk_id = static_cast<std::int32_t>(next.pieces.size());
      }
      next.pieces.push_back(set.pieces[i]);
      next_probs.push_back(probs[i]);
      kept_mass += probs[i];
    }
    for (double& p : next_probs) p /= kept_mass;
    next.rebuild_index();
    set = std::move(next);
    probs = std::move(next_probs);
  }

  run_em(config.em_iterations_per_round);

  // Assemble the model: unk gets id 0; trained pieces follow by descending
  // probability then lexicographic order. If unk never appeared in training
  // it receives half the smallest piece probability and everything is
  // rescaled so the probabilities still sum to one.
  SubwordModel model;
  model.kind = SubwordKind::kUnigram;
  model.unk_piece = "<unk>";
  model.continuation_prefix = "";
  model.normalization_fingerprint = config.normalization_fingerprint;

  struct Scored {
    std::string piece;
    double prob;
  };
  std::vector<Scored> scored;
  double unk_prob = -1.0;
  double min_prob = 1.0;
  for (std::size_t i = 0; i < set.pieces.size(); ++i) {
    if (static_cast<std::int32_t>(i) == set.unk_id) {
      unk_prob = probs[i];
      continue;
    }
    scored.push_back({uni::encode_utf8(set.pieces[i]), probs[i]});
    min_prob = std::min(min_prob, probs[i]);
  }
  if (unk_prob < 0.0) {
    unk_prob = min_prob * 1e-3;
    for (Scored& s : scored) s.prob *= 1.0 - unk_prob;
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.prob != b.prob) return a.prob > b.prob;
    return a.piece < b.piece;
  });
  model.vocab.push_back({model.unk_piece, 0, std::log(unk_prob)});
  for (std::size_t i = 0; i < scored.size(); ++i) {
    model.vocab.push_back({scored[i].piece, static_cast<std::int32_t>(i + 1),
                           std::log(scored[i].prob)});
  }
  model.finalize();
  return model;
}

}  // namespace kmt
