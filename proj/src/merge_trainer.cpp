#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <set>
#include <thread>
#include <unordered_map>
#include <vector>

#include "kmt/error.hpp"
#include "kmt/subword.hpp"
#include "kmt/unicode.hpp"

namespace kmt {

namespace {

struct TrainWord {
  std::vector<std::int32_t> syms;
  std::uint64_t count = 0;
};

std::uint64_t pair_key(std::int32_t a, std::int32_t b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

struct PairStat {
  std::uint64_t count = 0;
  std::vector<std::uint32_t> words;  // appended lazily; may contain stale ids
};

// Characters kept as base vocabulary: most frequent first until their
// cumulative share of occurrences reaches `coverage`.
std::set<char32_t> select_chars(
    const std::map<std::string, std::uint64_t>& word_counts, double coverage) {
  std::map<char32_t, std::uint64_t> char_counts;
  long double total = 0.0L;
  for (const auto& [word, count] : word_counts) {
    for (char32_t cp : uni::decode_utf8(word)) {
      char_counts[cp] += count;
      total += static_cast<long double>(count);
    }
  }
  std::vector<std::pair<char32_t, std::uint64_t>> ranked(char_counts.begin(),
                                                         char_counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::set<char32_t> retained;
  long double cumulative = 0.0L;
  const long double threshold = static_cast<long double>(coverage) * total;
  for (const auto& [cp, count] : ranked) {
    if (cumulative >= threshold) break;
    retained.insert(cp);
    cumulative += static_cast<long double>(count);
  }
  return retained;
}

struct PairTrainerState {
  std::vector<std::string> pieces;  // piece id -> string; id 0 is unk
  std::unordered_map<std::string, std::int32_t> piece_ids;
  std::vector<TrainWord> words;
  std::unordered_map<std::uint64_t, PairStat> pairs;
  std::vector<std::uint64_t> sym_counts;  // per piece id, WordPiece scoring

  std::int32_t intern(const std::string& piece) {
    auto it = piece_ids.find(piece);
    if (it != piece_ids.end()) return it->second;
    const auto id = static_cast<std::int32_t>(pieces.size());
    pieces.push_back(piece);
    piece_ids.emplace(piece, id);
    sym_counts.push_back(0);
    return id;
  }
};

// Counts adjacent pairs and symbol occurrences for a contiguous word range.
struct ShardCounts {
  std::unordered_map<std::uint64_t, PairStat> pairs;
  std::vector<std::uint64_t> sym_counts;
};

void count_range(const PairTrainerState& state, std::size_t begin,
                 std::size_t end, ShardCounts& out) {
  out.sym_counts.assign(state.pieces.size(), 0);
  for (std::size_t w = begin; w < end; ++w) {
    const TrainWord& word = state.words[w];
    for (std::size_t i = 0; i < word.syms.size(); ++i) {
      out.sym_counts[word.syms[i]] += word.count;
      if (i + 1 == word.syms.size()) continue;
      if (word.syms[i] == 0 || word.syms[i + 1] == 0) continue;  // unk
      PairStat& stat = out.pairs[pair_key(word.syms[i], word.syms[i + 1])];
      stat.count += word.count;
      if (stat.words.empty() || stat.words.back() != w) {
        stat.words.push_back(static_cast<std::uint32_t>(w));
      }
    }
  }
}

// The WordPiece objective count(pair) / (count(left) * count(right)),
// compared exactly by cross-multiplication. Denominators are 128-bit: the
// two symbol counts can each reach the corpus token total.
using u128 = unsigned __int128;

bool wordpiece_score_less(std::uint64_t n1, u128 d1, std::uint64_t n2,
                          u128 d2) {
  // n <= 2^40 and d <= 2^80 in any realistic corpus, so the products fit.
  return static_cast<u128>(n1) * d2 < static_cast<u128>(n2) * d1;
}

SubwordModel train_pairwise(
    const std::map<std::string, std::uint64_t>& word_counts,
    const TrainerConfig& config, bool wordpiece) {
  config.validate();
  if (word_counts.empty()) throw Error("empty training corpus");

  const std::set<char32_t> retained =
      select_chars(word_counts, config.character_coverage);

  PairTrainerState state;
  const std::string unk = "<unk>";
  state.intern(unk);

  if (wordpiece) {
    std::set<char32_t> initial_chars;
    std::set<char32_t> continuation_chars;
    for (const auto& [word, count] : word_counts) {
      const std::u32string cps = uni::decode_utf8(word);
      for (std::size_t i = 0; i < cps.size(); ++i) {
        if (!retained.count(cps[i])) continue;
        (i == 0 ? initial_chars : continuation_chars).insert(cps[i]);
      }
    }
    for (char32_t cp : initial_chars) {
      state.intern(uni::encode_utf8(std::u32string(1, cp)));
    }
    for (char32_t cp : continuation_chars) {
      state.intern("##" + uni::encode_utf8(std::u32string(1, cp)));
    }
  } else {
    for (char32_t cp : retained) {
      state.intern(uni::encode_utf8(std::u32string(1, cp)));
    }
  }

  if (state.pieces.size() > config.vocabulary_size) {
    throw Error("vocabulary_size " + std::to_string(config.vocabulary_size) +
                " is smaller than the base vocabulary of " +
                std::to_string(state.pieces.size()) + " pieces");
  }

  state.words.reserve(word_counts.size());
  for (const auto& [word, count] : word_counts) {
    TrainWord tw;
    tw.count = count;
    const std::u32string cps = uni::decode_utf8(word);
    tw.syms.reserve(cps.size());
    for (std::size_t i = 0; i < cps.size(); ++i) {
      if (!retained.count(cps[i])) {
        tw.syms.push_back(0);
        continue;
      }
      std::string piece = uni::encode_utf8(std::u32string(1, cps[i]));
      if (wordpiece && i > 0) piece = "##" + piece;
      tw.syms.push_back(state.piece_ids.at(piece));
    }
    state.words.push_back(std::move(tw));
  }

  // Initial counts, shard-parallel; the merge below runs in shard order so
  // the assembled index is identical for any shard count.
  {
    const std::size_t shards =
        std::max<std::size_t>(1, std::min<std::size_t>(config.shards,
                                                       state.words.size()));
    std::vector<ShardCounts> partials(shards);
    std::vector<std::thread> threads;
    const std::size_t chunk = (state.words.size() + shards - 1) / shards;
    for (std::size_t s = 0; s < shards; ++s) {
      const std::size_t begin = s * chunk;
      const std::size_t end = std::min(state.words.size(), begin + chunk);
      threads.emplace_back([&state, begin, end, &out = partials[s]]() {
        count_range(state, begin, end, out);
      });
    }
    for (auto& t : threads) t.join();
    state.sym_counts.assign(state.pieces.size(), 0);
    for (const ShardCounts& partial : partials) {
      for (std::size_t i = 0; i < partial.sym_counts.size(); ++i) {
        state.sym_counts[i] += partial.sym_counts[i];
      }
      for (const auto& [key, stat] : partial.pairs) {
        PairStat& global = state.pairs[key];
        global.count += stat.count;
        global.words.insert(global.words.end(), stat.words.begin(),
                            stat.words.end());
      }
    }
  }

  std::vector<std::pair<std::string, std::string>> merges;

  // BPE selection runs off a lazily-invalidated max-heap: every count change
  // pushes a fresh entry, stale entries are dropped on pop, so the first
  // entry matching its pair's current count is the arg-max. WordPiece scores
  // depend on the global symbol counts, which a heap cannot track, so it
  // keeps the full scan.
  struct HeapEntry {
    std::uint64_t count;
    std::uint64_t key;
  };
  auto heap_worse = [&state](const HeapEntry& x, const HeapEntry& y) {
    if (x.count != y.count) return x.count < y.count;
    const std::string_view xl = state.pieces[x.key >> 32];
    const std::string_view yl = state.pieces[y.key >> 32];
    if (xl != yl) return xl > yl;  // lexicographically smaller pops first
    return state.pieces[x.key & 0xFFFFFFFFu] >
           state.pieces[y.key & 0xFFFFFFFFu];
  };
  std::priority_queue<HeapEntry, std::vector<HeapEntry>, decltype(heap_worse)>
      heap(heap_worse);
  if (!wordpiece) {
    for (const auto& [key, stat] : state.pairs) {
      if (stat.count > 0) heap.push({stat.count, key});
    }
  }

  while (state.pieces.size() < config.vocabulary_size) {
    bool found = false;
    std::uint64_t best_key = 0;
    std::uint64_t best_count = 0;

    if (!wordpiece) {
      while (!heap.empty()) {
        const HeapEntry top = heap.top();
        heap.pop();
        auto it = state.pairs.find(top.key);
        if (it == state.pairs.end() || it->second.count != top.count) {
          continue;  // stale
        }
        found = true;
        best_key = top.key;
        best_count = top.count;
        break;
      }
    } else {
      // Argmax over pairs by count/(left*right); ties go to the
      // lexicographically smallest pair. The total order makes the scan
      // independent of container iteration order.
      u128 best_denom = 1;
      std::string_view best_left;
      std::string_view best_right;
      for (const auto& [key, stat] : state.pairs) {
        if (stat.count == 0) continue;
        const auto a = static_cast<std::int32_t>(key >> 32);
        const auto b = static_cast<std::int32_t>(key & 0xFFFFFFFFu);
        const std::string_view left = state.pieces[a];
        const std::string_view right = state.pieces[b];
        const u128 denom =
            static_cast<u128>(state.sym_counts[a]) * state.sym_counts[b];
        bool better = false;
        if (!found) {
          better = true;
        } else if (wordpiece_score_less(best_count, best_denom, stat.count,
                                        denom)) {
          better = true;
        } else if (!wordpiece_score_less(stat.count, denom, best_count,
                                         best_denom)) {
          better =
              left < best_left || (left == best_left && right < best_right);
        }
        if (better) {
          found = true;
          best_key = key;
          best_count = stat.count;
          best_denom = denom;
          best_left = left;
          best_right = right;
        }
      }
    }
    if (!found || best_count < config.min_pair_frequency) break;

    const auto left_id = static_cast<std::int32_t>(best_key >> 32);
    const auto right_id = static_cast<std::int32_t>(best_key & 0xFFFFFFFFu);
    const std::string left = state.pieces[left_id];
    const std::string right = state.pieces[right_id];
    std::string merged = left;
    if (wordpiece && right.size() > 2 && right.compare(0, 2, "##") == 0) {
      merged += right.substr(2);
    } else {
      merged += right;
    }
    merges.emplace_back(left, right);
    const std::int32_t merged_id = state.intern(merged);
    if (state.sym_counts.size() <= static_cast<std::size_t>(merged_id)) {
      state.sym_counts.resize(merged_id + 1, 0);
    }

    // Rewrite the affected words, adjusting pair and symbol counts by the
    // difference.
    std::vector<std::uint32_t> affected;
    affected.swap(state.pairs.at(best_key).words);
    std::sort(affected.begin(), affected.end());
    affected.erase(std::unique(affected.begin(), affected.end()),
                   affected.end());
    for (std::uint32_t w : affected) {
      TrainWord& word = state.words[w];
      bool contains = false;
      for (std::size_t i = 0; i + 1 < word.syms.size(); ++i) {
        if (word.syms[i] == left_id && word.syms[i + 1] == right_id) {
          contains = true;
          break;
        }
      }
      if (!contains) continue;  // stale index entry

      auto adjust = [&](const std::vector<std::int32_t>& syms,
                        std::int64_t sign) {
        for (std::size_t i = 0; i < syms.size(); ++i) {
          state.sym_counts[syms[i]] += sign * static_cast<std::int64_t>(
                                                  word.count);
          if (i + 1 == syms.size()) continue;
          if (syms[i] == 0 || syms[i + 1] == 0) continue;
          const std::uint64_t key = pair_key(syms[i], syms[i + 1]);
          PairStat& stat = state.pairs[key];
          stat.count += sign * static_cast<std::int64_t>(word.count);
          if (sign > 0 && (stat.words.empty() || stat.words.back() != w)) {
            stat.words.push_back(w);
          }
          if (!wordpiece && stat.count > 0 && key != best_key) {
            heap.push({stat.count, key});
          }
        }
      };

      adjust(word.syms, -1);
      std::vector<std::int32_t> next;
      next.reserve(word.syms.size());
      for (std::size_t i = 0; i < word.syms.size();) {
        if (i + 1 < word.syms.size() && word.syms[i] == left_id &&
            word.syms[i + 1] == right_id) {
          next.push_back(merged_id);
          i += 2;
        } else {
          next.push_back(word.syms[i]);
          ++i;
        }
      }
      word.syms = std::move(next);
      adjust(word.syms, +1);
    }
    state.pairs.erase(best_key);
  }

  SubwordModel model;
  model.kind = wordpiece ? SubwordKind::kWordPiece : SubwordKind::kBpe;
  model.unk_piece = unk;
  model.continuation_prefix = wordpiece ? "##" : "";
  model.normalization_fingerprint = config.normalization_fingerprint;
  model.vocab.reserve(state.pieces.size());
  for (std::size_t i = 0; i < state.pieces.size(); ++i) {
    model.vocab.push_back(
        {state.pieces[i], static_cast<std::int32_t>(i), 0.0});
  }
  model.merges = std::move(merges);
  model.finalize();
  return model;
}

}  // namespace

SubwordModel train_bpe(const std::map<std::string, std::uint64_t>& word_counts,
                       const TrainerConfig& config) {
  return train_pairwise(word_counts, config, false);
}

SubwordModel train_wordpiece(
    const std::map<std::string, std::uint64_t>& word_counts,
    const TrainerConfig& config) {
  return train_pairwise(word_counts, config, true);
}

}  // namespace kmt
