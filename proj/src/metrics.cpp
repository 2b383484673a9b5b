#include "kmt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "kmt/error.hpp"
#include "kmt/subword.hpp"

namespace kmt {

namespace {

constexpr double kFloorEpsilon = 1e-9;

// n-gram -> count; n-grams are joined with '\x1F' which cannot appear in
// whitespace-split tokens.
std::unordered_map<std::string, std::uint64_t> ngram_counts(const Tokens& t,
                                                            int order) {
  std::unordered_map<std::string, std::uint64_t> counts;
  if (static_cast<int>(t.size()) < order) return counts;
  for (std::size_t i = 0; i + order <= t.size(); ++i) {
    std::string key = t[i];
    for (int k = 1; k < order; ++k) {
      key.push_back('\x1F');
      key.append(t[i + k]);
    }
    ++counts[key];
  }
  return counts;
}

}  // namespace

BleuReport bleu_corpus(const std::vector<Tokens>& hypotheses,
                       const std::vector<std::vector<Tokens>>& reference_sets,
                       int max_order, BleuSmoothing smoothing) {
  if (hypotheses.size() != reference_sets.size()) {
    throw Error("bleu: " + std::to_string(hypotheses.size()) +
                " hypotheses vs " + std::to_string(reference_sets.size()) +
                " reference sets");
  }
  if (hypotheses.empty()) throw Error("bleu: empty input");
  if (max_order < 1 || max_order > 4) {
    throw Error("bleu: max_order must be in 1..4");
  }

  BleuReport report;
  report.precisions.assign(max_order, {});

  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    const Tokens& hyp = hypotheses[s];
    const std::vector<Tokens>& refs = reference_sets[s];
    if (refs.empty()) {
      throw Error("bleu: segment " + std::to_string(s + 1) +
                  " has no references");
    }
    report.hyp_len += hyp.size();

    // closest reference length; ties go to the shorter reference
    std::uint64_t closest = refs[0].size();
    for (const Tokens& ref : refs) {
      const auto diff = [&](std::uint64_t len) {
        return len > hyp.size() ? len - hyp.size() : hyp.size() - len;
      };
      if (diff(ref.size()) < diff(closest) ||
          (diff(ref.size()) == diff(closest) && ref.size() < closest)) {
        closest = ref.size();
      }
    }
    report.ref_len += closest;

    for (int order = 1; order <= max_order; ++order) {
      const auto hyp_ngrams = ngram_counts(hyp, order);
      std::unordered_map<std::string, std::uint64_t> best_ref;
      for (const Tokens& ref : refs) {
        for (const auto& [gram, count] : ngram_counts(ref, order)) {
          auto& best = best_ref[gram];
          best = std::max(best, count);
        }
      }
      NgramPrecision& prec = report.precisions[order - 1];
      for (const auto& [gram, count] : hyp_ngrams) {
        auto it = best_ref.find(gram);
        if (it != best_ref.end()) {
          prec.clipped += std::min(count, it->second);
        }
        prec.total += count;
      }
    }
  }

  double log_sum = 0.0;
  bool zero = false;
  for (NgramPrecision& prec : report.precisions) {
    prec.ratio = prec.total == 0 ? 0.0
                                 : static_cast<double>(prec.clipped) /
                                       static_cast<double>(prec.total);
    double p = prec.ratio;
    if (p == 0.0) {
      if (smoothing == BleuSmoothing::kFloor) {
        p = kFloorEpsilon;
      } else {
        zero = true;
        continue;
      }
    }
    log_sum += std::log(p);
  }

  if (report.hyp_len == 0) {
    report.brevity_penalty = report.ref_len == 0 ? 1.0 : 0.0;
  } else if (report.hyp_len >= report.ref_len) {
    report.brevity_penalty = 1.0;
  } else {
    report.brevity_penalty =
        std::exp(1.0 - static_cast<double>(report.ref_len) /
                           static_cast<double>(report.hyp_len));
  }

  if (zero || report.hyp_len == 0) {
    report.bleu = 0.0;
  } else {
    report.bleu = 100.0 * report.brevity_penalty *
                  std::exp(log_sum / static_cast<double>(max_order));
  }
  return report;
}

namespace {

struct Alignment {
  std::uint64_t matches = 0;
  std::uint64_t chunks = 0;
};

// Exhaustive minimum-chunk search over maximum matchings, with sound
// pruning: chunk counts only grow, and a match-count upper bound cuts
// branches that cannot stay maximal.
class ChunkSearch {
 public:
  ChunkSearch(const Tokens& hyp, const Tokens& ref, std::uint64_t target)
      : hyp_(hyp), ref_size_(ref.size()), target_(target) {
    std::unordered_map<std::string, std::vector<int>> ref_positions;
    for (std::size_t r = 0; r < ref.size(); ++r) {
      ref_positions[ref[r]].push_back(static_cast<int>(r));
    }
    candidates_.resize(hyp.size());
    for (std::size_t h = 0; h < hyp.size(); ++h) {
      auto it = ref_positions.find(hyp[h]);
      if (it != ref_positions.end()) candidates_[h] = it->second;
    }
    // max matches achievable from position h onward (loose bound)
    suffix_possible_.assign(hyp.size() + 1, 0);
    for (std::size_t h = hyp.size(); h-- > 0;) {
      suffix_possible_[h] =
          suffix_possible_[h + 1] + (candidates_[h].empty() ? 0 : 1);
    }
  }

  std::uint64_t run() {
    best_ = std::numeric_limits<std::uint64_t>::max();
    used_.assign(ref_size_, false);
    recurse(0, 0, 0, -2);
    return best_;
  }

 private:
  void recurse(std::size_t h, std::uint64_t matches, std::uint64_t chunks,
               int prev_r) {
    if (chunks >= best_) return;
    if (matches + suffix_possible_[h] < target_) return;
    if (h == hyp_.size()) {
      if (matches == target_) best_ = chunks;
      return;
    }
    // Try extending the current chunk first so good bounds appear early.
    const std::vector<int>& cands = candidates_[h];
    if (prev_r >= -1) {
      const int extend = prev_r + 1;
      for (int r : cands) {
        if (r == extend && !used_[r]) {
          used_[r] = true;
          recurse(h + 1, matches + 1, chunks, r);
          used_[r] = false;
          break;
        }
      }
    }
    for (int r : cands) {
      if (used_[r] || r == prev_r + 1) continue;
      used_[r] = true;
      recurse(h + 1, matches + 1, chunks + 1, r);
      used_[r] = false;
    }
    recurse(h + 1, matches, chunks, -2);  // leave h unmatched
  }

  const Tokens& hyp_;
  std::size_t ref_size_;
  std::uint64_t target_;
  std::vector<std::vector<int>> candidates_;
  std::vector<std::uint64_t> suffix_possible_;
  std::vector<bool> used_;
  std::uint64_t best_ = 0;
};

Alignment align_exact(const Tokens& hyp, const Tokens& ref,
                      std::uint64_t matches) {
  ChunkSearch search(hyp, ref, matches);
  return {matches, search.run()};
}

// Greedy fallback for long sentences: walk the hypothesis left to right,
// keep per-word quotas so the matching stays maximal, and prefer the
// reference position that extends the current chunk.
Alignment align_greedy(const Tokens& hyp, const Tokens& ref,
                       std::uint64_t target) {
  std::unordered_map<std::string, std::uint64_t> quota;
  {
    std::unordered_map<std::string, std::uint64_t> hyp_counts, ref_counts;
    for (const auto& t : hyp) ++hyp_counts[t];
    for (const auto& t : ref) ++ref_counts[t];
    for (const auto& [word, hc] : hyp_counts) {
      auto it = ref_counts.find(word);
      if (it != ref_counts.end()) quota[word] = std::min(hc, it->second);
    }
  }
  std::unordered_map<std::string, std::uint64_t> hyp_quota = quota;
  std::vector<bool> used(ref.size(), false);
  std::unordered_map<std::string, std::vector<int>> ref_positions;
  for (std::size_t r = 0; r < ref.size(); ++r) {
    ref_positions[ref[r]].push_back(static_cast<int>(r));
  }

  Alignment out;
  int prev_r = -2;
  for (std::size_t h = 0; h < hyp.size(); ++h) {
    auto q = hyp_quota.find(hyp[h]);
    if (q == hyp_quota.end() || q->second == 0) {
      prev_r = -2;
      continue;
    }
    const std::vector<int>& positions = ref_positions[hyp[h]];
    int chosen = -1;
    for (int r : positions) {
      if (!used[r] && r == prev_r + 1) {
        chosen = r;
        break;
      }
    }
    if (chosen < 0) {
      for (int r : positions) {
        if (!used[r]) {
          chosen = r;
          break;
        }
      }
    }
    if (chosen < 0) {
      prev_r = -2;
      continue;
    }
    used[chosen] = true;
    --q->second;
    ++out.matches;
    out.chunks += (chosen == prev_r + 1) ? 0 : 1;
    prev_r = chosen;
  }
  out.matches = target;  // quotas guarantee maximality
  return out;
}

MeteorReport meteor_one_ref(const Tokens& hyp, const Tokens& ref) {
  MeteorReport report;
  if (hyp.empty() && ref.empty()) {
    report.score = 1.0;
    return report;
  }
  if (hyp.empty() || ref.empty()) return report;

  std::uint64_t matches = 0;
  std::uint64_t matchable_ref_positions = 0;
  {
    std::unordered_map<std::string, std::uint64_t> hyp_counts, ref_counts;
    for (const auto& t : hyp) ++hyp_counts[t];
    for (const auto& t : ref) ++ref_counts[t];
    for (const auto& [word, hc] : hyp_counts) {
      auto it = ref_counts.find(word);
      if (it != ref_counts.end()) {
        matches += std::min(hc, it->second);
        matchable_ref_positions += it->second;
      }
    }
  }
  if (matches == 0) return report;

  const Alignment aligned =
      (matches <= 12 && matchable_ref_positions <= 24)
          ? align_exact(hyp, ref, matches)
          : align_greedy(hyp, ref, matches);

  report.matches = aligned.matches;
  report.chunks = aligned.chunks;
  report.precision =
      static_cast<double>(matches) / static_cast<double>(hyp.size());
  report.recall =
      static_cast<double>(matches) / static_cast<double>(ref.size());
  report.fmean = 10.0 * report.precision * report.recall /
                 (report.recall + 9.0 * report.precision);
  const double ratio =
      static_cast<double>(aligned.chunks) / static_cast<double>(matches);
  report.penalty = 0.5 * ratio * ratio * ratio;
  report.score = report.fmean * (1.0 - report.penalty);
  return report;
}

}  // namespace

MeteorReport meteor_sentence(const Tokens& hyp,
                             const std::vector<Tokens>& refs) {
  if (refs.empty()) throw Error("meteor: no references");
  MeteorReport best;
  bool first = true;
  for (const Tokens& ref : refs) {
    MeteorReport report = meteor_one_ref(hyp, ref);
    if (first || report.score > best.score) {
      best = report;
      first = false;
    }
  }
  return best;
}

std::uint64_t edit_distance(const Tokens& a, const Tokens& b) {
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  std::vector<std::uint64_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::uint64_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

namespace {

constexpr std::size_t kMaxShiftBlock = 10;
// Hypotheses up to this many tokens get the exact shift search; the greedy
// rounds take over beyond it. Exactness below eight tokens is part of the
// metric's contract.
constexpr std::size_t kExactSearchLimit = 8;
constexpr std::size_t kExactSearchBudget = 200000;

struct ShiftOutcome {
  std::uint64_t edits = 0;
  std::uint64_t shifts = 0;
};

Tokens apply_block_move(const Tokens& hyp, std::size_t start, std::size_t len,
                        std::size_t dest) {
  Tokens rest;
  rest.reserve(hyp.size());
  for (std::size_t i = 0; i < hyp.size(); ++i) {
    if (i < start || i >= start + len) rest.push_back(hyp[i]);
  }
  Tokens out;
  out.reserve(hyp.size());
  out.insert(out.end(), rest.begin(), rest.begin() + dest);
  out.insert(out.end(), hyp.begin() + start, hyp.begin() + start + len);
  out.insert(out.end(), rest.begin() + dest, rest.end());
  return out;
}

// Qualifying moves: a hypothesis block (length <= 10) equal to a reference
// block, re-seated at the reference block's position.
template <typename Fn>
void for_each_shift(const Tokens& hyp, const Tokens& ref, Fn&& fn) {
  const std::size_t max_len = std::min(kMaxShiftBlock, hyp.size());
  for (std::size_t start = 0; start < hyp.size(); ++start) {
    for (std::size_t len = 1; len <= max_len && start + len <= hyp.size();
         ++len) {
      for (std::size_t m = 0; m + len <= ref.size(); ++m) {
        bool equal = true;
        for (std::size_t k = 0; k < len; ++k) {
          if (hyp[start + k] != ref[m + k]) {
            equal = false;
            break;
          }
        }
        if (!equal) continue;
        const std::size_t dest = std::min(m, hyp.size() - len);
        if (dest == start) continue;  // already seated there
        fn(start, len, dest);
      }
    }
  }
}

// Greedy rounds: apply the move with the largest edit-distance reduction
// (ties leftmost, then shortest, then lowest destination) while one reduces.
ShiftOutcome greedy_shift_search(const Tokens& hyp_in, const Tokens& ref) {
  Tokens hyp = hyp_in;
  ShiftOutcome out;
  out.edits = edit_distance(hyp, ref);

  while (out.edits > 0 && !hyp.empty()) {
    std::uint64_t best_edits = out.edits;
    std::size_t best_start = 0, best_len = 0, best_dest = 0;
    bool found = false;
    for_each_shift(hyp, ref, [&](std::size_t start, std::size_t len,
                                 std::size_t dest) {
      const std::uint64_t edits =
          edit_distance(apply_block_move(hyp, start, len, dest), ref);
      if (edits < best_edits ||
          (found && edits == best_edits &&
           std::tie(start, len, dest) <
               std::tie(best_start, best_len, best_dest))) {
        best_edits = edits;
        best_start = start;
        best_len = len;
        best_dest = dest;
        found = true;
      }
    });
    if (!found || best_edits >= out.edits) break;
    hyp = apply_block_move(hyp, best_start, best_len, best_dest);
    out.edits = best_edits;
    ++out.shifts;
  }
  return out;
}

// Breadth-first search over shift sequences, minimizing shifts + edits; the
// one-step greedy can miss cooperating shift pairs even on tiny sentences.
// Falls back to the greedy result if the state budget runs out.
ShiftOutcome exact_shift_search(const Tokens& hyp, const Tokens& ref) {
  const ShiftOutcome greedy = greedy_shift_search(hyp, ref);

  auto serialize = [](const Tokens& t) {
    std::string key;
    for (const auto& w : t) {
      key += w;
      key.push_back('\x1F');
    }
    return key;
  };
  ShiftOutcome best;
  best.edits = edit_distance(hyp, ref);
  best.shifts = 0;
  std::set<std::string> visited = {serialize(hyp)};
  std::deque<std::pair<Tokens, std::uint64_t>> frontier;
  frontier.emplace_back(hyp, 0);
  while (!frontier.empty()) {
    const auto [state, depth] = frontier.front();
    frontier.pop_front();
    if (depth + 1 >= best.edits + best.shifts) continue;
    bool aborted = false;
    for_each_shift(state, ref, [&](std::size_t start, std::size_t len,
                                   std::size_t dest) {
      if (aborted) return;
      Tokens moved = apply_block_move(state, start, len, dest);
      if (!visited.insert(serialize(moved)).second) return;
      if (visited.size() > kExactSearchBudget) {
        aborted = true;
        return;
      }
      const std::uint64_t edits = edit_distance(moved, ref);
      if (depth + 1 + edits < best.edits + best.shifts) {
        best.edits = edits;
        best.shifts = depth + 1;
      }
      frontier.emplace_back(std::move(moved), depth + 1);
    });
    if (aborted) {
      return greedy.edits + greedy.shifts <= best.edits + best.shifts ? greedy
                                                                      : best;
    }
  }
  return best.edits + best.shifts <= greedy.edits + greedy.shifts ? best
                                                                  : greedy;
}

ShiftOutcome ter_against(const Tokens& hyp, const Tokens& ref) {
  if (hyp.size() <= kExactSearchLimit) return exact_shift_search(hyp, ref);
  return greedy_shift_search(hyp, ref);
}

}  // namespace

TerReport ter_sentence(const Tokens& hyp, const std::vector<Tokens>& refs) {
  if (refs.empty()) throw Error("ter: no references");
  double length_sum = 0.0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (refs[i].empty()) {
      throw Error("ter: reference " + std::to_string(i + 1) + " is empty");
    }
    length_sum += static_cast<double>(refs[i].size());
  }

  TerReport report;
  report.normalizer = length_sum / static_cast<double>(refs.size());
  bool first = true;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const ShiftOutcome outcome = ter_against(hyp, refs[i]);
    const std::uint64_t total = outcome.edits + outcome.shifts;
    if (first || total < report.edits + report.shifts) {
      report.edits = outcome.edits;
      report.shifts = outcome.shifts;
      report.best_ref = i;
      first = false;
    }
  }
  report.score =
      static_cast<double>(report.edits + report.shifts) / report.normalizer;
  return report;
}

namespace {

Tokens tokenize_for_scoring(const std::string& line, ScoreTokenizer mode) {
  if (mode == ScoreTokenizer::kWordPunct) return wordpunct_tokenize(line);
  Tokens out;
  std::istringstream ss(line);
  std::string token;
  while (ss >> token) out.push_back(token);
  return out;
}

std::vector<std::string> read_lines_strict(const std::string& path) {
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

bool is_blank(const std::string& s) {
  return s.find_first_not_of(" \t") == std::string::npos;
}

}  // namespace

ScoreReport score_lines(const std::vector<std::string>& hyp_lines,
                        const std::vector<std::vector<std::string>>& ref_lines,
                        const ScoreOptions& options) {
  for (std::size_t r = 0; r < ref_lines.size(); ++r) {
    if (ref_lines[r].size() != hyp_lines.size()) {
      const std::size_t divergent =
          std::min(ref_lines[r].size(), hyp_lines.size()) + 1;
      throw Error("line count mismatch: hypothesis has " +
                  std::to_string(hyp_lines.size()) + " lines, reference " +
                  std::to_string(r + 1) + " has " +
                  std::to_string(ref_lines[r].size()) +
                  " (first divergent line " + std::to_string(divergent) + ")");
    }
  }

  std::vector<Tokens> hyps;
  std::vector<std::vector<Tokens>> ref_sets;
  for (std::size_t i = 0; i < hyp_lines.size(); ++i) {
    std::vector<Tokens> refs;
    bool all_blank = true;
    for (const auto& file : ref_lines) {
      if (!is_blank(file[i])) {
        refs.push_back(tokenize_for_scoring(file[i], options.tokenizer));
        all_blank = false;
      }
    }
    if (all_blank && is_blank(hyp_lines[i])) continue;  // drop blank pairs
    if (refs.empty()) {
      throw Error("segment " + std::to_string(i + 1) +
                  " has no non-empty reference");
    }
    hyps.push_back(tokenize_for_scoring(hyp_lines[i], options.tokenizer));
    ref_sets.push_back(std::move(refs));
  }
  if (hyps.empty()) throw Error("no scorable segments");

  ScoreReport report;
  report.segments = hyps.size();
  report.bleu =
      bleu_corpus(hyps, ref_sets, options.max_order, options.smoothing);

  double meteor_sum = 0.0;
  double ter_sum = 0.0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const MeteorReport meteor = meteor_sentence(hyps[i], ref_sets[i]);
    meteor_sum += meteor.score;
    report.meteor_matches += meteor.matches;
    report.meteor_chunks += meteor.chunks;
    const TerReport ter = ter_sentence(hyps[i], ref_sets[i]);
    ter_sum += ter.score;
    report.ter_edits += ter.edits;
    report.ter_shifts += ter.shifts;
    report.ter_normalizer += ter.normalizer;
  }
  report.meteor = meteor_sum / static_cast<double>(hyps.size());
  report.ter = ter_sum / static_cast<double>(hyps.size());
  return report;
}

ScoreReport score_files(const std::string& hyp_path,
                        const std::vector<std::string>& ref_paths,
                        const ScoreOptions& options) {
  if (ref_paths.empty()) throw Error("score: no reference files");
  const std::vector<std::string> hyp_lines = read_lines_strict(hyp_path);
  std::vector<std::vector<std::string>> ref_lines;
  for (const std::string& path : ref_paths) {
    ref_lines.push_back(read_lines_strict(path));
  }
  return score_lines(hyp_lines, ref_lines, options);
}

std::string ScoreReport::to_text() const {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(3);
  out << "BLEU    " << bleu.bleu << "\n";
  out << "  precisions ";
  for (std::size_t i = 0; i < bleu.precisions.size(); ++i) {
    if (i) out << " / ";
    out << bleu.precisions[i].clipped << "/" << bleu.precisions[i].total;
  }
  out << "\n";
  out << "  brevity-penalty " << bleu.brevity_penalty << "  hyp-len "
      << bleu.hyp_len << "  ref-len " << bleu.ref_len << "\n";
  out.precision(4);
  out << "METEOR  " << meteor << "  (matches " << meteor_matches
      << ", chunks " << meteor_chunks << ")\n";
  out.precision(2);
  out << "TER     " << ter << "  (edits " << ter_edits << ", shifts "
      << ter_shifts << ")\n";
  out << "segments " << segments << "\n";
  return out.str();
}

std::string ScoreReport::to_json() const {
  nlohmann::ordered_json doc;
  doc["bleu"] = bleu.bleu;
  nlohmann::ordered_json precisions = nlohmann::ordered_json::array();
  for (const NgramPrecision& p : bleu.precisions) {
    precisions.push_back(
        {{"clipped", p.clipped}, {"total", p.total}, {"ratio", p.ratio}});
  }
  doc["ngram_precisions"] = std::move(precisions);
  doc["brevity_penalty"] = bleu.brevity_penalty;
  doc["hyp_len"] = bleu.hyp_len;
  doc["ref_len"] = bleu.ref_len;
  doc["meteor"] = meteor;
  doc["meteor_matches"] = meteor_matches;
  doc["meteor_chunks"] = meteor_chunks;
  doc["ter"] = ter;
  doc["ter_edits"] = ter_edits;
  doc["ter_shifts"] = ter_shifts;
  doc["ter_normalizer"] = ter_normalizer;
  doc["segments"] = segments;
  return doc.dump(2) + "\n";
}

}  // namespace kmt
