#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "kmt/error.hpp"
#include "kmt/subword.hpp"
#include "kmt/unicode.hpp"

namespace kmt {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr char kPairSep = '\x01';

std::string pair_key(std::string_view left, std::string_view right) {
  std::string key;
  key.reserve(left.size() + right.size() + 1);
  key.append(left);
  key.push_back(kPairSep);
  key.append(right);
  return key;
}

int line_of_offset(std::string_view text, std::size_t offset) {
  int line = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') ++line;
  }
  return line;
}

}  // namespace

std::string to_string(SubwordKind kind) {
  switch (kind) {
    case SubwordKind::kBpe:
      return "bpe";
    case SubwordKind::kWordPiece:
      return "wordpiece";
    case SubwordKind::kUnigram:
      return "unigram";
  }
  return "bpe";
}

SubwordKind subword_kind_from_string(std::string_view name) {
  if (name == "bpe") return SubwordKind::kBpe;
  if (name == "wordpiece") return SubwordKind::kWordPiece;
  if (name == "unigram") return SubwordKind::kUnigram;
  throw Error("unknown tokenizer kind '" + std::string(name) +
              "' (expected bpe, wordpiece or unigram)");
}

void TrainerConfig::validate() const {
  if (vocabulary_size == 0) throw Error("vocabulary_size must be positive");
  if (!(character_coverage > 0.0 && character_coverage <= 1.0)) {
    throw Error("character_coverage must be in (0, 1]");
  }
  if (max_piece_length == 0) throw Error("max_piece_length must be positive");
  if (min_pair_frequency == 0) {
    throw Error("min_pair_frequency must be positive");
  }
  if (unigram_seed_factor == 0) {
    throw Error("unigram_seed_factor must be positive");
  }
  if (!(unigram_prune_keep > 0.0 && unigram_prune_keep < 1.0)) {
    throw Error("unigram_prune_keep must be in (0, 1)");
  }
  if (em_iterations_per_round == 0) {
    throw Error("em_iterations_per_round must be positive");
  }
  if (shards == 0) throw Error("shards must be positive");
}

void SubwordModel::finalize() {
  piece_index_.clear();
  merge_rank_.clear();
  max_piece_cps_ = 0;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    if (vocab[i].id != static_cast<std::int32_t>(i)) {
      throw Error("vocab ids must be contiguous: piece '" + vocab[i].piece +
                  "' has id " + std::to_string(vocab[i].id) + " at index " +
                  std::to_string(i));
    }
    if (!piece_index_.emplace(vocab[i].piece, vocab[i].id).second) {
      throw Error("duplicate vocab piece '" + vocab[i].piece + "'");
    }
    max_piece_cps_ =
        std::max(max_piece_cps_, uni::codepoint_count(vocab[i].piece));
  }
  for (std::size_t r = 0; r < merges.size(); ++r) {
    merge_rank_.emplace(pair_key(merges[r].first, merges[r].second),
                        static_cast<std::int32_t>(r));
  }
}

std::optional<std::int32_t> SubwordModel::piece_id(
    std::string_view piece) const {
  auto it = piece_index_.find(std::string(piece));
  if (it == piece_index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> SubwordModel::encode(std::string_view text) const {
  PreTokenized pre = wordpunct_pretokenize(text);
  std::vector<std::string> pieces;
  for (const PreToken& token : pre.tokens) {
    if (token.space_before) pieces.push_back(boundary_piece);
    for (auto& piece : encode_pretoken(token.text)) {
      pieces.push_back(std::move(piece));
    }
  }
  if (pre.trailing_space) pieces.push_back(boundary_piece);
  return pieces;
}

std::vector<std::string> SubwordModel::encode_pretoken(
    std::string_view pretoken) const {
  if (pretoken.empty()) return {};
  switch (kind) {
    case SubwordKind::kBpe:
      return encode_bpe(pretoken);
    case SubwordKind::kWordPiece:
      return encode_wordpiece(pretoken);
    case SubwordKind::kUnigram:
      return encode_unigram(pretoken);
  }
  return {};
}

std::vector<std::string> SubwordModel::encode_bpe(
    std::string_view pretoken) const {
  std::u32string cps = uni::decode_utf8(pretoken);
  std::vector<std::string> syms;
  syms.reserve(cps.size());
  for (char32_t cp : cps) {
    std::string ch = uni::encode_utf8(std::u32string(1, cp));
    syms.push_back(piece_index_.count(ch) ? std::move(ch) : unk_piece);
  }
  // Replay merges in learned priority order: repeatedly apply the
  // lowest-ranked pair present, left to right.
  while (syms.size() > 1) {
    std::int32_t best_rank = std::numeric_limits<std::int32_t>::max();
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
      auto it = merge_rank_.find(pair_key(syms[i], syms[i + 1]));
      if (it != merge_rank_.end() && it->second < best_rank) {
        best_rank = it->second;
      }
    }
    if (best_rank == std::numeric_limits<std::int32_t>::max()) break;
    const auto& [left, right] = merges[best_rank];
    std::vector<std::string> next;
    next.reserve(syms.size());
    for (std::size_t i = 0; i < syms.size();) {
      if (i + 1 < syms.size() && syms[i] == left && syms[i + 1] == right) {
        next.push_back(left + right);
        i += 2;
      } else {
        next.push_back(std::move(syms[i]));
        ++i;
      }
    }
    syms = std::move(next);
  }
  return syms;
}

std::vector<std::string> SubwordModel::encode_wordpiece(
    std::string_view pretoken) const {
  std::u32string cps = uni::decode_utf8(pretoken);
  std::vector<std::string> pieces;
  std::size_t pos = 0;
  while (pos < cps.size()) {
    const std::size_t longest = std::min(max_piece_cps_, cps.size() - pos);
    std::size_t matched = 0;
    std::string matched_piece;
    for (std::size_t len = longest; len >= 1; --len) {
      std::string candidate = pos == 0 ? std::string() : continuation_prefix;
      candidate += uni::encode_utf8(std::u32string_view(cps.data() + pos, len));
      if (piece_index_.count(candidate)) {
        matched = len;
        matched_piece = std::move(candidate);
        break;
      }
    }
    if (matched == 0) return {unk_piece};  // whole pre-token is unknown
    pieces.push_back(std::move(matched_piece));
    pos += matched;
  }
  return pieces;
}

std::vector<std::string> SubwordModel::encode_unigram(
    std::string_view pretoken) const {
  const std::u32string cps = uni::decode_utf8(pretoken);
  const std::size_t n = cps.size();

  struct Cell {
    double logp = -std::numeric_limits<double>::infinity();
    std::uint32_t count = 0;
    std::int32_t piece = -1;  // vocab id, or -2 for an unk edge
    std::size_t next = 0;
    bool reached = false;
  };
  std::vector<Cell> best(n + 1);
  best[n].logp = 0.0;
  best[n].reached = true;

  // Right-to-left Viterbi. Ties prefer fewer pieces, then the
  // lexicographically smaller piece sequence; because competing first pieces
  // start at the same offset, comparing the first piece alone decides.
  for (std::size_t i = n; i-- > 0;) {
    bool any_match = false;
    auto consider = [&](std::size_t len, std::int32_t id,
                        std::string_view piece, double score) {
      const Cell& suffix = best[i + len];
      if (!suffix.reached) return;
      const double logp = score + suffix.logp;
      const std::uint32_t count = 1 + suffix.count;
      Cell& cell = best[i];
      bool better = false;
      if (!cell.reached) {
        better = true;
      } else if (logp != cell.logp) {
        better = logp > cell.logp;
      } else if (count != cell.count) {
        better = count < cell.count;
      } else {
        const std::string_view current =
            cell.piece == -2 ? std::string_view(unk_piece)
                             : std::string_view(vocab[cell.piece].piece);
        better = piece < current;
      }
      if (better) {
        cell.logp = logp;
        cell.count = count;
        cell.piece = id;
        cell.next = i + len;
        cell.reached = true;
      }
    };
    const std::size_t longest = std::min(max_piece_cps_, n - i);
    for (std::size_t len = 1; len <= longest; ++len) {
      const std::string sub =
          uni::encode_utf8(std::u32string_view(cps.data() + i, len));
      auto it = piece_index_.find(sub);
      if (it == piece_index_.end()) continue;
      any_match = true;
      consider(len, it->second, vocab[it->second].piece,
               vocab[it->second].score);
    }
    if (!any_match) {
      auto unk_it = piece_index_.find(unk_piece);
      const double unk_score =
          unk_it == piece_index_.end() ? -100.0 : vocab[unk_it->second].score;
      consider(1, -2, unk_piece, unk_score);
    }
  }

  std::vector<std::string> pieces;
  std::size_t pos = 0;
  while (pos < n) {
    const Cell& cell = best[pos];
    pieces.push_back(cell.piece == -2 ? unk_piece : vocab[cell.piece].piece);
    pos = cell.next;
  }
  return pieces;
}

std::string SubwordModel::decode(const std::vector<std::string>& pieces) const {
  std::string out;
  for (const std::string& piece : pieces) {
    if (piece == boundary_piece) {
      out.push_back(' ');
      continue;
    }
    if (!piece_index_.count(piece)) {
      throw Error("unknown piece '" + piece + "'");
    }
    if (!continuation_prefix.empty() &&
        piece.size() > continuation_prefix.size() &&
        piece.compare(0, continuation_prefix.size(), continuation_prefix) ==
            0) {
      out.append(piece, continuation_prefix.size(),
                 piece.size() - continuation_prefix.size());
    } else {
      out.append(piece);
    }
  }
  return out;
}

std::string SubwordModel::serialize() const {
  ordered_json doc;
  doc["kind"] = to_string(kind);
  doc["version"] = 1;
  doc["normalization_fingerprint"] = normalization_fingerprint;
  doc["unk_piece"] = unk_piece;
  doc["continuation_prefix"] = continuation_prefix;
  doc["boundary_piece"] = boundary_piece;
  ordered_json vocab_json = ordered_json::array();
  for (const VocabEntry& entry : vocab) {
    vocab_json.push_back({entry.piece, entry.id, entry.score});
  }
  doc["vocab"] = std::move(vocab_json);
  ordered_json merges_json = ordered_json::array();
  for (const auto& [left, right] : merges) {
    merges_json.push_back({left, right});
  }
  doc["merges"] = std::move(merges_json);
  return doc.dump(2) + "\n";
}

void SubwordModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write model '" + path + "'");
  out << serialize();
}

SubwordModel SubwordModel::parse(std::string_view text,
                                 const std::string& origin) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("model " + origin + " line " +
                std::to_string(line_of_offset(text, e.byte)) +
                ": " + e.what());
  }
  auto require = [&](const char* field) -> const ordered_json& {
    if (!doc.contains(field)) {
      throw Error("model " + origin + ": missing field '" +
                  std::string(field) + "'");
    }
    return doc.at(field);
  };

  SubwordModel model;
  try {
    model.kind = subword_kind_from_string(
        require("kind").get<std::string>());
    model.normalization_fingerprint =
        require("normalization_fingerprint").get<std::string>();
    model.unk_piece = require("unk_piece").get<std::string>();
    model.continuation_prefix =
        require("continuation_prefix").get<std::string>();
    model.boundary_piece = require("boundary_piece").get<std::string>();

    const ordered_json& vocab_json = require("vocab");
    if (!vocab_json.is_array()) {
      throw Error("model " + origin + ": field 'vocab' must be an array");
    }
    for (std::size_t i = 0; i < vocab_json.size(); ++i) {
      const ordered_json& row = vocab_json[i];
      if (!row.is_array() || row.size() != 3) {
        throw Error("model " + origin + ": field 'vocab[" +
                    std::to_string(i) + "]' must be [piece, id, score]");
      }
      model.vocab.push_back({row[0].get<std::string>(),
                             row[1].get<std::int32_t>(),
                             row[2].get<double>()});
    }
    const ordered_json& merges_json = require("merges");
    if (!merges_json.is_array()) {
      throw Error("model " + origin + ": field 'merges' must be an array");
    }
    for (std::size_t i = 0; i < merges_json.size(); ++i) {
      const ordered_json& row = merges_json[i];
      if (!row.is_array() || row.size() != 2) {
        throw Error("model " + origin + ": field 'merges[" +
                    std::to_string(i) + "]' must be [left, right]");
      }
      model.merges.emplace_back(row[0].get<std::string>(),
                                row[1].get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("model " + origin + ": " + e.what());
  }

  if (model.unk_piece.empty()) {
    throw Error("model " + origin + ": field 'unk_piece' must be non-empty");
  }
  if (model.boundary_piece.empty()) {
    throw Error("model " + origin +
                ": field 'boundary_piece' must be non-empty");
  }
  if (model.kind == SubwordKind::kWordPiece &&
      model.continuation_prefix.empty()) {
    throw Error("model " + origin +
                ": field 'continuation_prefix' must be non-empty for "
                "wordpiece models");
  }
  model.finalize();

  if (model.kind == SubwordKind::kBpe) {
    for (std::size_t i = 0; i < model.merges.size(); ++i) {
      const std::string joined =
          model.merges[i].first + model.merges[i].second;
      if (!model.piece_index_.count(joined)) {
        throw Error("model " + origin + ": field 'merges[" +
                    std::to_string(i) + "]': concatenation '" + joined +
                    "' is not a vocab piece");
      }
    }
  }
  if (model.kind == SubwordKind::kUnigram) {
    double total = 0.0;
    for (std::size_t i = 0; i < model.vocab.size(); ++i) {
      if (model.vocab[i].score > 0.0) {
        throw Error("model " + origin + ": field 'vocab[" +
                    std::to_string(i) + "]': unigram score must be <= 0");
      }
      total += std::exp(model.vocab[i].score);
    }
    if (std::abs(total - 1.0) > 1e-6) {
      throw Error("model " + origin +
                  ": field 'vocab': unigram probabilities sum to " +
                  std::to_string(total) + ", expected 1 within 1e-6");
    }
  }
  return model;
}

SubwordModel SubwordModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), "'" + path + "'");
}

bool SubwordModel::structurally_equal(const SubwordModel& other) const {
  if (kind != other.kind || unk_piece != other.unk_piece ||
      continuation_prefix != other.continuation_prefix ||
      boundary_piece != other.boundary_piece ||
      normalization_fingerprint != other.normalization_fingerprint ||
      vocab.size() != other.vocab.size() || merges != other.merges) {
    return false;
  }
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    if (vocab[i].piece != other.vocab[i].piece ||
        vocab[i].id != other.vocab[i].id ||
        vocab[i].score != other.vocab[i].score) {
      return false;
    }
  }
  return true;
}

}  // namespace kmt
