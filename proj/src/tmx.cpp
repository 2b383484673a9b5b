#include "kmt/tmx.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <vector>

#include "kmt/digest.hpp"
#include "kmt/error.hpp"
#include "kmt/unicode.hpp"

namespace kmt {

namespace {

int line_at(std::string_view doc, std::size_t pos) {
  int line = 1;
  for (std::size_t i = 0; i < pos && i < doc.size(); ++i) {
    if (doc[i] == '\n') ++line;
  }
  return line;
}

[[noreturn]] void fail(std::string_view doc, std::size_t pos,
                       const std::string& message) {
  throw Error("TMX line " + std::to_string(line_at(doc, pos)) + ": " +
              message);
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

// "en" matches "en" and "en-US"; comparison is case-insensitive.
bool lang_matches(std::string_view tuv_lang, std::string_view requested) {
  const std::string a = ascii_lower(tuv_lang);
  const std::string b = ascii_lower(requested);
  if (a == b) return true;
  return a.size() > b.size() && a.compare(0, b.size(), b) == 0 &&
         a[b.size()] == '-';
}

struct Attr {
  std::string name;
  std::string value;
};

struct Tag {
  enum Kind { kOpen, kClose, kSelfClose } kind = kOpen;
  std::string name;
  std::vector<Attr> attrs;
};

class XmlScanner {
 public:
  explicit XmlScanner(std::string_view doc) : doc_(doc) {}

  bool at_end() const { return pos_ >= doc_.size(); }
  std::size_t pos() const { return pos_; }

  // Scans up to the next markup, appending decoded character data to `text`.
  // Returns false at end of document.
  bool next_text(std::string& text) {
    while (pos_ < doc_.size() && doc_[pos_] != '<') {
      if (doc_[pos_] == '&') {
        decode_entity(text);
      } else {
        text.push_back(doc_[pos_]);
        ++pos_;
      }
    }
    return pos_ < doc_.size();
  }

  // Consumes the markup at the cursor. Returns true if it was an element tag
  // (stored in `tag`); comments, declarations, DOCTYPE are skipped and CDATA
  // content is appended to `text`.
  bool next_markup(Tag& tag, std::string& text) {
    const std::size_t start = pos_;
    if (doc_.compare(pos_, 4, "<!--") == 0) {
      const std::size_t end = doc_.find("-->", pos_ + 4);
      if (end == std::string_view::npos) fail(doc_, start, "unterminated comment");
      pos_ = end + 3;
      return false;
    }
    if (doc_.compare(pos_, 9, "<![CDATA[") == 0) {
      const std::size_t end = doc_.find("]]>", pos_ + 9);
      if (end == std::string_view::npos) fail(doc_, start, "unterminated CDATA");
      text.append(doc_.substr(pos_ + 9, end - (pos_ + 9)));
      pos_ = end + 3;
      return false;
    }
    if (doc_.compare(pos_, 2, "<?") == 0) {
      const std::size_t end = doc_.find("?>", pos_ + 2);
      if (end == std::string_view::npos) {
        fail(doc_, start, "unterminated processing instruction");
      }
      pos_ = end + 2;
      return false;
    }
    if (doc_.compare(pos_, 2, "<!") == 0) {  // DOCTYPE etc.
      const std::size_t end = doc_.find('>', pos_ + 2);
      if (end == std::string_view::npos) {
        fail(doc_, start, "unterminated declaration");
      }
      pos_ = end + 1;
      return false;
    }

    ++pos_;  // consume '<'
    tag.kind = Tag::kOpen;
    tag.attrs.clear();
    if (pos_ < doc_.size() && doc_[pos_] == '/') {
      tag.kind = Tag::kClose;
      ++pos_;
    }
    tag.name = read_name(start);
    skip_space();
    while (pos_ < doc_.size() && doc_[pos_] != '>' && doc_[pos_] != '/') {
      Attr attr;
      attr.name = read_name(start);
      skip_space();
      if (pos_ >= doc_.size() || doc_[pos_] != '=') {
        fail(doc_, start, "attribute '" + attr.name + "' missing '='");
      }
      ++pos_;
      skip_space();
      if (pos_ >= doc_.size() || (doc_[pos_] != '"' && doc_[pos_] != '\'')) {
        fail(doc_, start, "attribute '" + attr.name + "' missing quote");
      }
      const char quote = doc_[pos_++];
      std::string value;
      while (pos_ < doc_.size() && doc_[pos_] != quote) {
        if (doc_[pos_] == '&') {
          decode_entity(value);
        } else {
          value.push_back(doc_[pos_++]);
        }
      }
      if (pos_ >= doc_.size()) fail(doc_, start, "unterminated attribute value");
      ++pos_;  // closing quote
      attr.value = std::move(value);
      tag.attrs.push_back(std::move(attr));
      skip_space();
    }
    if (pos_ < doc_.size() && doc_[pos_] == '/') {
      if (tag.kind == Tag::kClose) fail(doc_, start, "malformed closing tag");
      tag.kind = Tag::kSelfClose;
      ++pos_;
    }
    if (pos_ >= doc_.size() || doc_[pos_] != '>') {
      fail(doc_, start, "unterminated tag <" + tag.name + ">");
    }
    ++pos_;
    return true;
  }

 private:
  void skip_space() {
    while (pos_ < doc_.size() &&
           (doc_[pos_] == ' ' || doc_[pos_] == '\t' || doc_[pos_] == '\n' ||
            doc_[pos_] == '\r')) {
      ++pos_;
    }
  }

  std::string read_name(std::size_t err_pos) {
    const std::size_t begin = pos_;
    while (pos_ < doc_.size()) {
      const char c = doc_[pos_];
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '>' ||
          c == '/' || c == '=') {
        break;
      }
      ++pos_;
    }
    if (pos_ == begin) fail(doc_, err_pos, "expected a name");
    return std::string(doc_.substr(begin, pos_ - begin));
  }

  void decode_entity(std::string& out) {
    const std::size_t start = pos_;
    const std::size_t end = doc_.find(';', pos_ + 1);
    if (end == std::string_view::npos || end - pos_ > 12) {
      fail(doc_, start, "unterminated entity reference");
    }
    const std::string_view body = doc_.substr(pos_ + 1, end - pos_ - 1);
    if (body == "amp") {
      out.push_back('&');
    } else if (body == "lt") {
      out.push_back('<');
    } else if (body == "gt") {
      out.push_back('>');
    } else if (body == "apos") {
      out.push_back('\'');
    } else if (body == "quot") {
      out.push_back('"');
    } else if (!body.empty() && body[0] == '#') {
      char32_t cp = 0;
      bool ok = body.size() > 1;
      if (body.size() > 2 && (body[1] == 'x' || body[1] == 'X')) {
        for (std::size_t i = 2; i < body.size() && ok; ++i) {
          const char c = body[i];
          cp <<= 4;
          if (c >= '0' && c <= '9') cp |= static_cast<char32_t>(c - '0');
          else if (c >= 'a' && c <= 'f') cp |= static_cast<char32_t>(c - 'a' + 10);
          else if (c >= 'A' && c <= 'F') cp |= static_cast<char32_t>(c - 'A' + 10);
          else ok = false;
        }
      } else {
        for (std::size_t i = 1; i < body.size() && ok; ++i) {
          const char c = body[i];
          if (c < '0' || c > '9') {
            ok = false;
            break;
          }
          cp = cp * 10 + static_cast<char32_t>(c - '0');
        }
      }
      if (!ok || cp > 0x10FFFF) {
        fail(doc_, start, "bad character reference '&" + std::string(body) + ";'");
      }
      uni::append_utf8(out, cp);
    } else {
      fail(doc_, start, "unknown entity '&" + std::string(body) + ";'");
    }
    pos_ = end + 1;
  }

  std::string_view doc_;
  std::size_t pos_ = 0;
};

}  // namespace

TmxParseResult parse_tmx(std::string_view document, const std::string& src_lang,
                         const std::string& tgt_lang,
                         const std::string& corpus_tag) {
  XmlScanner scanner(document);
  TmxParseResult result;

  std::vector<std::string> stack;
  struct Tuv {
    std::string lang;
    std::string seg;
    bool has_seg = false;
  };
  std::vector<Tuv> tu_tuvs;
  Tuv current_tuv;
  bool in_tu = false;
  bool in_tuv = false;
  std::size_t seg_depth = 0;  // > 0 while inside <seg>, counting nesting
  std::string discard;

  auto close_tu = [&]() {
    std::string src;
    bool has_src = false;
    std::vector<std::string> refs;
    for (const Tuv& tuv : tu_tuvs) {
      if (!tuv.has_seg) continue;
      if (!has_src && lang_matches(tuv.lang, src_lang)) {
        src = tuv.seg;
        has_src = true;
      } else if (lang_matches(tuv.lang, tgt_lang)) {
        refs.push_back(tuv.seg);
      }
    }
    if (has_src && !refs.empty()) {
      SentencePair pair;
      pair.id = static_cast<std::int64_t>(result.corpus.pairs.size());
      pair.corpus_tag = corpus_tag;
      pair.src_lang = src_lang;
      pair.tgt_lang = tgt_lang;
      pair.src = std::move(src);
      pair.refs = std::move(refs);
      result.corpus.pairs.push_back(std::move(pair));
    } else {
      ++result.skipped_tus;
    }
    tu_tuvs.clear();
  };

  while (true) {
    std::string* sink = seg_depth > 0 ? &current_tuv.seg : &discard;
    discard.clear();
    if (!scanner.next_text(*sink)) break;
    Tag tag;
    if (!scanner.next_markup(tag, *sink)) continue;
    const std::string name = ascii_lower(tag.name);
    const std::size_t err_pos = scanner.pos();

    if (tag.kind == Tag::kOpen || tag.kind == Tag::kSelfClose) {
      if (name == "tu") {
        if (tag.kind == Tag::kSelfClose) {
          ++result.skipped_tus;
        } else {
          if (in_tu) fail(document, err_pos, "nested <tu>");
          in_tu = true;
          tu_tuvs.clear();
        }
      } else if (name == "tuv") {
        if (!in_tu) fail(document, err_pos, "<tuv> outside <tu>");
        if (in_tuv) fail(document, err_pos, "nested <tuv>");
        current_tuv = Tuv{};
        for (const Attr& attr : tag.attrs) {
          const std::string attr_name = ascii_lower(attr.name);
          if (attr_name == "xml:lang" || attr_name == "lang") {
            current_tuv.lang = attr.value;
          }
        }
        if (tag.kind == Tag::kSelfClose) {
          tu_tuvs.push_back(current_tuv);
        } else {
          in_tuv = true;
        }
      } else if (name == "seg") {
        if (!in_tuv) fail(document, err_pos, "<seg> outside <tuv>");
        if (tag.kind == Tag::kSelfClose) {
          current_tuv.seg.clear();
          current_tuv.has_seg = true;
        } else {
          if (seg_depth > 0) fail(document, err_pos, "nested <seg>");
          current_tuv.seg.clear();
          seg_depth = 1;
        }
      } else if (seg_depth > 0 && tag.kind == Tag::kOpen) {
        ++seg_depth;  // inline markup inside <seg>: keep text, drop tags
      }
      if (tag.kind == Tag::kOpen) stack.push_back(name);
    } else {  // closing tag
      if (stack.empty() || stack.back() != name) {
        fail(document, err_pos,
             "mismatched closing tag </" + tag.name + ">");
      }
      stack.pop_back();
      if (name == "seg") {
        if (seg_depth != 1) fail(document, err_pos, "unbalanced <seg>");
        seg_depth = 0;
        current_tuv.has_seg = true;
      } else if (seg_depth > 0) {
        --seg_depth;
      } else if (name == "tuv") {
        if (!in_tuv) fail(document, err_pos, "stray </tuv>");
        in_tuv = false;
        tu_tuvs.push_back(current_tuv);
      } else if (name == "tu") {
        if (!in_tu) fail(document, err_pos, "stray </tu>");
        in_tu = false;
        close_tu();
      }
    }
  }

  if (!stack.empty()) {
    fail(document, document.size(),
         "unexpected end of document: unclosed <" + stack.back() + ">");
  }
  if (result.corpus.pairs.empty()) {
    throw Error("TMX document contains no usable <tu> for languages '" +
                src_lang + "' and '" + tgt_lang + "'");
  }
  if (result.skipped_tus > 0) {
    result.warnings.push_back(
        std::to_string(result.skipped_tus) +
        " translation unit(s) skipped: missing '" + src_lang + "' or '" +
        tgt_lang + "' segment");
  }
  result.corpus.provenance.push_back("<memory>:" + sha256_hex(document));
  return result;
}

TmxParseResult parse_tmx_file(const std::string& path,
                              const std::string& src_lang,
                              const std::string& tgt_lang,
                              const std::string& corpus_tag) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open TMX file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string document = ss.str();
  TmxParseResult result = parse_tmx(document, src_lang, tgt_lang, corpus_tag);
  result.corpus.provenance.clear();
  result.corpus.provenance.push_back(path + ":" + sha256_hex(document));
  return result;
}

}  // namespace kmt
