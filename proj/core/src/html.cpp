#include "pt/html.hpp"

#include <array>
#include <cstdint>
#include <utility>

namespace pt::html {
namespace {

bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

bool starts_with_ci(std::string_view s, std::size_t pos, std::string_view prefix) {
  if (s.size() - pos < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    char c = s[pos + i];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if (c != prefix[i]) return false;
  }
  return true;
}

std::size_t find_ci(std::string_view s, std::size_t from, std::string_view needle) {
  for (std::size_t i = from; i + needle.size() <= s.size(); ++i) {
    if (starts_with_ci(s, i, needle)) return i;
  }
  return std::string_view::npos;
}

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) cp = 0xFFFD;
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

constexpr std::array<std::pair<std::string_view, std::uint32_t>, 14> kNamedEntities{{
    {"amp", '&'},
    {"lt", '<'},
    {"gt", '>'},
    {"quot", '"'},
    {"apos", '\''},
    {"nbsp", 0xA0},
    {"copy", 0xA9},
    {"reg", 0xAE},
    {"trade", 0x2122},
    {"hellip", 0x2026},
    {"mdash", 0x2014},
    {"ndash", 0x2013},
    {"laquo", 0xAB},
    {"raquo", 0xBB},
}};

class Tokenizer {
 public:
  explicit Tokenizer(std::string_view doc) : doc_(doc) {}

  std::vector<Token> run() {
    std::size_t text_start = 0;
    while (pos_ < doc_.size()) {
      if (doc_[pos_] != '<') {
        ++pos_;
        continue;
      }
      std::size_t lt = pos_;
      bool markup = false;
      if (starts_with_ci(doc_, lt, "<!--")) {
        flush_text(text_start, lt);
        read_comment();
        markup = true;
      } else if (lt + 1 < doc_.size() && (doc_[lt + 1] == '!' || doc_[lt + 1] == '?')) {
        flush_text(text_start, lt);
        read_declaration();
        markup = true;
      } else if (lt + 1 < doc_.size() && doc_[lt + 1] == '/' && lt + 2 < doc_.size() &&
                 is_alpha(doc_[lt + 2])) {
        flush_text(text_start, lt);
        read_end_tag();
        markup = true;
      } else if (lt + 1 < doc_.size() && is_alpha(doc_[lt + 1])) {
        flush_text(text_start, lt);
        read_start_tag();
        markup = true;
      }
      if (markup) {
        text_start = pos_;
      } else {
        ++pos_;
      }
    }
    flush_text(text_start, doc_.size());
    return std::move(tokens_);
  }

 private:
  void flush_text(std::size_t begin, std::size_t end) {
    if (end <= begin) return;
    Token t;
    t.kind = Token::Kind::Text;
    t.data = decode_entities(doc_.substr(begin, end - begin));
    tokens_.push_back(std::move(t));
  }

  void read_comment() {
    std::size_t body = pos_ + 4;
    std::size_t end = doc_.find("-->", body);
    Token t;
    t.kind = Token::Kind::Comment;
    if (end == std::string_view::npos) {
      t.data = std::string(doc_.substr(body));
      pos_ = doc_.size();
    } else {
      t.data = std::string(doc_.substr(body, end - body));
      pos_ = end + 3;
    }
    tokens_.push_back(std::move(t));
  }

  void read_declaration() {
    std::size_t end = doc_.find('>', pos_);
    Token t;
    t.kind = Token::Kind::Declaration;
    if (end == std::string_view::npos) {
      t.data = std::string(doc_.substr(pos_ + 2));
      pos_ = doc_.size();
    } else {
      t.data = std::string(doc_.substr(pos_ + 2, end - pos_ - 2));
      pos_ = end + 1;
    }
    tokens_.push_back(std::move(t));
  }

  std::string read_name(std::string_view stops) {
    std::size_t begin = pos_;
    while (pos_ < doc_.size() && !is_ascii_space(doc_[pos_]) &&
           stops.find(doc_[pos_]) == std::string_view::npos) {
      ++pos_;
    }
    return ascii_lower(doc_.substr(begin, pos_ - begin));
  }

  void skip_space() {
    while (pos_ < doc_.size() && is_ascii_space(doc_[pos_])) ++pos_;
  }

  void read_end_tag() {
    pos_ += 2;
    Token t;
    t.kind = Token::Kind::EndTag;
    t.data = read_name("/>");
    std::size_t end = doc_.find('>', pos_);
    pos_ = end == std::string_view::npos ? doc_.size() : end + 1;
    tokens_.push_back(std::move(t));
  }

  void read_start_tag() {
    pos_ += 1;
    Token t;
    t.kind = Token::Kind::StartTag;
    t.data = read_name("/>");
    while (pos_ < doc_.size()) {
      skip_space();
      if (pos_ >= doc_.size()) break;
      char c = doc_[pos_];
      if (c == '>') {
        ++pos_;
        break;
      }
      if (c == '/') {
        ++pos_;
        if (pos_ < doc_.size() && doc_[pos_] == '>') {
          t.self_closing = true;
          ++pos_;
          break;
        }
        continue;
      }
      Attribute attr;
      attr.name = read_name("=/>");
      if (attr.name.empty()) {
        attr.name.push_back(static_cast<char>(c));
        ++pos_;
      }
      skip_space();
      if (pos_ < doc_.size() && doc_[pos_] == '=') {
        ++pos_;
        skip_space();
        attr.value = read_attribute_value();
      }
      t.attributes.push_back(std::move(attr));
    }
    std::string name = t.data;
    tokens_.push_back(std::move(t));
    if (name == "script" || name == "style") read_raw_text(name);
  }

  std::string read_attribute_value() {
    if (pos_ >= doc_.size()) return {};
    char q = doc_[pos_];
    if (q == '"' || q == '\'') {
      std::size_t end = doc_.find(q, pos_ + 1);
      if (end == std::string_view::npos) end = doc_.size();
      std::string v = decode_entities(doc_.substr(pos_ + 1, end - pos_ - 1));
      pos_ = std::min(end + 1, doc_.size());
      return v;
    }
    std::size_t begin = pos_;
    while (pos_ < doc_.size() && !is_ascii_space(doc_[pos_]) && doc_[pos_] != '>') ++pos_;
    return decode_entities(doc_.substr(begin, pos_ - begin));
  }

  void read_raw_text(const std::string& name) {
    std::string closer = "</" + name;
    std::size_t end = find_ci(doc_, pos_, closer);
    if (end == std::string_view::npos) end = doc_.size();
    if (end > pos_) {
      Token t;
      t.kind = Token::Kind::Text;
      t.raw_text = true;
      t.data = std::string(doc_.substr(pos_, end - pos_));
      tokens_.push_back(std::move(t));
    }
    pos_ = end;
  }

  std::string_view doc_;
  std::size_t pos_ = 0;
  std::vector<Token> tokens_;
};

}  // namespace

std::vector<Token> tokenize(std::string_view document) { return Tokenizer(document).run(); }

const Attribute* Token::attribute(std::string_view name) const noexcept {
  for (const auto& a : attributes) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

bool is_ascii_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f';
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string decode_entities(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] != '&') {
      out.push_back(text[i++]);
      continue;
    }
    std::size_t semi = text.find(';', i + 1);
    if (semi == std::string_view::npos || semi - i > 12) {
      out.push_back(text[i++]);
      continue;
    }
    std::string_view ref = text.substr(i + 1, semi - i - 1);
    bool decoded = false;
    if (!ref.empty() && ref[0] == '#') {
      std::uint32_t cp = 0;
      bool hex = ref.size() > 1 && (ref[1] == 'x' || ref[1] == 'X');
      std::string_view digits = ref.substr(hex ? 2 : 1);
      bool ok = !digits.empty();
      for (char c : digits) {
        int d = -1;
        if (c >= '0' && c <= '9') d = c - '0';
        else if (hex && c >= 'a' && c <= 'f') d = c - 'a' + 10;
        else if (hex && c >= 'A' && c <= 'F') d = c - 'A' + 10;
        if (d < 0 || cp > 0x10FFFF) {
          ok = false;
          break;
        }
        cp = cp * (hex ? 16 : 10) + static_cast<std::uint32_t>(d);
      }
      if (ok) {
        append_utf8(out, cp);
        decoded = true;
      }
    } else {
      for (const auto& [name, cp] : kNamedEntities) {
        if (ref == name) {
          append_utf8(out, cp);
          decoded = true;
          break;
        }
      }
    }
    if (decoded) {
      i = semi + 1;
    } else {
      out.push_back(text[i++]);
    }
  }
  return out;
}

}  // namespace pt::html
