#pragma once

// Forgiving HTML tokenizer. It does not build a tree; callers walk the flat
// token stream in document order.

#include <string>
#include <string_view>
#include <vector>

namespace pt::html {

struct Attribute {
  std::string name;   // lowercased
  std::string value;  // entity-decoded; empty for bare attributes
};

struct Token {
  enum class Kind { Text, StartTag, EndTag, Comment, Declaration };

  Kind kind = Kind::Text;
  /// Tag name (lowercased) for tags, decoded text for Text, body for Comment/Declaration.
  std::string data;
  std::vector<Attribute> attributes;
  bool self_closing = false;
  /// Text inside <script> or <style>; never visible content.
  bool raw_text = false;

  /// First attribute named `name` (lowercase), or nullptr.
  const Attribute* attribute(std::string_view name) const noexcept;
};

std::vector<Token> tokenize(std::string_view document);

/// Decodes character references (&amp; &#39; &#x41; ...). Unknown references are kept verbatim.
std::string decode_entities(std::string_view text);

bool is_ascii_space(char c) noexcept;
std::string ascii_lower(std::string_view s);

}  // namespace pt::html
