#pragma once

// Minimal absolute http(s) URL splitting.

#include <optional>
#include <string>
#include <string_view>

namespace pt {

struct Url {
  std::string scheme;  // lowercase
  std::string host;    // lowercase, brackets stripped from IPv6 literals
  int port = 0;        // explicit or scheme default
  std::string target;  // path + query, at least "/"

  /// Returns nullopt for anything but absolute http/https URLs.
  static std::optional<Url> parse(std::string_view text);

  /// scheme://host[:port] with the port omitted when it is the default.
  std::string origin() const;
};

/// Lowercased host of an absolute URL, or an empty string.
std::string url_host(std::string_view url);

}  // namespace pt
