#pragma once

// Weighted-identifier login page classifier.

#include <string>
#include <string_view>
#include <vector>

namespace pt {

struct DetectionConfig {
  std::vector<std::string> content_keywords = default_content_keywords();
  int content_keyword_weight = 10;
  int content_keyword_cap = 30;
  std::vector<std::string> url_keywords = {"signin", "signup",  "login",
                                           "log-in", "sign-in", "sign-up"};
  int url_weight = 30;
  int submit_weight = 15;
  int input_field_weight = 60;
  int login_threshold = 75;

  static std::vector<std::string> default_content_keywords();

  /// Throws Error(ConfigError) on negative weights or a non-positive threshold.
  void validate() const;
  /// Keys absent from `json` keep their default values.
  static DetectionConfig from_json(std::string_view json);
  std::string to_json() const;
};

enum class IdentifierKind { ContentKeyword, UrlKeyword, SubmitControl, InputField };

std::string_view to_string(IdentifierKind kind) noexcept;

struct Contribution {
  IdentifierKind kind;
  std::string token;
  int weight = 0;

  bool operator==(const Contribution&) const = default;
};

struct DetectionReport {
  int score = 0;
  /// One entry per matched identifier, keyword entries at full weight (before the cap).
  std::vector<Contribution> contributions;
  bool is_login = false;
  int login_threshold = 75;
  int keyword_cap = 30;

  int keyword_total_uncapped() const;
  int keyword_total() const;
  bool keyword_capped() const { return keyword_total_uncapped() > keyword_cap; }
  std::string to_json() const;
};

DetectionReport detect_login(std::string_view html, std::string_view url,
                             const DetectionConfig& config = {});

/// One line per contribution (keywords grouped into one line) followed by the threshold verdict.
std::string explain(const DetectionReport& report);

}  // namespace pt
