#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pt {

enum class ErrorCode {
  MalformedHeader,
  TimestampOverflow,
  InvalidKey,
  DegenerateImage,
  InvalidImage,
  EmbedderMismatch,
  InvalidSpec,
  InsufficientCorpus,
  RateLimited,
  ChallengeExpired,
  ChallengeInvalid,
  CertificateInvalid,
  DomainMismatch,
  SimilarityConflict,
  ScreenshotUnavailable,
  NetworkError,
  ConfigError,
  BadRequest,
  Internal,
};

/// Stable wire name of an error code, e.g. "SimilarityConflict".
std::string_view to_string(ErrorCode code) noexcept;
std::optional<ErrorCode> error_code_from_string(std::string_view name) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace pt
