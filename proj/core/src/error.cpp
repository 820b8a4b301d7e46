#include "pt/error.hpp"

#include <array>
#include <utility>

namespace pt {
namespace {

constexpr std::array<std::pair<ErrorCode, std::string_view>, 19> kNames{{
    {ErrorCode::MalformedHeader, "MalformedHeader"},
    {ErrorCode::TimestampOverflow, "TimestampOverflow"},
    {ErrorCode::InvalidKey, "InvalidKey"},
    {ErrorCode::DegenerateImage, "DegenerateImage"},
    {ErrorCode::InvalidImage, "InvalidImage"},
    {ErrorCode::EmbedderMismatch, "EmbedderMismatch"},
    {ErrorCode::InvalidSpec, "InvalidSpec"},
    {ErrorCode::InsufficientCorpus, "InsufficientCorpus"},
    {ErrorCode::RateLimited, "RateLimited"},
    {ErrorCode::ChallengeExpired, "ChallengeExpired"},
    {ErrorCode::ChallengeInvalid, "ChallengeInvalid"},
    {ErrorCode::CertificateInvalid, "CertificateInvalid"},
    {ErrorCode::DomainMismatch, "DomainMismatch"},
    {ErrorCode::SimilarityConflict, "SimilarityConflict"},
    {ErrorCode::ScreenshotUnavailable, "ScreenshotUnavailable"},
    {ErrorCode::NetworkError, "NetworkError"},
    {ErrorCode::ConfigError, "ConfigError"},
    {ErrorCode::BadRequest, "BadRequest"},
    {ErrorCode::Internal, "Internal"},
}};

}  // namespace

std::string_view to_string(ErrorCode code) noexcept {
  for (const auto& [c, name] : kNames) {
    if (c == code) return name;
  }
  return "Internal";
}

std::optional<ErrorCode> error_code_from_string(std::string_view name) noexcept {
  for (const auto& [c, n] : kNames) {
    if (n == name) return c;
  }
  return std::nullopt;
}

}  // namespace pt
