#pragma once

// Signed Page Timestamps.
//
// Wire layout of the decoded header (101 bytes, base64-encoded on the wire):
//
//   [0:1]    version        (1 byte, always 1)
//   [1:5]    timestamp      (uint32, big-endian, seconds since the epoch)
//   [5:37]   log id         (SHA-256 of the DER SubjectPublicKeyInfo of the log key)
//   [37:101] signature      (Ed25519)
//
// The signature covers SHA-256 of the packed 133-byte record
//   version(1) || timestamp(4, BE) || hex(SHA-256(url))(64) || hex(SHA-256(content))(64)

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pt/crypto.hpp"

namespace pt {

inline constexpr std::uint8_t kSptVersion = 1;
inline constexpr std::size_t kSptHeaderSize = 1 + 4 + 32 + 64;
inline constexpr std::size_t kSignedRecordSize = 1 + 4 + 64 + 64;
inline constexpr std::string_view kSptHeaderName = "SPT-Header";

using LogId = std::array<std::uint8_t, 32>;
using SptSignature = std::array<std::uint8_t, 64>;
using SptBytes = std::array<std::uint8_t, kSptHeaderSize>;

struct SptHeader {
  std::uint8_t version = kSptVersion;
  std::uint32_t timestamp = 0;
  LogId log_id{};
  SptSignature signature{};

  bool operator==(const SptHeader&) const = default;
};

SptBytes encode_spt_bytes(const SptHeader& header);
std::string encode_spt(const SptHeader& header);

/// Throws Error(MalformedHeader) on bad base64 or a decoded length other than 101.
SptHeader decode_spt(std::string_view header_base64);
SptHeader decode_spt_bytes(ByteView decoded);

struct SignedRecord {
  std::uint8_t version = kSptVersion;
  std::uint32_t timestamp = 0;
  std::string url_hash;      // 64 lowercase hex chars
  std::string content_hash;  // 64 lowercase hex chars

  /// Throws Error(MalformedHeader) if either hash is not 64 lowercase hex chars.
  std::array<std::uint8_t, kSignedRecordSize> pack() const;
};

enum class ContentHashMode {
  CanonicalText,  // hash visible text only; attribute/nonce churn does not invalidate an SPT
  RawHtml,        // hash the served bytes
};

/// Text nodes in document order, whitespace-collapsed, trimmed, empty ones dropped,
/// joined with '\n'. Script and style bodies are excluded.
std::string canonical_text(std::string_view html);

std::string url_hash(std::string_view url);
std::string content_hash(std::string_view html, ContentHashMode mode = ContentHashMode::CanonicalText);

LogId derive_log_id(const VerifyKey& key);

struct LogIdentity {
  LogId log_id{};
  VerifyKey public_key;

  static LogIdentity from_key(const VerifyKey& key) { return {derive_log_id(key), key}; }
  std::string log_id_base64() const { return base64_encode(log_id); }
};

/// JSON array of {"log_id": base64, "pub_key": PEM}.
std::string trusted_logs_to_json(std::span<const LogIdentity> logs);
/// Throws Error(ConfigError) on malformed input or a log_id that does not hash the key.
std::vector<LogIdentity> trusted_logs_from_json(std::string_view json);

/// Throws Error(TimestampOverflow) unless 0 <= now < 2^32.
std::string create_spt(std::string_view url, std::string_view html, const SigningKey& log_key,
                       std::int64_t now, ContentHashMode mode = ContentHashMode::CanonicalText);
std::string create_spt_from_hashes(const std::string& url_hash, const std::string& content_hash,
                                   const SigningKey& log_key, std::int64_t now);

enum class SptStatus { Verified, Malformed, UnknownLog, BadSignature };

std::string_view to_string(SptStatus status) noexcept;

SptStatus check_spt(std::string_view header_base64, std::string_view url, std::string_view html,
                    std::span<const LogIdentity> trusted_logs,
                    ContentHashMode mode = ContentHashMode::CanonicalText);
SptStatus check_spt_hashes(std::string_view header_base64, const std::string& url_hash,
                           const std::string& content_hash,
                           std::span<const LogIdentity> trusted_logs);

/// True iff the header names a trusted log and its signature covers (url, html). Never throws
/// for bad input.
bool verify_spt(std::string_view header_base64, std::string_view url, std::string_view html,
                std::span<const LogIdentity> trusted_logs,
                ContentHashMode mode = ContentHashMode::CanonicalText);

}  // namespace pt
