#include "pt/spt.hpp"

#include <algorithm>
#include <json.hpp>

#include "pt/error.hpp"
#include "pt/html.hpp"

namespace pt {
namespace {

bool is_lower_hex64(std::string_view s) {
  return s.size() == 64 && std::all_of(s.begin(), s.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

void collapse_into(std::string& out, std::string_view text) {
  bool pending_space = false;
  std::size_t start = out.size();
  for (char c : text) {
    if (html::is_ascii_space(c)) {
      pending_space = out.size() > start;
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
}

}  // namespace

SptBytes encode_spt_bytes(const SptHeader& header) {
  SptBytes out{};
  out[0] = header.version;
  out[1] = static_cast<std::uint8_t>(header.timestamp >> 24);
  out[2] = static_cast<std::uint8_t>(header.timestamp >> 16);
  out[3] = static_cast<std::uint8_t>(header.timestamp >> 8);
  out[4] = static_cast<std::uint8_t>(header.timestamp);
  std::copy(header.log_id.begin(), header.log_id.end(), out.begin() + 5);
  std::copy(header.signature.begin(), header.signature.end(), out.begin() + 37);
  return out;
}

std::string encode_spt(const SptHeader& header) { return base64_encode(encode_spt_bytes(header)); }

SptHeader decode_spt_bytes(ByteView decoded) {
  if (decoded.size() != kSptHeaderSize) {
    throw Error(ErrorCode::MalformedHeader,
                "decoded SPT is " + std::to_string(decoded.size()) + " bytes, expected 101");
  }
  SptHeader h;
  h.version = decoded[0];
  h.timestamp = (std::uint32_t{decoded[1]} << 24) | (std::uint32_t{decoded[2]} << 16) |
                (std::uint32_t{decoded[3]} << 8) | std::uint32_t{decoded[4]};
  std::copy(decoded.begin() + 5, decoded.begin() + 37, h.log_id.begin());
  std::copy(decoded.begin() + 37, decoded.end(), h.signature.begin());
  return h;
}

SptHeader decode_spt(std::string_view header_base64) {
  auto bytes = base64_decode(header_base64);
  if (!bytes) throw Error(ErrorCode::MalformedHeader, "SPT header is not valid base64");
  return decode_spt_bytes(*bytes);
}

std::array<std::uint8_t, kSignedRecordSize> SignedRecord::pack() const {
  if (!is_lower_hex64(url_hash) || !is_lower_hex64(content_hash)) {
    throw Error(ErrorCode::MalformedHeader, "record hashes must be 64 lowercase hex characters");
  }
  std::array<std::uint8_t, kSignedRecordSize> out{};
  out[0] = version;
  out[1] = static_cast<std::uint8_t>(timestamp >> 24);
  out[2] = static_cast<std::uint8_t>(timestamp >> 16);
  out[3] = static_cast<std::uint8_t>(timestamp >> 8);
  out[4] = static_cast<std::uint8_t>(timestamp);
  std::copy(url_hash.begin(), url_hash.end(), out.begin() + 5);
  std::copy(content_hash.begin(), content_hash.end(), out.begin() + 69);
  return out;
}

std::string canonical_text(std::string_view html_doc) {
  std::string out;
  for (const auto& tok : html::tokenize(html_doc)) {
    if (tok.kind != html::Token::Kind::Text || tok.raw_text) continue;
    std::string node;
    collapse_into(node, tok.data);
    if (node.empty()) continue;
    if (!out.empty()) out.push_back('\n');
    out += node;
  }
  return out;
}

std::string url_hash(std::string_view url) { return to_hex(sha256(url)); }

std::string content_hash(std::string_view html_doc, ContentHashMode mode) {
  if (mode == ContentHashMode::RawHtml) return to_hex(sha256(html_doc));
  return to_hex(sha256(canonical_text(html_doc)));
}

LogId derive_log_id(const VerifyKey& key) { return sha256(key.der()); }

std::string trusted_logs_to_json(std::span<const LogIdentity> logs) {
  auto arr = nlohmann::json::array();
  for (const auto& log : logs) {
    arr.push_back({{"log_id", log.log_id_base64()}, {"pub_key", log.public_key.pem()}});
  }
  return arr.dump(2);
}

std::vector<LogIdentity> trusted_logs_from_json(std::string_view json) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("trusted-log list: ") + e.what());
  }
  if (!doc.is_array()) throw Error(ErrorCode::ConfigError, "trusted-log list must be an array");
  std::vector<LogIdentity> out;
  for (const auto& item : doc) {
    if (!item.is_object() || !item.contains("log_id") || !item.contains("pub_key") ||
        !item["log_id"].is_string() || !item["pub_key"].is_string()) {
      throw Error(ErrorCode::ConfigError, "trusted-log entry needs string log_id and pub_key");
    }
    VerifyKey key = [&] {
      try {
        return VerifyKey::from_pem(item["pub_key"].get<std::string>());
      } catch (const Error& e) {
        throw Error(ErrorCode::ConfigError, e.what());
      }
    }();
    LogIdentity identity = LogIdentity::from_key(key);
    if (identity.log_id_base64() != item["log_id"].get<std::string>()) {
      throw Error(ErrorCode::ConfigError,
                  "log_id " + item["log_id"].get<std::string>() + " does not match its pub_key");
    }
    out.push_back(std::move(identity));
  }
  return out;
}

std::string create_spt_from_hashes(const std::string& url_hash_hex,
                                   const std::string& content_hash_hex, const SigningKey& log_key,
                                   std::int64_t now) {
  if (now < 0 || now > 0xFFFFFFFFLL) {
    throw Error(ErrorCode::TimestampOverflow, std::to_string(now) + " does not fit in 32 bits");
  }
  SignedRecord record{kSptVersion, static_cast<std::uint32_t>(now), url_hash_hex,
                      content_hash_hex};
  auto digest = sha256(record.pack());
  Bytes sig = log_key.sign(digest);
  if (sig.size() != 64) {
    throw Error(ErrorCode::InvalidKey, "log key must produce 64-byte signatures (Ed25519)");
  }
  SptHeader header;
  header.version = record.version;
  header.timestamp = record.timestamp;
  header.log_id = derive_log_id(log_key.public_key());
  std::copy(sig.begin(), sig.end(), header.signature.begin());
  return encode_spt(header);
}

std::string create_spt(std::string_view url, std::string_view html_doc, const SigningKey& log_key,
                       std::int64_t now, ContentHashMode mode) {
  return create_spt_from_hashes(url_hash(url), content_hash(html_doc, mode), log_key, now);
}

std::string_view to_string(SptStatus status) noexcept {
  switch (status) {
    case SptStatus::Verified: return "verified";
    case SptStatus::Malformed: return "malformed";
    case SptStatus::UnknownLog: return "unknown_log";
    case SptStatus::BadSignature: return "bad_signature";
  }
  return "malformed";
}

SptStatus check_spt_hashes(std::string_view header_base64, const std::string& url_hash_hex,
                           const std::string& content_hash_hex,
                           std::span<const LogIdentity> trusted_logs) {
  SptHeader header;
  try {
    header = decode_spt(header_base64);
  } catch (const Error&) {
    return SptStatus::Malformed;
  }
  auto it = std::find_if(trusted_logs.begin(), trusted_logs.end(),
                         [&](const LogIdentity& log) { return log.log_id == header.log_id; });
  if (it == trusted_logs.end()) return SptStatus::UnknownLog;

  SignedRecord record{header.version, header.timestamp, url_hash_hex, content_hash_hex};
  Sha256Digest digest;
  try {
    digest = sha256(record.pack());
  } catch (const Error&) {
    return SptStatus::BadSignature;
  }
  return it->public_key.verify(digest, header.signature) ? SptStatus::Verified
                                                         : SptStatus::BadSignature;
}

SptStatus check_spt(std::string_view header_base64, std::string_view url, std::string_view html_doc,
                    std::span<const LogIdentity> trusted_logs, ContentHashMode mode) {
  return check_spt_hashes(header_base64, url_hash(url), content_hash(html_doc, mode),
                          trusted_logs);
}

bool verify_spt(std::string_view header_base64, std::string_view url, std::string_view html_doc,
                std::span<const LogIdentity> trusted_logs, ContentHashMode mode) {
  return check_spt(header_base64, url, html_doc, trusted_logs, mode) == SptStatus::Verified;
}

}  // namespace pt
