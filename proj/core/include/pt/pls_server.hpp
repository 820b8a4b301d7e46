#pragma once

// Public Log Server: certificate-checked page registration with visual admission
// control, SPT issuance, the append-only page log and screenshot fallback checks.
//
// This header is transport independent; pls_http.hpp binds it to HTTP.

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pt/crypto.hpp"
#include "pt/image.hpp"
#include "pt/spt.hpp"
#include "pt/visual.hpp"

namespace pt {

/// Calibrated on the bundled synthetic corpus with the spectral embedder (`ptctl calibrate`).
inline constexpr double kDefaultSiameseThreshold = 0.16169764510020357;
inline constexpr std::string_view kDefaultEmbedder = "spectral";

struct PlsConfig {
  std::string listen_host = "127.0.0.1";
  int port = 8440;
  /// Directory holding entries.jsonl and embeddings.jsonl; empty keeps the log in memory.
  std::filesystem::path data_dir;
  /// PKCS#8 PEM signing key. Empty generates an ephemeral key.
  std::filesystem::path key_file;
  /// PEM bundle of CAs trusted to certify domain owners.
  std::filesystem::path roots_file;
  /// Trusted-log JSON of peer servers, republished by GET /logs.
  std::filesystem::path peers_file;
  std::string embedder = std::string(kDefaultEmbedder);
  double threshold = kDefaultSiameseThreshold;
  ContentHashMode content_mode = ContentHashMode::CanonicalText;
  std::int64_t nonce_ttl_seconds = 300;
  int challenge_limit_per_minute = 100;
  int fallback_limit_per_minute = 600;
  /// External renderer used when a registration carries no screenshot.
  std::string renderer_url;
  int renderer_timeout_ms = 10000;
  std::filesystem::path tls_cert_file;
  std::filesystem::path tls_key_file;
  std::size_t audit_page_size = 100;

  /// Unknown keys are rejected; relative paths resolve against `base_dir`.
  /// Throws Error(ConfigError).
  static PlsConfig from_json(std::string_view json, const std::filesystem::path& base_dir = {});
  /// Reads `path` (if non-empty) and then applies environment overrides.
  static PlsConfig load(const std::filesystem::path& path);
  /// PT_PLS_HOST, PT_PLS_PORT, PT_PLS_DATA_DIR, PT_PLS_KEY, PT_PLS_ROOTS, PT_PLS_PEERS,
  /// PT_PLS_EMBEDDER, PT_PLS_THRESHOLD, PT_PLS_RENDERER, PT_PLS_CHALLENGE_LIMIT,
  /// PT_PLS_FALLBACK_LIMIT.
  void apply_env();
  void validate() const;
  std::string to_json() const;
};

struct LogEntry {
  std::uint64_t sequence = 0;
  std::string domain;
  std::string url;
  std::string url_hash;
  std::string content_hash;
  std::string spt;
  std::int64_t logged_at = 0;
  PageEmbedding embedding;

  /// Everything except the embedding, as one JSON object.
  std::string summary_json() const;
};

/// Append-only entry file plus embedding store. Sequences run 1..N without gaps.
class PageLog {
 public:
  /// Empty `dir` keeps the log in memory.
  explicit PageLog(std::filesystem::path dir = {});

  /// Throws Error(Internal) unless entry.sequence == next_sequence().
  void append(LogEntry entry);
  std::uint64_t next_sequence() const;
  std::size_t size() const;
  /// Entries with sequence >= from, at most `limit` of them (0 = all).
  std::vector<LogEntry> entries(std::uint64_t from = 1, std::size_t limit = 0) const;
  const EmbeddingStore& embeddings() const { return *store_; }

 private:
  std::filesystem::path dir_;
  std::unique_ptr<EmbeddingStore> store_;
  mutable std::shared_mutex mutex_;
  std::vector<LogEntry> entries_;
};

/// Per-key sliding one-minute window.
class RateLimiter {
 public:
  explicit RateLimiter(int limit_per_window, std::int64_t window_seconds = 60)
      : limit_(limit_per_window), window_(window_seconds) {}
  /// Records the event and returns true if it fits the window; a rejected event is not recorded.
  bool allow(const std::string& key, std::int64_t now);

 private:
  int limit_;
  std::int64_t window_;
  std::mutex mutex_;
  std::unordered_map<std::string, std::deque<std::int64_t>> events_;
};

struct Challenge {
  Bytes nonce;  // 32 random bytes
  std::int64_t expires_at = 0;
};

struct RegistrationRequest {
  std::string certificate_pem;
  /// Optional intermediates, PEM bundle.
  std::string chain_pem;
  std::string domain;
  std::string url;
  std::string html;
  Bytes nonce;
  /// Signature over the raw nonce bytes by the certificate's key.
  Bytes signature;
  std::optional<Bytes> screenshot_png;
};

struct FallbackVerdict {
  bool phishing = false;
  std::optional<std::string> matched_domain;
  double distance = 0.0;
  double threshold = 0.0;
};

class PageRenderer {
 public:
  virtual ~PageRenderer() = default;
  virtual Image render(std::string_view url, std::string_view html) = 0;
};

/// POSTs {"url", "html"} to `endpoint` and expects a PNG body. Defined in pls_http.cpp.
std::unique_ptr<PageRenderer> make_http_renderer(const std::string& endpoint, int timeout_ms);

class LogServer {
 public:
  using Clock = std::function<std::int64_t()>;

  LogServer(SigningKey key, PlsConfig config, std::vector<Certificate> roots,
            std::vector<LogIdentity> peers = {}, std::unique_ptr<PageRenderer> renderer = nullptr,
            Clock clock = {});

  /// Loads key, roots, peers and the persisted log named by `config`.
  static std::unique_ptr<LogServer> from_config(const PlsConfig& config);

  /// Throws Error(RateLimited).
  Challenge issue_challenge(std::string_view domain);

  /// Throws Error(DomainMismatch | CertificateInvalid | ChallengeInvalid | ChallengeExpired |
  /// InvalidImage | DegenerateImage | ScreenshotUnavailable | SimilarityConflict).
  LogEntry register_page(const RegistrationRequest& request);

  /// Appends entries admitted elsewhere (replica bootstrap). Skips challenge, certificate and
  /// similarity checks; sequences are reassigned. Throws Error(EmbedderMismatch).
  void import_entries(std::vector<LogEntry> entries);

  /// Own identity first, then peers.
  std::vector<LogIdentity> get_logs() const;
  const LogIdentity& identity() const { return identity_; }

  /// Throws Error(RateLimited | InvalidImage | DegenerateImage).
  FallbackVerdict verify_fallback(std::string_view url, ByteView screenshot_png,
                                  const std::string& source = "");
  FallbackVerdict verify_fallback(std::string_view url, const Image& screenshot,
                                  const std::string& source = "");

  /// Stable pagination: entries with sequence >= from, at most `limit` (0 = config page size).
  std::vector<LogEntry> audit(std::uint64_t from = 1, std::size_t limit = 0) const;
  /// {"entries": [...], "next": n|null}
  std::string audit_json(std::uint64_t from = 1, std::size_t limit = 0) const;

  /// Checks an SPT against every log this server publishes.
  SptStatus check(std::string_view spt, std::string_view url, std::string_view html) const;

  const PageLog& log() const { return log_; }
  const Embedder& embedder() const { return *embedder_; }
  const PlsConfig& config() const { return config_; }
  std::int64_t now() const { return clock_(); }

 private:
  struct Nonce {
    std::string domain;
    std::int64_t expires_at;
  };

  void consume_nonce(const Bytes& nonce, const std::string& domain, std::int64_t now);
  PageEmbedding embed_png(ByteView png) const;
  FallbackVerdict verify_fallback_unlimited(std::string_view url, const Image& screenshot);

  SigningKey key_;
  LogIdentity identity_;
  PlsConfig config_;
  std::vector<Certificate> roots_;
  std::vector<LogIdentity> peers_;
  std::unique_ptr<PageRenderer> renderer_;
  Clock clock_;
  std::unique_ptr<Embedder> embedder_;
  PageLog log_;

  std::mutex writer_;
  std::mutex nonce_mutex_;
  std::map<Bytes, Nonce> nonces_;
  RateLimiter challenge_limiter_;
  RateLimiter fallback_limiter_;
};

}  // namespace pt
