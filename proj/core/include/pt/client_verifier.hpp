#pragma once

// Client-side render gate and domain-owner tooling.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pt/crypto.hpp"
#include "pt/login_detector.hpp"
#include "pt/pls_server.hpp"
#include "pt/spt.hpp"

namespace pt {

/// Case-insensitive header multimap preserving arrival order.
class HeaderMap {
 public:
  void add(std::string name, std::string value);
  /// First value for `name`, if any.
  std::optional<std::string> get(std::string_view name) const;
  std::vector<std::string> get_all(std::string_view name) const;
  const std::vector<std::pair<std::string, std::string>>& items() const { return items_; }

 private:
  std::vector<std::pair<std::string, std::string>> items_;
};

struct FetchedPage {
  std::string url;  // final URL after redirects
  int status = 0;
  HeaderMap headers;
  std::string html;
  std::optional<Bytes> screenshot_png;
};

enum class RenderAction { Render, Block };

enum class RenderReason {
  NotLogin,
  SptVerified,
  NoSptHeader,
  UnknownLogId,
  FallbackPhishing,
  FallbackSafe,
  FallbackUnreachable,
};

std::string_view to_string(RenderAction action) noexcept;
/// Upper snake case, e.g. "SPT_VERIFIED".
std::string_view to_string(RenderReason reason) noexcept;

struct RenderDecision {
  RenderAction action = RenderAction::Block;
  RenderReason reason = RenderReason::NoSptHeader;
  std::string detail;
  std::optional<DetectionReport> detection;
  std::optional<FallbackVerdict> fallback;

  std::string to_json() const;
};

/// The registration and verification calls a client makes to a log server.
class PlsClient {
 public:
  virtual ~PlsClient() = default;
  virtual Challenge challenge(std::string_view domain) = 0;
  /// Returns the issued SPT. Server rejections surface as Error with the server's code.
  virtual std::string register_page(const RegistrationRequest& request) = 0;
  virtual std::vector<LogIdentity> get_logs() = 0;
  virtual FallbackVerdict verify_screenshot(std::string_view url, ByteView png) = 0;
};

/// Calls an in-process LogServer directly.
class LocalPlsClient final : public PlsClient {
 public:
  explicit LocalPlsClient(LogServer& server, std::string source = "local")
      : server_(server), source_(std::move(source)) {}

  Challenge challenge(std::string_view domain) override;
  std::string register_page(const RegistrationRequest& request) override;
  std::vector<LogIdentity> get_logs() override;
  FallbackVerdict verify_screenshot(std::string_view url, ByteView png) override;

 private:
  LogServer& server_;
  std::string source_;
};

class ScreenshotCapturer {
 public:
  virtual ~ScreenshotCapturer() = default;
  /// Throws Error(ScreenshotUnavailable) when no screenshot can be produced.
  virtual Bytes capture(const FetchedPage& page) = 0;
};

/// Returns a fixed PNG file regardless of the page.
class FixtureCapturer final : public ScreenshotCapturer {
 public:
  explicit FixtureCapturer(std::filesystem::path png) : png_(std::move(png)) {}
  Bytes capture(const FetchedPage& page) override;

 private:
  std::filesystem::path png_;
};

/// Delegates to an external renderer via make_http_renderer.
class RendererCapturer final : public ScreenshotCapturer {
 public:
  explicit RendererCapturer(std::unique_ptr<PageRenderer> renderer)
      : renderer_(std::move(renderer)) {}
  Bytes capture(const FetchedPage& page) override;

 private:
  std::unique_ptr<PageRenderer> renderer_;
};

/// Trusted-log list persisted to a JSON file and refreshed from a PLS after `ttl`.
/// Concurrent callers share one refresh.
class TrustedLogCache {
 public:
  using Clock = std::function<std::int64_t()>;

  TrustedLogCache(std::filesystem::path file, std::int64_t ttl_seconds, Clock clock = {});

  /// Cached list when fresh; otherwise fetches from `client`, stores and returns it. A failed
  /// refresh falls back to a stale cached list and rethrows when nothing is cached.
  std::vector<LogIdentity> get(PlsClient& client);
  /// Loads the cached file without refreshing. Empty when absent.
  std::vector<LogIdentity> cached() const;

 private:
  std::filesystem::path file_;
  std::int64_t ttl_;
  Clock clock_;
  std::mutex mutex_;
};

struct GateConfig {
  DetectionConfig detection;
  ContentHashMode content_mode = ContentHashMode::CanonicalText;
  /// Block login pages whose fallback check cannot be completed.
  bool fail_closed = true;
};

/// Client settings: file first, then PT_PLS_URL, PT_TIMEOUT_MS, PT_TRUSTED_LOGS,
/// PT_LOGS_CACHE, PT_LOGS_TTL, PT_FAIL_CLOSED, PT_LOGIN_THRESHOLD.
struct ClientConfig {
  std::string pls_url;
  int timeout_ms = 5000;
  /// Static trusted-log list; when empty the list comes from the PLS.
  std::filesystem::path trusted_logs;
  /// Cache file for lists fetched from the PLS; empty keeps them in memory.
  std::filesystem::path logs_cache;
  std::int64_t logs_ttl_seconds = 3600;
  std::filesystem::path ca_file;
  GateConfig gate;

  /// Keys: pls_url, timeout_ms, trusted_logs, logs_cache, logs_ttl_seconds, ca_file,
  /// fail_closed, content_mode, detection (object). Throws Error(ConfigError).
  static ClientConfig from_json(std::string_view json, const std::filesystem::path& base_dir = {});
  static ClientConfig load(const std::filesystem::path& path);
  void apply_env();
};

/// Render-gate pipeline for one fetched page. `capturer` may be null when the page already
/// carries a screenshot.
RenderDecision gate(const FetchedPage& page, std::span<const LogIdentity> trusted_logs,
                    PlsClient& pls, ScreenshotCapturer* capturer, const GateConfig& config = {});

struct FetchOptions {
  int timeout_ms = 5000;
  int max_redirects = 5;
  /// CA bundle for https; empty uses the platform default.
  std::filesystem::path ca_file;
};

/// GET with manual redirect following. Throws Error(NetworkError).
FetchedPage fetch_page(const std::string& url, const FetchOptions& options = {});

struct OwnerCredentials {
  std::string certificate_pem;
  std::string chain_pem;
  SigningKey key;
};

/// Challenge, sign, register; writes the SPT to `spt_path` when given. Rejections propagate.
std::string owner_register(PlsClient& pls, const OwnerCredentials& owner, const std::string& url,
                           const std::string& html, std::optional<Bytes> screenshot_png,
                           const std::filesystem::path& spt_path = {});

/// Path of the SPT file kept beside a page: "<page>.spt".
std::filesystem::path spt_path_for(const std::filesystem::path& page);

}  // namespace pt
