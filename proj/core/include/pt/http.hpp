#pragma once

// HTTP bindings: the log server API, its client, the demo origin server and the local
// verification endpoint.

#include <filesystem>
#include <functional>
#include <memory>
#include <string>

#include "pt/client_verifier.hpp"
#include "pt/pls_server.hpp"

namespace pt {

namespace detail {
class HttpHost;
}

/// Shared bind/serve/stop lifecycle.
class HttpService {
 public:
  virtual ~HttpService();
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  /// Port 0 picks an ephemeral port. Returns the bound port. Throws Error(NetworkError).
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void serve();
  void stop();
  bool running() const;

 protected:
  HttpService(const std::filesystem::path& tls_cert, const std::filesystem::path& tls_key);
  std::unique_ptr<detail::HttpHost> host_;
};

/// POST /register/challenge, POST /register, GET /logs, POST /verify-screenshot,
/// GET /audit, POST /verify-spt. Errors are {"error": code, "message": text}.
class PlsHttpServer final : public HttpService {
 public:
  explicit PlsHttpServer(LogServer& server);
};

class HttpPlsClient final : public PlsClient {
 public:
  struct Options {
    int timeout_ms = 5000;
    /// CA bundle for https endpoints; empty uses the platform default.
    std::filesystem::path ca_file;
  };

  explicit HttpPlsClient(std::string base_url, Options options);
  explicit HttpPlsClient(std::string base_url) : HttpPlsClient(std::move(base_url), Options{}) {}

  Challenge challenge(std::string_view domain) override;
  std::string register_page(const RegistrationRequest& request) override;
  std::vector<LogIdentity> get_logs() override;
  FallbackVerdict verify_screenshot(std::string_view url, ByteView png) override;
  /// Raw JSON from GET /audit.
  std::string audit(std::uint64_t from);

 private:
  std::string base_url_;
  Options options_;
};

enum class DemoMode { Normal, StripHeader, SpoofedHeader, ReplayedHeader };

/// "normal", "strip-header", "spoofed-header", "replayed-header". Throws Error(ConfigError).
DemoMode demo_mode_from_string(std::string_view name);

struct DemoOptions {
  std::filesystem::path site_root;
  DemoMode mode = DemoMode::Normal;
  /// ReplayedHeader: this SPT is attached to every HTML page in place of its own.
  std::filesystem::path replay_spt;
};

/// Static origin server. HTML pages with a "<page>.spt" file get an SPT-Header in normal mode;
/// the other modes drop it, forge it with a throwaway log key, or replay a fixed one.
class DemoServer final : public HttpService {
 public:
  explicit DemoServer(DemoOptions options);
};

/// POST /gate with {"url", "html", "headers": {name: value}, "screenshot": base64?};
/// answers with the RenderDecision JSON.
class GateHttpServer final : public HttpService {
 public:
  using Handler = std::function<RenderDecision(const FetchedPage&)>;
  explicit GateHttpServer(Handler handler);
};

}  // namespace pt
