#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <ctime>

#include <json.hpp>

#include "pt/error.hpp"
#include "pt/file_io.hpp"
#include "pt/http.hpp"
#include "pt/url.hpp"

namespace pt {
namespace detail {

class HttpHost {
 public:
  HttpHost(const std::filesystem::path& cert, const std::filesystem::path& key) {
    if (cert.empty()) {
      server = std::make_unique<httplib::Server>();
    } else {
      auto tls = std::make_unique<httplib::SSLServer>(cert.c_str(), key.c_str());
      if (!tls->is_valid()) {
        throw Error(ErrorCode::ConfigError, "cannot load TLS certificate " + cert.string());
      }
      server = std::move(tls);
    }
    server->set_payload_max_length(32u << 20);
  }

  std::unique_ptr<httplib::Server> server;
};

}  // namespace detail

namespace {

using nlohmann::json;

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadRequest:
    case ErrorCode::MalformedHeader:
    case ErrorCode::InvalidImage:
    case ErrorCode::DegenerateImage:
    case ErrorCode::InvalidSpec:
    case ErrorCode::TimestampOverflow:
    case ErrorCode::InvalidKey:
      return 400;
    case ErrorCode::ChallengeExpired:
    case ErrorCode::ChallengeInvalid:
      return 401;
    case ErrorCode::CertificateInvalid:
    case ErrorCode::DomainMismatch:
      return 403;
    case ErrorCode::SimilarityConflict:
      return 409;
    case ErrorCode::ScreenshotUnavailable:
      return 422;
    case ErrorCode::RateLimited:
      return 429;
    case ErrorCode::NetworkError:
      return 502;
    default:
      return 500;
  }
}

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& message) {
  send_json(res, {{"error", to_string(code)}, {"message", message}}, http_status(code));
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

Handler guarded(Handler fn) {
  return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const Error& e) {
      send_error(res, e.code(), e.detail());
    } catch (const json::exception& e) {
      send_error(res, ErrorCode::BadRequest, e.what());
    } catch (const std::exception& e) {
      send_error(res, ErrorCode::Internal, e.what());
    }
  };
}

std::string field(const httplib::Request& req, const std::string& name, bool required = true) {
  if (req.has_file(name)) return req.get_file_value(name).content;
  if (req.has_param(name)) return req.get_param_value(name);
  if (required) throw Error(ErrorCode::BadRequest, "missing field '" + name + "'");
  return {};
}

Bytes base64_field(const httplib::Request& req, const std::string& name) {
  auto decoded = base64_decode(field(req, name));
  if (!decoded) throw Error(ErrorCode::BadRequest, "field '" + name + "' is not base64");
  return std::move(*decoded);
}

Bytes to_bytes(const std::string& s) { return Bytes(s.begin(), s.end()); }

json verdict_json(const FallbackVerdict& v) {
  json j = {{"phishing", v.phishing},
            {"matched_domain", nullptr},
            {"distance", std::isfinite(v.distance) ? json(v.distance) : json(nullptr)},
            {"threshold", v.threshold}};
  if (v.matched_domain) j["matched_domain"] = *v.matched_domain;
  return j;
}

FallbackVerdict verdict_from_json(const json& j) {
  FallbackVerdict v;
  v.phishing = j.at("phishing").get<bool>();
  if (j.contains("matched_domain") && !j["matched_domain"].is_null()) {
    v.matched_domain = j["matched_domain"].get<std::string>();
  }
  v.distance = j.value("distance", json(nullptr)).is_null()
                   ? std::numeric_limits<double>::infinity()
                   : j["distance"].get<double>();
  v.threshold = j.value("threshold", 0.0);
  return v;
}

std::unique_ptr<httplib::Client> make_client(const std::string& origin, int timeout_ms,
                                             const std::filesystem::path& ca_file) {
  auto cli = std::make_unique<httplib::Client>(origin);
  if (!cli->is_valid()) throw Error(ErrorCode::NetworkError, "unusable endpoint '" + origin + "'");
  auto t = std::chrono::milliseconds(timeout_ms);
  cli->set_connection_timeout(t);
  cli->set_read_timeout(t);
  cli->set_write_timeout(t);
  cli->set_follow_location(false);
  if (!ca_file.empty()) cli->set_ca_cert_path(ca_file.string());
  return cli;
}

std::string origin_of(const std::string& url) {
  auto parsed = Url::parse(url);
  if (!parsed) throw Error(ErrorCode::ConfigError, "not an absolute http(s) URL: '" + url + "'");
  return parsed->origin();
}

// Turns a failed call or an error body into an exception; returns the body on success.
std::string expect_ok(const httplib::Result& res, const std::string& what) {
  if (!res) {
    throw Error(ErrorCode::NetworkError, what + ": " + httplib::to_string(res.error()));
  }
  if (res->status == 200) return res->body;
  try {
    auto j = json::parse(res->body);
    if (auto code = error_code_from_string(j.at("error").get<std::string>())) {
      throw Error(*code, j.value("message", std::string()));
    }
  } catch (const json::exception&) {
  }
  throw Error(ErrorCode::NetworkError, what + ": HTTP " + std::to_string(res->status));
}

std::string content_type_for(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  if (ext == ".html" || ext == ".htm") return "text/html; charset=utf-8";
  if (ext == ".png") return "image/png";
  if (ext == ".css") return "text/css";
  if (ext == ".js") return "text/javascript";
  if (ext == ".json") return "application/json";
  if (ext == ".txt" || ext == ".spt") return "text/plain";
  return "application/octet-stream";
}

std::string trim(std::string s) {
  auto b = s.find_first_not_of(" \t\r\n");
  auto e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

class HttpRenderer final : public PageRenderer {
 public:
  HttpRenderer(std::string endpoint, int timeout_ms)
      : endpoint_(std::move(endpoint)), timeout_ms_(timeout_ms) {}

  Image render(std::string_view url, std::string_view html) override {
    auto parsed = Url::parse(endpoint_);
    if (!parsed) throw Error(ErrorCode::ConfigError, "bad renderer endpoint '" + endpoint_ + "'");
    auto cli = make_client(parsed->origin(), timeout_ms_, {});
    json body = {{"url", url}, {"html", html}};
    auto res = cli->Post(parsed->target, body.dump(), "application/json");
    if (!res || res->status != 200) {
      throw Error(ErrorCode::ScreenshotUnavailable,
                  "renderer " + endpoint_ + " failed: " +
                      (res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error())));
    }
    return decode_png(as_bytes(res->body));
  }

 private:
  std::string endpoint_;
  int timeout_ms_;
};

}  // namespace

std::unique_ptr<PageRenderer> make_http_renderer(const std::string& endpoint, int timeout_ms) {
  return std::make_unique<HttpRenderer>(endpoint, timeout_ms);
}

// ---------------------------------------------------------------------------
// Service lifecycle

HttpService::HttpService(const std::filesystem::path& tls_cert, const std::filesystem::path& tls_key)
    : host_(std::make_unique<detail::HttpHost>(tls_cert, tls_key)) {}

HttpService::~HttpService() = default;

int HttpService::bind(const std::string& host, int port) {
  auto& svr = *host_->server;
  if (port == 0) {
    int bound = svr.bind_to_any_port(host);
    if (bound <= 0) throw Error(ErrorCode::NetworkError, "cannot bind " + host);
    return bound;
  }
  if (!svr.bind_to_port(host, port)) {
    throw Error(ErrorCode::NetworkError, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpService::serve() { host_->server->listen_after_bind(); }

void HttpService::stop() { host_->server->stop(); }

bool HttpService::running() const { return host_->server->is_running(); }

// ---------------------------------------------------------------------------
// Log server

PlsHttpServer::PlsHttpServer(LogServer& server)
    : HttpService(server.config().tls_cert_file, server.config().tls_key_file) {
  auto& svr = *host_->server;

  svr.Post("/register/challenge", guarded([&server](const auto& req, auto& res) {
             auto j = json::parse(req.body);
             auto c = server.issue_challenge(j.at("domain").template get<std::string>());
             send_json(res, {{"nonce", base64_encode(c.nonce)}, {"expires_at", c.expires_at}});
           }));

  svr.Post("/register", guarded([&server](const auto& req, auto& res) {
             RegistrationRequest r;
             r.certificate_pem = field(req, "certificate");
             r.chain_pem = field(req, "chain", false);
             r.domain = field(req, "domain");
             r.url = field(req, "url");
             r.html = field(req, "html");
             r.nonce = base64_field(req, "nonce");
             r.signature = base64_field(req, "signature");
             if (req.has_file("screenshot")) r.screenshot_png = to_bytes(field(req, "screenshot"));
             auto entry = server.register_page(r);
             send_json(res, {{"spt", entry.spt},
                             {"sequence", entry.sequence},
                             {"logged_at", entry.logged_at}});
           }));

  svr.Get("/logs", guarded([&server](const auto&, auto& res) {
            auto logs = server.get_logs();
            res.set_content(trusted_logs_to_json(logs), "application/json");
          }));

  svr.Post("/verify-screenshot", guarded([&server](const auto& req, auto& res) {
             auto url = field(req, "url");
             auto png = field(req, "screenshot");
             auto v = server.verify_fallback(url, as_bytes(png), req.remote_addr);
             send_json(res, verdict_json(v));
           }));

  svr.Get("/audit", guarded([&server](const auto& req, auto& res) {
            auto number = [&](const char* name, std::uint64_t fallback) -> std::uint64_t {
              if (!req.has_param(name)) return fallback;
              try {
                return std::stoull(req.get_param_value(name));
              } catch (const std::exception&) {
                throw Error(ErrorCode::BadRequest, std::string(name) + " must be a number");
              }
            };
            res.set_content(server.audit_json(number("from", 1), number("limit", 0)),
                            "application/json");
          }));

  svr.Post("/verify-spt", guarded([&server](const auto& req, auto& res) {
             auto j = json::parse(req.body);
             auto status = server.check(j.at("spt").template get<std::string>(),
                                        j.at("url").template get<std::string>(),
                                        j.at("html").template get<std::string>());
             send_json(res, {{"verified", status == SptStatus::Verified},
                             {"status", to_string(status)}});
           }));
}

// ---------------------------------------------------------------------------
// Log server client

HttpPlsClient::HttpPlsClient(std::string base_url, Options options)
    : base_url_(origin_of(base_url)), options_(std::move(options)) {}

Challenge HttpPlsClient::challenge(std::string_view domain) {
  auto cli = make_client(base_url_, options_.timeout_ms, options_.ca_file);
  json body = {{"domain", domain}};
  auto j = json::parse(expect_ok(cli->Post("/register/challenge", body.dump(), "application/json"),
                                 "challenge"));
  auto nonce = base64_decode(j.at("nonce").get<std::string>());
  if (!nonce) throw Error(ErrorCode::NetworkError, "server sent a malformed nonce");
  return {std::move(*nonce), j.at("expires_at").get<std::int64_t>()};
}

std::string HttpPlsClient::register_page(const RegistrationRequest& r) {
  auto cli = make_client(base_url_, options_.timeout_ms, options_.ca_file);
  httplib::MultipartFormDataItems items = {
      {"certificate", r.certificate_pem, "", "application/x-pem-file"},
      {"domain", r.domain, "", ""},
      {"url", r.url, "", ""},
      {"html", r.html, "", "text/html"},
      {"nonce", base64_encode(r.nonce), "", ""},
      {"signature", base64_encode(r.signature), "", ""},
  };
  if (!r.chain_pem.empty()) items.push_back({"chain", r.chain_pem, "", "application/x-pem-file"});
  if (r.screenshot_png) {
    items.push_back({"screenshot", std::string(r.screenshot_png->begin(), r.screenshot_png->end()),
                     "screenshot.png", "image/png"});
  }
  auto j = json::parse(expect_ok(cli->Post("/register", items), "register"));
  return j.at("spt").get<std::string>();
}

std::vector<LogIdentity> HttpPlsClient::get_logs() {
  auto cli = make_client(base_url_, options_.timeout_ms, options_.ca_file);
  return trusted_logs_from_json(expect_ok(cli->Get("/logs"), "logs"));
}

FallbackVerdict HttpPlsClient::verify_screenshot(std::string_view url, ByteView png) {
  auto cli = make_client(base_url_, options_.timeout_ms, options_.ca_file);
  httplib::MultipartFormDataItems items = {
      {"url", std::string(url), "", ""},
      {"screenshot", std::string(png.begin(), png.end()), "screenshot.png", "image/png"},
  };
  return verdict_from_json(json::parse(expect_ok(cli->Post("/verify-screenshot", items),
                                                 "verify-screenshot")));
}

std::string HttpPlsClient::audit(std::uint64_t from) {
  auto cli = make_client(base_url_, options_.timeout_ms, options_.ca_file);
  return expect_ok(cli->Get("/audit?from=" + std::to_string(from)), "audit");
}

// ---------------------------------------------------------------------------
// Page fetching

FetchedPage fetch_page(const std::string& url, const FetchOptions& options) {
  std::string current = url;
  for (int hop = 0;; ++hop) {
    auto parsed = Url::parse(current);
    if (!parsed) throw Error(ErrorCode::NetworkError, "not an absolute http(s) URL: '" + current + "'");
    auto cli = make_client(parsed->origin(), options.timeout_ms, options.ca_file);
    auto res = cli->Get(parsed->target);
    if (!res) {
      throw Error(ErrorCode::NetworkError, current + ": " + httplib::to_string(res.error()));
    }
    bool redirect = res->status == 301 || res->status == 302 || res->status == 303 ||
                    res->status == 307 || res->status == 308;
    if (redirect && res->has_header("Location")) {
      if (hop >= options.max_redirects) {
        throw Error(ErrorCode::NetworkError, "too many redirects from " + url);
      }
      std::string location = res->get_header_value("Location");
      if (Url::parse(location)) {
        current = location;
      } else if (!location.empty() && location.front() == '/') {
        current = parsed->origin() + location;
      } else {
        auto dir = parsed->target.substr(0, parsed->target.find('?'));
        current = parsed->origin() + dir.substr(0, dir.rfind('/') + 1) + location;
      }
      continue;
    }
    FetchedPage page;
    page.url = current;
    page.status = res->status;
    page.html = res->body;
    for (const auto& [name, value] : res->headers) page.headers.add(name, value);
    return page;
  }
}

// ---------------------------------------------------------------------------
// Demo origin

DemoMode demo_mode_from_string(std::string_view name) {
  if (name == "normal") return DemoMode::Normal;
  if (name == "strip-header") return DemoMode::StripHeader;
  if (name == "spoofed-header") return DemoMode::SpoofedHeader;
  if (name == "replayed-header") return DemoMode::ReplayedHeader;
  throw Error(ErrorCode::ConfigError, "unknown demo mode '" + std::string(name) + "'");
}

DemoServer::DemoServer(DemoOptions options) : HttpService({}, {}) {
  auto root = std::filesystem::weakly_canonical(options.site_root);
  if (!std::filesystem::is_directory(root)) {
    throw Error(ErrorCode::ConfigError, "site root " + root.string() + " is not a directory");
  }
  std::string replay;
  if (options.mode == DemoMode::ReplayedHeader) {
    if (options.replay_spt.empty()) {
      throw Error(ErrorCode::ConfigError, "replayed-header mode needs an SPT file to replay");
    }
    replay = trim(read_file(options.replay_spt));
  }
  auto forger = std::make_shared<SigningKey>(SigningKey::generate_ed25519());

  host_->server->Get(".*", [root, mode = options.mode, replay, forger](const httplib::Request& req,
                                                                     httplib::Response& res) {
    std::filesystem::path rel = std::filesystem::path(req.path).relative_path();
    for (const auto& part : rel) {
      if (part == "..") {
        res.status = 403;
        return;
      }
    }
    auto path = root / rel;
    if (std::filesystem::is_directory(path)) {
      if (!req.path.ends_with('/')) {
        res.set_redirect(req.path + "/", 301);
        return;
      }
      path /= "index.html";
    }
    if (!std::filesystem::is_regular_file(path)) {
      res.status = 404;
      res.set_content("not found", "text/plain");
      return;
    }
    std::string body = read_file(path);
    auto type = content_type_for(path);
    if (type.starts_with("text/html")) {
      auto spt_file = spt_path_for(path);
      std::string header;
      switch (mode) {
        case DemoMode::Normal:
          if (std::filesystem::exists(spt_file)) header = trim(read_file(spt_file));
          break;
        case DemoMode::StripHeader:
          break;
        case DemoMode::SpoofedHeader: {
          std::string url = "http://" + req.get_header_value("Host") + req.target;
          header = create_spt(url, body, *forger, std::time(nullptr));
          break;
        }
        case DemoMode::ReplayedHeader:
          header = replay;
          break;
      }
      if (!header.empty()) res.set_header(std::string(kSptHeaderName), header);
    }
    res.set_content(std::move(body), type);
  });
}

// ---------------------------------------------------------------------------
// Local verification endpoint

GateHttpServer::GateHttpServer(Handler handler) : HttpService({}, {}) {
  host_->server->Post("/gate", guarded([handler](const auto& req, auto& res) {
                        auto j = json::parse(req.body);
                        FetchedPage page;
                        page.url = j.at("url").template get<std::string>();
                        page.status = j.value("status", 200);
                        page.html = j.at("html").template get<std::string>();
                        if (j.contains("headers")) {
                          const auto& h = j["headers"];
                          if (h.is_object()) {
                            for (auto& [k, v] : h.items()) {
                              page.headers.add(k, v.template get<std::string>());
                            }
                          } else {
                            for (const auto& pair : h) {
                              page.headers.add(pair.at(0).template get<std::string>(),
                                               pair.at(1).template get<std::string>());
                            }
                          }
                        }
                        if (j.contains("screenshot") && !j["screenshot"].is_null()) {
                          auto png = base64_decode(j["screenshot"].template get<std::string>());
                          if (!png) throw Error(ErrorCode::BadRequest, "screenshot is not base64");
                          page.screenshot_png = std::move(*png);
                        }
                        auto decision = handler(page);
                        res.status = 200;
                        res.set_content(decision.to_json(), "application/json");
                      }));
}

}  // namespace pt
