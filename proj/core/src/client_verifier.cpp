#include "pt/client_verifier.hpp"

#include <chrono>
#include <cstdlib>
#include <json.hpp>

#include "pt/error.hpp"
#include "pt/file_io.hpp"
#include "pt/html.hpp"
#include "pt/url.hpp"

namespace pt {
namespace {

using nlohmann::json;

std::int64_t system_now() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

RenderDecision decide(RenderAction action, RenderReason reason, std::string detail) {
  RenderDecision d;
  d.action = action;
  d.reason = reason;
  d.detail = std::move(detail);
  return d;
}

}  // namespace

void HeaderMap::add(std::string name, std::string value) {
  items_.emplace_back(std::move(name), std::move(value));
}

std::optional<std::string> HeaderMap::get(std::string_view name) const {
  auto key = html::ascii_lower(name);
  for (const auto& [n, v] : items_) {
    if (html::ascii_lower(n) == key) return v;
  }
  return std::nullopt;
}

std::vector<std::string> HeaderMap::get_all(std::string_view name) const {
  auto key = html::ascii_lower(name);
  std::vector<std::string> out;
  for (const auto& [n, v] : items_) {
    if (html::ascii_lower(n) == key) out.push_back(v);
  }
  return out;
}

std::string_view to_string(RenderAction action) noexcept {
  return action == RenderAction::Render ? "RENDER" : "BLOCK";
}

std::string_view to_string(RenderReason reason) noexcept {
  switch (reason) {
    case RenderReason::NotLogin: return "NOT_LOGIN";
    case RenderReason::SptVerified: return "SPT_VERIFIED";
    case RenderReason::NoSptHeader: return "NO_SPT_HEADER";
    case RenderReason::UnknownLogId: return "UNKNOWN_LOG_ID";
    case RenderReason::FallbackPhishing: return "FALLBACK_PHISHING";
    case RenderReason::FallbackSafe: return "FALLBACK_SAFE";
    case RenderReason::FallbackUnreachable: return "FALLBACK_UNREACHABLE";
  }
  return "FALLBACK_UNREACHABLE";
}

std::string RenderDecision::to_json() const {
  json j = {{"action", to_string(action)}, {"reason", to_string(reason)}, {"detail", detail}};
  if (detection) {
    j["login_score"] = detection->score;
    j["login_threshold"] = detection->login_threshold;
  }
  if (fallback) {
    j["fallback"] = {{"phishing", fallback->phishing},
                     {"matched_domain", fallback->matched_domain
                                            ? json(*fallback->matched_domain)
                                            : json(nullptr)},
                     {"distance", std::isfinite(fallback->distance) ? json(fallback->distance)
                                                                    : json(nullptr)},
                     {"threshold", fallback->threshold}};
  }
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Clients and capturers

Challenge LocalPlsClient::challenge(std::string_view domain) {
  return server_.issue_challenge(domain);
}

std::string LocalPlsClient::register_page(const RegistrationRequest& request) {
  return server_.register_page(request).spt;
}

std::vector<LogIdentity> LocalPlsClient::get_logs() { return server_.get_logs(); }

FallbackVerdict LocalPlsClient::verify_screenshot(std::string_view url, ByteView png) {
  return server_.verify_fallback(url, png, source_);
}

Bytes FixtureCapturer::capture(const FetchedPage&) {
  try {
    auto data = read_file(png_);
    return Bytes(data.begin(), data.end());
  } catch (const Error& e) {
    throw Error(ErrorCode::ScreenshotUnavailable, e.detail());
  }
}

Bytes RendererCapturer::capture(const FetchedPage& page) {
  try {
    return encode_png(renderer_->render(page.url, page.html));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ScreenshotUnavailable) throw;
    throw Error(ErrorCode::ScreenshotUnavailable, e.detail());
  }
}

// ---------------------------------------------------------------------------
// Trusted-log cache

TrustedLogCache::TrustedLogCache(std::filesystem::path file, std::int64_t ttl_seconds, Clock clock)
    : file_(std::move(file)), ttl_(ttl_seconds), clock_(clock ? std::move(clock) : Clock(system_now)) {}

namespace {

// The cache file is {"fetched_at": t, "logs": [...]}; a bare trusted-log array is accepted
// as a list that is always due for refresh.
std::pair<std::int64_t, std::vector<LogIdentity>> read_cache(const std::filesystem::path& file) {
  if (!std::filesystem::exists(file)) return {0, {}};
  auto j = json::parse(read_file(file), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::ConfigError, file.string() + " is not JSON");
  if (j.is_array()) return {0, trusted_logs_from_json(j.dump())};
  return {j.value("fetched_at", std::int64_t{0}), trusted_logs_from_json(j.at("logs").dump())};
}

}  // namespace

std::vector<LogIdentity> TrustedLogCache::cached() const { return read_cache(file_).second; }

std::vector<LogIdentity> TrustedLogCache::get(PlsClient& client) {
  std::lock_guard lock(mutex_);
  auto [fetched_at, logs] = read_cache(file_);
  std::int64_t now = clock_();
  if (!logs.empty() && now - fetched_at < ttl_) return logs;
  try {
    auto fresh = client.get_logs();
    json j = {{"fetched_at", now}, {"logs", json::parse(trusted_logs_to_json(fresh))}};
    write_file_atomic(file_, j.dump(2) + "\n");
    return fresh;
  } catch (const Error&) {
    if (!logs.empty()) return logs;
    throw;
  }
}

// ---------------------------------------------------------------------------
// Gate

RenderDecision gate(const FetchedPage& page, std::span<const LogIdentity> trusted_logs,
                    PlsClient& pls, ScreenshotCapturer* capturer, const GateConfig& config) {
  auto report = detect_login(page.html, page.url, config.detection);
  auto with_report = [&](RenderDecision d) {
    d.detection = report;
    return d;
  };
  if (!report.is_login) {
    return with_report(decide(RenderAction::Render, RenderReason::NotLogin,
                              "login score " + std::to_string(report.score) + " <= " +
                                  std::to_string(report.login_threshold)));
  }

  auto values = page.headers.get_all(kSptHeaderName);
  if (values.empty()) {
    return with_report(decide(RenderAction::Block, RenderReason::NoSptHeader,
                              "login page served without an SPT-Header"));
  }
  std::string note;
  if (values.size() > 1) {
    note = " (" + std::to_string(values.size()) + " SPT-Header values received; used the first)";
  }

  auto status = check_spt(values.front(), page.url, page.html, trusted_logs, config.content_mode);
  switch (status) {
    case SptStatus::Verified:
      return with_report(decide(RenderAction::Render, RenderReason::SptVerified,
                                "SPT verified against a trusted log" + note));
    case SptStatus::Malformed:
      return with_report(decide(RenderAction::Block, RenderReason::UnknownLogId,
                                "SPT-Header is malformed" + note));
    case SptStatus::UnknownLog:
      return with_report(decide(RenderAction::Block, RenderReason::UnknownLogId,
                                "SPT names a log that is not trusted" + note));
    case SptStatus::BadSignature:
      break;
  }

  auto unreachable = [&](const std::string& why) {
    auto action = config.fail_closed ? RenderAction::Block : RenderAction::Render;
    return with_report(decide(action, RenderReason::FallbackUnreachable,
                              "signature check failed and fallback could not complete: " + why +
                                  note));
  };
  try {
    Bytes png;
    if (page.screenshot_png) {
      png = *page.screenshot_png;
    } else if (capturer) {
      png = capturer->capture(page);
    } else {
      throw Error(ErrorCode::ScreenshotUnavailable, "no screenshot and no capturer");
    }
    auto verdict = pls.verify_screenshot(page.url, png);
    RenderDecision d;
    if (verdict.phishing) {
      d = decide(RenderAction::Block, RenderReason::FallbackPhishing,
                 "page resembles a page logged for " + verdict.matched_domain.value_or("?") + note);
    } else if (verdict.matched_domain) {
      d = decide(RenderAction::Render, RenderReason::FallbackSafe,
                 "page resembles its own domain's logged page" + note);
    } else {
      d = decide(RenderAction::Render, RenderReason::FallbackSafe,
                 "page resembles no logged page" + note);
    }
    d.fallback = verdict;
    return with_report(std::move(d));
  } catch (const Error& e) {
    return unreachable(e.what());
  }
}

// ---------------------------------------------------------------------------
// Owner tooling

std::filesystem::path spt_path_for(const std::filesystem::path& page) {
  auto p = page;
  p += ".spt";
  return p;
}

std::string owner_register(PlsClient& pls, const OwnerCredentials& owner, const std::string& url,
                           const std::string& html, std::optional<Bytes> screenshot_png,
                           const std::filesystem::path& spt_path) {
  auto host = url_host(url);
  if (host.empty()) throw Error(ErrorCode::DomainMismatch, "not an absolute http(s) URL: " + url);
  auto challenge = pls.challenge(host);
  RegistrationRequest req;
  req.certificate_pem = owner.certificate_pem;
  req.chain_pem = owner.chain_pem;
  req.domain = host;
  req.url = url;
  req.html = html;
  req.nonce = challenge.nonce;
  req.signature = owner.key.sign(challenge.nonce);
  req.screenshot_png = std::move(screenshot_png);
  auto spt = pls.register_page(req);
  if (!spt_path.empty()) write_file_atomic(spt_path, spt + "\n");
  return spt;
}

// ---------------------------------------------------------------------------
// Client config

ClientConfig ClientConfig::from_json(std::string_view text, const std::filesystem::path& base_dir) {
  auto path = [&](const json& v) {
    std::filesystem::path p(v.get<std::string>());
    return p.empty() || p.is_absolute() || base_dir.empty() ? p : base_dir / p;
  };
  ClientConfig c;
  try {
    auto j = json::parse(text);
    if (!j.is_object()) throw Error(ErrorCode::ConfigError, "config must be a JSON object");
    for (auto& [key, value] : j.items()) {
      if (key == "pls_url") c.pls_url = value.get<std::string>();
      else if (key == "timeout_ms") c.timeout_ms = value.get<int>();
      else if (key == "trusted_logs") c.trusted_logs = path(value);
      else if (key == "logs_cache") c.logs_cache = path(value);
      else if (key == "logs_ttl_seconds") c.logs_ttl_seconds = value.get<std::int64_t>();
      else if (key == "ca_file") c.ca_file = path(value);
      else if (key == "fail_closed") c.gate.fail_closed = value.get<bool>();
      else if (key == "content_mode") {
        auto m = value.get<std::string>();
        if (m == "canonical_text") c.gate.content_mode = ContentHashMode::CanonicalText;
        else if (m == "raw_html") c.gate.content_mode = ContentHashMode::RawHtml;
        else throw Error(ErrorCode::ConfigError, "content_mode must be canonical_text or raw_html");
      } else if (key == "detection") c.gate.detection = DetectionConfig::from_json(value.dump());
      else throw Error(ErrorCode::ConfigError, "unknown config key '" + key + "'");
    }
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::ConfigError, ex.what());
  }
  if (c.timeout_ms <= 0) throw Error(ErrorCode::ConfigError, "timeout_ms must be > 0");
  return c;
}

ClientConfig ClientConfig::load(const std::filesystem::path& path) {
  ClientConfig c = path.empty() ? ClientConfig{} : from_json(read_file(path), path.parent_path());
  c.apply_env();
  return c;
}

void ClientConfig::apply_env() {
  auto env = [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
  };
  auto integer = [](const char* name, const std::string& v) {
    try {
      std::size_t used = 0;
      long long n = std::stoll(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return n;
    } catch (const std::exception&) {
      throw Error(ErrorCode::ConfigError, std::string(name) + " is not an integer: '" + v + "'");
    }
  };
  if (auto v = env("PT_PLS_URL")) pls_url = *v;
  if (auto v = env("PT_TIMEOUT_MS")) timeout_ms = static_cast<int>(integer("PT_TIMEOUT_MS", *v));
  if (auto v = env("PT_TRUSTED_LOGS")) trusted_logs = *v;
  if (auto v = env("PT_LOGS_CACHE")) logs_cache = *v;
  if (auto v = env("PT_LOGS_TTL")) logs_ttl_seconds = integer("PT_LOGS_TTL", *v);
  if (auto v = env("PT_FAIL_CLOSED")) gate.fail_closed = !(*v == "0" || *v == "false");
  if (auto v = env("PT_LOGIN_THRESHOLD")) {
    gate.detection.login_threshold = static_cast<int>(integer("PT_LOGIN_THRESHOLD", *v));
  }
  gate.detection.validate();
}

}  // namespace pt
