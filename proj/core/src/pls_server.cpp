#include "pt/pls_server.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
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

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  std::filesystem::path p(value);
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

std::string_view mode_name(ContentHashMode mode) {
  return mode == ContentHashMode::RawHtml ? "raw_html" : "canonical_text";
}

ContentHashMode parse_mode(const std::string& name) {
  if (name == "canonical_text") return ContentHashMode::CanonicalText;
  if (name == "raw_html") return ContentHashMode::RawHtml;
  throw Error(ErrorCode::ConfigError, "content_mode must be canonical_text or raw_html");
}

json entry_json(const LogEntry& e) {
  return {{"sequence", e.sequence},         {"domain", e.domain},
          {"url", e.url},                   {"url_hash", e.url_hash},
          {"content_hash", e.content_hash}, {"spt", e.spt},
          {"logged_at", e.logged_at}};
}

// Reads JSON lines, dropping a torn final line.
template <typename F>
void read_jsonl(const std::filesystem::path& path, F&& on_line) {
  std::ifstream in(path);
  if (!in) return;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      on_line(json::parse(line));
    } catch (const json::exception& ex) {
      if (in.peek() == std::char_traits<char>::eof()) break;
      throw Error(ErrorCode::ConfigError,
                  path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  }
}

// Serves a pre-filtered snapshot and appends to the underlying JSONL file.
class PreloadedBackend final : public EmbeddingStoreBackend {
 public:
  PreloadedBackend(std::vector<StoredEmbedding> initial, std::filesystem::path path)
      : initial_(std::move(initial)), file_(std::move(path)) {}
  std::vector<StoredEmbedding> load() override { return std::move(initial_); }
  void append(const StoredEmbedding& entry) override { file_.append(entry); }

 private:
  std::vector<StoredEmbedding> initial_;
  JsonlEmbeddingBackend file_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Config

PlsConfig PlsConfig::from_json(std::string_view text, const std::filesystem::path& base_dir) {
  PlsConfig c;
  try {
    auto j = json::parse(text);
    if (!j.is_object()) throw Error(ErrorCode::ConfigError, "config must be a JSON object");
    for (auto& [key, value] : j.items()) {
      if (key == "listen_host") c.listen_host = value.get<std::string>();
      else if (key == "port") c.port = value.get<int>();
      else if (key == "data_dir") c.data_dir = resolve(base_dir, value.get<std::string>());
      else if (key == "key_file") c.key_file = resolve(base_dir, value.get<std::string>());
      else if (key == "roots_file") c.roots_file = resolve(base_dir, value.get<std::string>());
      else if (key == "peers_file") c.peers_file = resolve(base_dir, value.get<std::string>());
      else if (key == "embedder") c.embedder = value.get<std::string>();
      else if (key == "threshold") c.threshold = value.get<double>();
      else if (key == "content_mode") c.content_mode = parse_mode(value.get<std::string>());
      else if (key == "nonce_ttl_seconds") c.nonce_ttl_seconds = value.get<std::int64_t>();
      else if (key == "challenge_limit_per_minute") c.challenge_limit_per_minute = value.get<int>();
      else if (key == "fallback_limit_per_minute") c.fallback_limit_per_minute = value.get<int>();
      else if (key == "renderer_url") c.renderer_url = value.get<std::string>();
      else if (key == "renderer_timeout_ms") c.renderer_timeout_ms = value.get<int>();
      else if (key == "tls_cert_file") c.tls_cert_file = resolve(base_dir, value.get<std::string>());
      else if (key == "tls_key_file") c.tls_key_file = resolve(base_dir, value.get<std::string>());
      else if (key == "audit_page_size") c.audit_page_size = value.get<std::size_t>();
      else throw Error(ErrorCode::ConfigError, "unknown config key '" + key + "'");
    }
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::ConfigError, ex.what());
  }
  c.validate();
  return c;
}

PlsConfig PlsConfig::load(const std::filesystem::path& path) {
  PlsConfig c = path.empty() ? PlsConfig{} : from_json(read_file(path), path.parent_path());
  c.apply_env();
  c.validate();
  return c;
}

void PlsConfig::apply_env() {
  auto env = [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
  };
  auto number = [](const std::string& name, const std::string& v) {
    try {
      std::size_t used = 0;
      double d = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw Error(ErrorCode::ConfigError, name + " is not a number: '" + v + "'");
    }
  };
  if (auto v = env("PT_PLS_HOST")) listen_host = *v;
  if (auto v = env("PT_PLS_PORT")) port = static_cast<int>(number("PT_PLS_PORT", *v));
  if (auto v = env("PT_PLS_DATA_DIR")) data_dir = *v;
  if (auto v = env("PT_PLS_KEY")) key_file = *v;
  if (auto v = env("PT_PLS_ROOTS")) roots_file = *v;
  if (auto v = env("PT_PLS_PEERS")) peers_file = *v;
  if (auto v = env("PT_PLS_EMBEDDER")) embedder = *v;
  if (auto v = env("PT_PLS_THRESHOLD")) threshold = number("PT_PLS_THRESHOLD", *v);
  if (auto v = env("PT_PLS_RENDERER")) renderer_url = *v;
  if (auto v = env("PT_PLS_CHALLENGE_LIMIT")) {
    challenge_limit_per_minute = static_cast<int>(number("PT_PLS_CHALLENGE_LIMIT", *v));
  }
  if (auto v = env("PT_PLS_FALLBACK_LIMIT")) {
    fallback_limit_per_minute = static_cast<int>(number("PT_PLS_FALLBACK_LIMIT", *v));
  }
}

void PlsConfig::validate() const {
  if (port < 0 || port > 65535) throw Error(ErrorCode::ConfigError, "port out of range");
  if (!(threshold > 0)) throw Error(ErrorCode::ConfigError, "threshold must be > 0");
  if (nonce_ttl_seconds <= 0) throw Error(ErrorCode::ConfigError, "nonce_ttl_seconds must be > 0");
  if (challenge_limit_per_minute <= 0 || fallback_limit_per_minute <= 0) {
    throw Error(ErrorCode::ConfigError, "rate limits must be > 0");
  }
  if (audit_page_size == 0) throw Error(ErrorCode::ConfigError, "audit_page_size must be > 0");
  if (tls_cert_file.empty() != tls_key_file.empty()) {
    throw Error(ErrorCode::ConfigError, "tls_cert_file and tls_key_file go together");
  }
  make_embedder(embedder);
}

std::string PlsConfig::to_json() const {
  json j = {{"listen_host", listen_host},
            {"port", port},
            {"data_dir", data_dir.string()},
            {"key_file", key_file.string()},
            {"roots_file", roots_file.string()},
            {"peers_file", peers_file.string()},
            {"embedder", embedder},
            {"threshold", threshold},
            {"content_mode", mode_name(content_mode)},
            {"nonce_ttl_seconds", nonce_ttl_seconds},
            {"challenge_limit_per_minute", challenge_limit_per_minute},
            {"fallback_limit_per_minute", fallback_limit_per_minute},
            {"renderer_url", renderer_url},
            {"renderer_timeout_ms", renderer_timeout_ms},
            {"tls_cert_file", tls_cert_file.string()},
            {"tls_key_file", tls_key_file.string()},
            {"audit_page_size", audit_page_size}};
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Page log

std::string LogEntry::summary_json() const { return entry_json(*this).dump(); }

PageLog::PageLog(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (dir_.empty()) {
    store_ = std::make_unique<EmbeddingStore>();
    return;
  }
  std::filesystem::create_directories(dir_);
  read_jsonl(dir_ / "entries.jsonl", [&](const json& j) {
    LogEntry e;
    e.sequence = j.at("sequence").get<std::uint64_t>();
    e.domain = j.at("domain").get<std::string>();
    e.url = j.at("url").get<std::string>();
    e.url_hash = j.at("url_hash").get<std::string>();
    e.content_hash = j.at("content_hash").get<std::string>();
    e.spt = j.at("spt").get<std::string>();
    e.logged_at = j.at("logged_at").get<std::int64_t>();
    if (e.sequence != entries_.size() + 1) {
      throw Error(ErrorCode::ConfigError, "entries.jsonl: sequence gap at " +
                                              std::to_string(e.sequence));
    }
    entries_.push_back(std::move(e));
  });

  // The embedding is written before its entry, so a crash can leave an orphan (or, after a
  // retry, a duplicate) embedding; the entry file is authoritative.
  auto path = dir_ / "embeddings.jsonl";
  std::vector<std::optional<StoredEmbedding>> by_sequence(entries_.size());
  for (auto& e : JsonlEmbeddingBackend(path).load()) {
    if (e.sequence >= 1 && e.sequence <= entries_.size()) by_sequence[e.sequence - 1] = e;
  }
  std::vector<StoredEmbedding> kept;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!by_sequence[i]) {
      throw Error(ErrorCode::ConfigError,
                  "embeddings.jsonl: no embedding for sequence " + std::to_string(i + 1));
    }
    entries_[i].embedding = by_sequence[i]->embedding;
    kept.push_back(std::move(*by_sequence[i]));
  }
  store_ = std::make_unique<EmbeddingStore>(std::make_unique<PreloadedBackend>(std::move(kept), path));
}

void PageLog::append(LogEntry entry) {
  std::unique_lock lock(mutex_);
  if (entry.sequence != entries_.size() + 1) {
    throw Error(ErrorCode::Internal, "out-of-order sequence " + std::to_string(entry.sequence));
  }
  store_->append({entry.domain, entry.url, entry.embedding, entry.sequence});
  if (!dir_.empty()) {
    std::ofstream out(dir_ / "entries.jsonl", std::ios::app);
    out << entry.summary_json() << '\n';
    out.flush();
    if (!out) throw Error(ErrorCode::Internal, "cannot append to entries.jsonl");
  }
  entries_.push_back(std::move(entry));
}

std::uint64_t PageLog::next_sequence() const {
  std::shared_lock lock(mutex_);
  return entries_.size() + 1;
}

std::size_t PageLog::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

std::vector<LogEntry> PageLog::entries(std::uint64_t from, std::size_t limit) const {
  std::shared_lock lock(mutex_);
  std::vector<LogEntry> out;
  std::size_t start = from == 0 ? 0 : static_cast<std::size_t>(from - 1);
  for (std::size_t i = start; i < entries_.size(); ++i) {
    if (limit != 0 && out.size() == limit) break;
    out.push_back(entries_[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rate limiting

bool RateLimiter::allow(const std::string& key, std::int64_t now) {
  std::lock_guard lock(mutex_);
  auto& q = events_[key];
  while (!q.empty() && q.front() <= now - window_) q.pop_front();
  if (q.size() >= static_cast<std::size_t>(limit_)) return false;
  q.push_back(now);
  return true;
}

// ---------------------------------------------------------------------------
// Server

LogServer::LogServer(SigningKey key, PlsConfig config, std::vector<Certificate> roots,
                     std::vector<LogIdentity> peers, std::unique_ptr<PageRenderer> renderer,
                     Clock clock)
    : key_(std::move(key)),
      identity_(LogIdentity::from_key(key_.public_key())),
      config_(std::move(config)),
      roots_(std::move(roots)),
      peers_(std::move(peers)),
      renderer_(std::move(renderer)),
      clock_(clock ? std::move(clock) : Clock(system_now)),
      embedder_(make_embedder(config_.embedder)),
      log_(config_.data_dir),
      challenge_limiter_(config_.challenge_limit_per_minute),
      fallback_limiter_(config_.fallback_limit_per_minute) {
  config_.validate();
  for (const auto& e : log_.entries()) {
    if (e.embedding.embedder_id != embedder_->id()) {
      throw Error(ErrorCode::EmbedderMismatch, "stored log was built with '" +
                                                   e.embedding.embedder_id + "', config selects '" +
                                                   std::string(embedder_->id()) + "'");
    }
  }
}

std::unique_ptr<LogServer> LogServer::from_config(const PlsConfig& config) {
  SigningKey key = config.key_file.empty() ? SigningKey::generate_ed25519()
                                           : SigningKey::from_pem(read_file(config.key_file));
  std::vector<Certificate> roots;
  if (!config.roots_file.empty()) roots = Certificate::bundle_from_pem(read_file(config.roots_file));
  std::vector<LogIdentity> peers;
  if (!config.peers_file.empty()) peers = trusted_logs_from_json(read_file(config.peers_file));
  std::unique_ptr<PageRenderer> renderer;
  if (!config.renderer_url.empty()) {
    renderer = make_http_renderer(config.renderer_url, config.renderer_timeout_ms);
  }
  return std::make_unique<LogServer>(std::move(key), config, std::move(roots), std::move(peers),
                                     std::move(renderer));
}

Challenge LogServer::issue_challenge(std::string_view domain) {
  std::string d = html::ascii_lower(domain);
  if (d.empty()) throw Error(ErrorCode::DomainMismatch, "domain is empty");
  std::int64_t now = clock_();
  if (!challenge_limiter_.allow(d, now)) {
    throw Error(ErrorCode::RateLimited, "too many challenges for " + d);
  }
  Challenge c{random_bytes(32), now + config_.nonce_ttl_seconds};
  std::lock_guard lock(nonce_mutex_);
  std::erase_if(nonces_, [&](const auto& kv) { return kv.second.expires_at <= now; });
  nonces_[c.nonce] = {d, c.expires_at};
  return c;
}

void LogServer::consume_nonce(const Bytes& nonce, const std::string& domain, std::int64_t now) {
  std::lock_guard lock(nonce_mutex_);
  auto it = nonces_.find(nonce);
  if (it == nonces_.end()) throw Error(ErrorCode::ChallengeInvalid, "unknown or already used nonce");
  Nonce n = it->second;
  nonces_.erase(it);
  if (n.domain != domain) throw Error(ErrorCode::ChallengeInvalid, "nonce was issued to another domain");
  if (n.expires_at <= now) throw Error(ErrorCode::ChallengeExpired, "nonce expired");
}

PageEmbedding LogServer::embed_png(ByteView png) const {
  return embedder_->embed(decode_png(png));
}

LogEntry LogServer::register_page(const RegistrationRequest& req) {
  std::int64_t now = clock_();
  auto url = Url::parse(req.url);
  if (!url) throw Error(ErrorCode::DomainMismatch, "url is not an absolute http(s) URL");
  std::string domain = html::ascii_lower(req.domain);
  if (domain != url->host) {
    throw Error(ErrorCode::DomainMismatch, "domain '" + domain + "' does not match url host '" +
                                               url->host + "'");
  }

  std::optional<Certificate> cert;
  std::vector<Certificate> chain;
  try {
    cert = Certificate::from_pem(req.certificate_pem);
    if (!req.chain_pem.empty()) chain = Certificate::bundle_from_pem(req.chain_pem);
  } catch (const Error& e) {
    throw Error(ErrorCode::CertificateInvalid, e.detail());
  }
  std::string why;
  if (!cert->verify_chain(roots_, chain, now, &why)) throw Error(ErrorCode::CertificateInvalid, why);
  if (!cert->matches_host(url->host)) {
    throw Error(ErrorCode::DomainMismatch, "certificate does not cover '" + url->host + "'");
  }

  consume_nonce(req.nonce, domain, now);
  if (!cert->public_key().verify(req.nonce, req.signature)) {
    throw Error(ErrorCode::ChallengeInvalid, "challenge signature does not verify");
  }

  PageEmbedding embedding;
  if (req.screenshot_png) {
    embedding = embed_png(*req.screenshot_png);
  } else if (renderer_) {
    embedding = embedder_->embed(renderer_->render(req.url, req.html));
  } else {
    throw Error(ErrorCode::ScreenshotUnavailable, "no screenshot supplied and no renderer configured");
  }

  LogEntry entry;
  entry.domain = domain;
  entry.url = req.url;
  entry.url_hash = url_hash(req.url);
  entry.content_hash = content_hash(req.html, config_.content_mode);
  entry.logged_at = now;
  entry.embedding = std::move(embedding);

  std::lock_guard lock(writer_);
  auto verdict = log_.embeddings().nearest(entry.embedding, config_.threshold, domain);
  if (verdict.matched) {
    throw Error(ErrorCode::SimilarityConflict,
                "page is visually similar to a page logged by another domain");
  }
  entry.spt = create_spt_from_hashes(entry.url_hash, entry.content_hash, key_, now);
  entry.sequence = log_.next_sequence();
  log_.append(entry);
  return entry;
}

std::vector<LogIdentity> LogServer::get_logs() const {
  std::vector<LogIdentity> out{identity_};
  out.insert(out.end(), peers_.begin(), peers_.end());
  return out;
}

FallbackVerdict LogServer::verify_fallback(std::string_view url, ByteView png,
                                           const std::string& source) {
  if (!fallback_limiter_.allow(source, clock_())) {
    throw Error(ErrorCode::RateLimited, "too many fallback checks from this source");
  }
  return verify_fallback_unlimited(url, decode_png(png));
}

FallbackVerdict LogServer::verify_fallback(std::string_view url, const Image& screenshot,
                                           const std::string& source) {
  if (!fallback_limiter_.allow(source, clock_())) {
    throw Error(ErrorCode::RateLimited, "too many fallback checks from this source");
  }
  return verify_fallback_unlimited(url, screenshot);
}

void LogServer::import_entries(std::vector<LogEntry> entries) {
  std::lock_guard lock(writer_);
  for (auto& e : entries) {
    if (e.embedding.embedder_id != embedder_->id()) {
      throw Error(ErrorCode::EmbedderMismatch, "imported entry was built with '" +
                                                   e.embedding.embedder_id + "'");
    }
    e.sequence = log_.next_sequence();
    log_.append(std::move(e));
  }
}

FallbackVerdict LogServer::verify_fallback_unlimited(std::string_view url, const Image& screenshot) {
  auto embedding = embedder_->embed(screenshot);
  auto verdict = log_.embeddings().nearest(embedding, config_.threshold);
  FallbackVerdict out;
  out.distance = verdict.distance;
  out.threshold = config_.threshold;
  if (!verdict.matched) return out;
  out.matched_domain = verdict.nearest_domain;
  out.phishing = html::ascii_lower(*verdict.nearest_domain) != url_host(url);
  return out;
}

std::vector<LogEntry> LogServer::audit(std::uint64_t from, std::size_t limit) const {
  return log_.entries(from, limit == 0 ? config_.audit_page_size : limit);
}

std::string LogServer::audit_json(std::uint64_t from, std::size_t limit) const {
  if (from == 0) from = 1;
  auto page = audit(from, limit);
  json entries = json::array();
  for (const auto& e : page) entries.push_back(entry_json(e));
  json j = {{"entries", std::move(entries)}, {"next", nullptr}};
  std::uint64_t next = from + page.size();
  if (!page.empty() && next <= log_.size()) j["next"] = next;
  return j.dump();
}

SptStatus LogServer::check(std::string_view spt, std::string_view url, std::string_view html) const {
  auto logs = get_logs();
  return check_spt(spt, url, html, logs, config_.content_mode);
}

}  // namespace pt
