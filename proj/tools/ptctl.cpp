// ptctl: key management, log server, owner registration, demo origin and page verification.

#include <csignal>
#include <iostream>
#include <pthread.h>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "pt/client_verifier.hpp"
#include "pt/error.hpp"
#include "pt/file_io.hpp"
#include "pt/http.hpp"
#include "pt/login_detector.hpp"
#include "pt/pls_server.hpp"
#include "pt/synthetic_corpus.hpp"
#include "pt/url.hpp"

namespace {

using nlohmann::json;

constexpr int kExitRender = 0;
constexpr int kExitError = 1;
constexpr int kExitBlock = 2;

// Blocks SIGINT/SIGTERM in every thread and stops `service` from a waiter thread.
void serve_until_signalled(pt::HttpService& service) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    service.stop();
  });
  service.serve();
  if (waiter.joinable()) {
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
  }
}

void write_port_file(const std::string& path, int port) {
  if (!path.empty()) pt::write_file_atomic(path, std::to_string(port) + "\n");
}

pt::Bytes read_bytes(const std::string& path) {
  auto s = pt::read_file(path);
  return pt::Bytes(s.begin(), s.end());
}

// ---------------------------------------------------------------------------

struct KeygenArgs {
  std::string kind;
  std::string key_out;
  std::string cert_out;
  std::string name = "Page Transparency Demo CA";
  std::vector<std::string> hosts;
  std::string ca_key;
  std::string ca_cert;
  std::string trusted_logs_out;
  int days = 365;
};

int run_keygen(const KeygenArgs& a) {
  auto key = pt::SigningKey::generate_ed25519();
  pt::write_file_atomic(a.key_out, key.pem());
  if (a.kind == "pls") {
    auto id = pt::LogIdentity::from_key(key.public_key());
    if (!a.trusted_logs_out.empty()) {
      std::vector<pt::LogIdentity> logs{id};
      pt::write_file_atomic(a.trusted_logs_out, pt::trusted_logs_to_json(logs) + "\n");
    }
    std::cout << json{{"log_id", id.log_id_base64()}, {"key", a.key_out}}.dump(2) << "\n";
    return 0;
  }
  if (a.cert_out.empty()) throw pt::Error(pt::ErrorCode::ConfigError, "--cert is required");
  pt::CertificateRequest req;
  req.lifetime_seconds = static_cast<std::int64_t>(a.days) * 24 * 3600;
  if (a.kind == "ca") {
    req.common_name = a.name;
    req.is_ca = true;
    pt::write_file_atomic(a.cert_out, pt::make_self_signed_ca(key, req).pem());
  } else {
    if (a.hosts.empty() || a.ca_key.empty() || a.ca_cert.empty()) {
      throw pt::Error(pt::ErrorCode::ConfigError, "domain keys need --host, --ca-key and --ca-cert");
    }
    auto ca = pt::Certificate::from_pem(pt::read_file(a.ca_cert));
    auto ca_key = pt::SigningKey::from_pem(pt::read_file(a.ca_key));
    req.common_name = a.hosts.front();
    req.dns_names = a.hosts;
    pt::write_file_atomic(a.cert_out, pt::issue_certificate(ca, ca_key, key.public_key(), req).pem());
  }
  std::cout << json{{"key", a.key_out}, {"cert", a.cert_out}}.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct ServePlsArgs {
  std::string config;
  std::string host;
  int port = -1;
  std::string data_dir;
  std::string key;
  std::string roots;
  std::string peers;
  std::string port_file;
};

int run_serve_pls(const ServePlsArgs& a) {
  auto cfg = pt::PlsConfig::load(a.config);
  if (!a.host.empty()) cfg.listen_host = a.host;
  if (a.port >= 0) cfg.port = a.port;
  if (!a.data_dir.empty()) cfg.data_dir = a.data_dir;
  if (!a.key.empty()) cfg.key_file = a.key;
  if (!a.roots.empty()) cfg.roots_file = a.roots;
  if (!a.peers.empty()) cfg.peers_file = a.peers;
  cfg.validate();
  auto server = pt::LogServer::from_config(cfg);
  pt::PlsHttpServer http(*server);
  int port = http.bind(cfg.listen_host, cfg.port);
  write_port_file(a.port_file, port);
  std::cerr << "pls: log_id " << server->identity().log_id_base64() << ", " << server->log().size()
            << " entries, listening on " << cfg.listen_host << ":" << port << "\n";
  serve_until_signalled(http);
  return 0;
}

// ---------------------------------------------------------------------------

struct RegisterArgs {
  std::string pls;
  std::string cert;
  std::string chain;
  std::string key;
  std::string url;
  std::string html;
  std::string screenshot;
  std::string spt_out;
  std::string ca_file;
  int timeout_ms = 10000;
};

int run_register(const RegisterArgs& a) {
  pt::HttpPlsClient client(a.pls, {a.timeout_ms, a.ca_file});
  pt::OwnerCredentials owner{pt::read_file(a.cert), a.chain.empty() ? "" : pt::read_file(a.chain),
                             pt::SigningKey::from_pem(pt::read_file(a.key))};
  std::optional<pt::Bytes> png;
  if (!a.screenshot.empty()) png = read_bytes(a.screenshot);
  auto out = a.spt_out.empty() ? pt::spt_path_for(a.html) : std::filesystem::path(a.spt_out);
  auto spt = pt::owner_register(client, owner, a.url, pt::read_file(a.html), std::move(png), out);
  std::cout << json{{"spt", spt}, {"stored", out.string()}}.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct ServeDemoArgs {
  std::string root;
  std::string mode = "normal";
  std::string replay_spt;
  std::string host = "127.0.0.1";
  int port = 0;
  std::string port_file;
};

int run_serve_demo(const ServeDemoArgs& a) {
  pt::DemoServer demo({a.root, pt::demo_mode_from_string(a.mode), a.replay_spt});
  int port = demo.bind(a.host, a.port);
  write_port_file(a.port_file, port);
  std::cerr << "demo: serving " << a.root << " (" << a.mode << ") on " << a.host << ":" << port
            << "\n";
  serve_until_signalled(demo);
  return 0;
}

// ---------------------------------------------------------------------------

struct ClientArgs {
  std::string config;
  std::string pls;
  std::string trusted_logs;
  std::string logs_cache;
  std::string screenshot;
  std::string renderer;
  bool fail_open = false;
  int timeout_ms = 0;
};

pt::ClientConfig client_config(const ClientArgs& a) {
  auto cfg = pt::ClientConfig::load(a.config);
  if (!a.pls.empty()) cfg.pls_url = a.pls;
  if (!a.trusted_logs.empty()) cfg.trusted_logs = a.trusted_logs;
  if (!a.logs_cache.empty()) cfg.logs_cache = a.logs_cache;
  if (a.fail_open) cfg.gate.fail_closed = false;
  if (a.timeout_ms > 0) cfg.timeout_ms = a.timeout_ms;
  return cfg;
}

// Loads the trusted-log list from a static file, the cache, or the PLS.
std::vector<pt::LogIdentity> trusted_logs(const pt::ClientConfig& cfg, pt::PlsClient* pls) {
  if (!cfg.trusted_logs.empty()) {
    return pt::trusted_logs_from_json(pt::read_file(cfg.trusted_logs));
  }
  if (!pls) throw pt::Error(pt::ErrorCode::ConfigError, "need --trusted-logs or --pls");
  if (!cfg.logs_cache.empty()) return pt::TrustedLogCache(cfg.logs_cache, cfg.logs_ttl_seconds).get(*pls);
  return pls->get_logs();
}

// Stands in for a log server when none is configured; every call is unreachable.
class NoPls final : public pt::PlsClient {
 public:
  pt::Challenge challenge(std::string_view) override { fail(); }
  std::string register_page(const pt::RegistrationRequest&) override { fail(); }
  std::vector<pt::LogIdentity> get_logs() override { fail(); }
  pt::FallbackVerdict verify_screenshot(std::string_view, pt::ByteView) override { fail(); }

 private:
  [[noreturn]] static void fail() {
    throw pt::Error(pt::ErrorCode::NetworkError, "no log server configured");
  }
};

std::unique_ptr<pt::PlsClient> make_pls(const pt::ClientConfig& cfg) {
  if (cfg.pls_url.empty()) return std::make_unique<NoPls>();
  return std::make_unique<pt::HttpPlsClient>(cfg.pls_url,
                                             pt::HttpPlsClient::Options{cfg.timeout_ms, cfg.ca_file});
}

std::unique_ptr<pt::ScreenshotCapturer> make_capturer(const ClientArgs& a) {
  if (!a.screenshot.empty()) return std::make_unique<pt::FixtureCapturer>(a.screenshot);
  if (!a.renderer.empty()) {
    return std::make_unique<pt::RendererCapturer>(pt::make_http_renderer(a.renderer, 10000));
  }
  return nullptr;
}

int run_verify(const std::string& url, const ClientArgs& a) {
  auto cfg = client_config(a);
  auto pls = make_pls(cfg);
  auto logs = trusted_logs(cfg, cfg.pls_url.empty() ? nullptr : pls.get());
  auto page = pt::fetch_page(url, {cfg.timeout_ms, 5, cfg.ca_file});
  auto capturer = make_capturer(a);
  auto decision = pt::gate(page, logs, *pls, capturer.get(), cfg.gate);
  std::cout << decision.to_json() << "\n";
  return decision.action == pt::RenderAction::Render ? kExitRender : kExitBlock;
}

struct ServeVerifierArgs {
  std::string host = "127.0.0.1";
  int port = 0;
  std::string port_file;
};

int run_serve_verifier(const ClientArgs& a, const ServeVerifierArgs& s) {
  auto cfg = client_config(a);
  auto pls = make_pls(cfg);
  auto capturer = make_capturer(a);
  std::mutex mutex;
  auto handler = [&](const pt::FetchedPage& page) {
    std::vector<pt::LogIdentity> logs;
    {
      std::lock_guard lock(mutex);
      logs = trusted_logs(cfg, cfg.pls_url.empty() ? nullptr : pls.get());
    }
    return pt::gate(page, logs, *pls, capturer.get(), cfg.gate);
  };
  pt::GateHttpServer server(handler);
  int port = server.bind(s.host, s.port);
  write_port_file(s.port_file, port);
  std::cerr << "verifier: listening on " << s.host << ":" << port << "\n";
  serve_until_signalled(server);
  return 0;
}

// ---------------------------------------------------------------------------

int run_detect(const std::string& target, const std::string& url_arg, const std::string& config) {
  pt::DetectionConfig cfg;
  if (!config.empty()) cfg = pt::DetectionConfig::from_json(pt::read_file(config));
  std::string html;
  std::string url = url_arg;
  if (pt::Url::parse(target)) {
    auto page = pt::fetch_page(target);
    html = page.html;
    if (url.empty()) url = page.url;
  } else {
    html = pt::read_file(target);
  }
  auto report = pt::detect_login(html, url, cfg);
  std::cout << report.to_json() << "\n" << pt::explain(report) << "\n";
  return 0;
}

int run_calibrate(const std::string& embedder_name, std::uint64_t seed,
                  const std::string& write_config, const std::string& dump) {
  auto corpus = pt::synthetic::build_calibration_corpus(seed);
  auto embedder = pt::make_embedder(embedder_name);
  auto r = pt::calibrate_threshold(corpus, *embedder);
  json out = {{"embedder", embedder->id()},
              {"threshold", r.threshold},
              {"precision", r.precision},
              {"recall", r.recall},
              {"f1", r.f1},
              {"positives", r.positives},
              {"negatives", r.negatives},
              {"max_positive_distance", r.max_positive},
              {"min_negative_distance", r.min_negative}};
  std::cout << out.dump(2) << "\n";
  if (!write_config.empty()) {
    json cfg = {{"embedder", embedder_name}, {"threshold", r.threshold}};
    pt::write_file_atomic(write_config, cfg.dump(2) + "\n");
  }
  if (!dump.empty()) {
    std::filesystem::create_directories(dump);
    for (const auto& d : corpus) {
      auto base = std::filesystem::path(dump) / d.domain;
      pt::write_png_file(base.string() + ".png", d.original);
      for (std::size_t i = 0; i < d.variants.size(); ++i) {
        pt::write_png_file(base.string() + ".variant" + std::to_string(i) + ".png", d.variants[i]);
      }
    }
    for (const auto& b : pt::synthetic::unlogged_brands()) {
      pt::write_png_file((std::filesystem::path(dump) / (b.domain + ".png")).string(),
                         pt::synthetic::render_page(b));
    }
  }
  return 0;
}

int run_logs(const std::string& pls, const std::string& out, std::int64_t audit_from,
             const std::string& ca_file) {
  pt::HttpPlsClient client(pls, {10000, ca_file});
  if (audit_from > 0) {
    std::cout << json::parse(client.audit(static_cast<std::uint64_t>(audit_from))).dump(2) << "\n";
    return 0;
  }
  auto logs = client.get_logs();
  auto text = pt::trusted_logs_to_json(logs);
  if (!out.empty()) pt::write_file_atomic(out, text + "\n");
  std::cout << json::parse(text).dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Page transparency tooling: log server, owner registration and page verification"};
  app.require_subcommand(1);

  KeygenArgs keygen;
  auto* kg = app.add_subcommand("keygen", "Generate a log key, a demo CA or a domain certificate");
  kg->add_option("kind", keygen.kind, "pls | ca | domain")
      ->required()
      ->check(CLI::IsMember({"pls", "ca", "domain"}));
  kg->add_option("--key", keygen.key_out, "Private key output (PKCS#8 PEM)")->required();
  kg->add_option("--cert", keygen.cert_out, "Certificate output (ca, domain)");
  kg->add_option("--name", keygen.name, "CA common name");
  kg->add_option("--host", keygen.hosts, "Host name covered by a domain certificate");
  kg->add_option("--ca-key", keygen.ca_key, "Issuing CA key (domain)");
  kg->add_option("--ca-cert", keygen.ca_cert, "Issuing CA certificate (domain)");
  kg->add_option("--trusted-logs", keygen.trusted_logs_out, "Also write a trusted-log list (pls)");
  kg->add_option("--days", keygen.days, "Certificate lifetime in days");

  ServePlsArgs spls;
  auto* sp = app.add_subcommand("serve-pls", "Run the public log server");
  sp->add_option("--config", spls.config, "PLS config JSON");
  sp->add_option("--host", spls.host, "Listen address");
  sp->add_option("--port", spls.port, "Listen port (0 = ephemeral)");
  sp->add_option("--data-dir", spls.data_dir, "Log storage directory");
  sp->add_option("--key", spls.key, "Log signing key");
  sp->add_option("--roots", spls.roots, "PEM bundle of CAs trusted for domain certificates");
  sp->add_option("--peers", spls.peers, "Trusted-log list of peer servers");
  sp->add_option("--port-file", spls.port_file, "Write the bound port here");

  RegisterArgs reg;
  auto* rg = app.add_subcommand("register", "Register a page with a log server");
  rg->add_option("--pls", reg.pls, "Log server base URL")->required();
  rg->add_option("--cert", reg.cert, "Domain certificate PEM")->required();
  rg->add_option("--chain", reg.chain, "Intermediate certificates PEM");
  rg->add_option("--key", reg.key, "Domain private key PEM")->required();
  rg->add_option("--url", reg.url, "URL the page is served at")->required();
  rg->add_option("--html", reg.html, "Page file")->required();
  rg->add_option("--screenshot", reg.screenshot, "Rendered page PNG");
  rg->add_option("--spt-out", reg.spt_out, "SPT output (default <html>.spt)");
  rg->add_option("--ca-file", reg.ca_file, "CA bundle for an https log server");
  rg->add_option("--timeout-ms", reg.timeout_ms, "Request timeout");

  ServeDemoArgs demo;
  auto* sd = app.add_subcommand("serve-demo", "Serve a site with stored SPT headers");
  sd->add_option("--root", demo.root, "Site root")->required();
  sd->add_option("--mode", demo.mode, "normal | strip-header | spoofed-header | replayed-header")
      ->check(CLI::IsMember({"normal", "strip-header", "spoofed-header", "replayed-header"}));
  sd->add_option("--replay-spt", demo.replay_spt, "SPT file to replay (replayed-header)");
  sd->add_option("--host", demo.host, "Listen address");
  sd->add_option("--port", demo.port, "Listen port (0 = ephemeral)");
  sd->add_option("--port-file", demo.port_file, "Write the bound port here");

  ClientArgs client;
  auto add_client_options = [&client](CLI::App* sub) {
    sub->add_option("--config", client.config, "Client config JSON");
    sub->add_option("--pls", client.pls, "Log server base URL");
    sub->add_option("--trusted-logs", client.trusted_logs, "Static trusted-log list");
    sub->add_option("--logs-cache", client.logs_cache, "Cache file for lists fetched from the PLS");
    sub->add_option("--screenshot", client.screenshot, "Screenshot PNG used for the fallback check");
    sub->add_option("--renderer", client.renderer, "Renderer endpoint used for the fallback check");
    sub->add_flag("--fail-open", client.fail_open, "Render login pages when the fallback fails");
    sub->add_option("--timeout-ms", client.timeout_ms, "Network timeout");
  };

  std::string verify_url;
  auto* vf = app.add_subcommand("verify", "Fetch a page and run the render gate (exit 0 render, 2 block)");
  vf->add_option("url", verify_url, "Page URL")->required();
  add_client_options(vf);

  ServeVerifierArgs sver;
  auto* sv = app.add_subcommand("serve-verifier", "Local POST /gate endpoint for the browser extension");
  add_client_options(sv);
  sv->add_option("--host", sver.host, "Listen address");
  sv->add_option("--port", sver.port, "Listen port (0 = ephemeral)");
  sv->add_option("--port-file", sver.port_file, "Write the bound port here");

  std::string detect_target, detect_url, detect_config;
  auto* dt = app.add_subcommand("detect", "Score a page with the login detector");
  dt->add_option("target", detect_target, "HTML file or URL")->required();
  dt->add_option("--url", detect_url, "URL to score alongside a file");
  dt->add_option("--config", detect_config, "Detector config JSON");

  std::string cal_embedder = std::string(pt::kDefaultEmbedder), cal_write, cal_dump;
  std::uint64_t cal_seed = 1;
  auto* cb = app.add_subcommand("calibrate", "Calibrate the similarity threshold on the synthetic corpus");
  cb->add_option("--embedder", cal_embedder, "spectral | baseline");
  cb->add_option("--seed", cal_seed, "Noise seed for the augmentation set");
  cb->add_option("--write-config", cal_write, "Write {embedder, threshold} JSON here");
  cb->add_option("--dump", cal_dump, "Write the corpus originals and variants as PNG here");

  std::string logs_pls, logs_out, logs_ca;
  std::int64_t audit_from = 0;
  auto* lg = app.add_subcommand("logs", "Fetch a log server's trusted-log list or audit entries");
  lg->add_option("--pls", logs_pls, "Log server base URL")->required();
  lg->add_option("--out", logs_out, "Also write the list here");
  lg->add_option("--audit", audit_from, "Print audit entries starting at this sequence");
  lg->add_option("--ca-file", logs_ca, "CA bundle for an https log server");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*kg) return run_keygen(keygen);
    if (*sp) return run_serve_pls(spls);
    if (*rg) return run_register(reg);
    if (*sd) return run_serve_demo(demo);
    if (*vf) return run_verify(verify_url, client);
    if (*sv) return run_serve_verifier(client, sver);
    if (*dt) return run_detect(detect_target, detect_url, detect_config);
    if (*cb) return run_calibrate(cal_embedder, cal_seed, cal_write, cal_dump);
    if (*lg) return run_logs(logs_pls, logs_out, audit_from, logs_ca);
  } catch (const pt::Error& e) {
    std::cerr << "ptctl: " << e.what() << "\n";
    json err = {{"error", pt::to_string(e.code())}, {"message", e.detail()}};
    std::cout << err.dump(2) << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "ptctl: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
