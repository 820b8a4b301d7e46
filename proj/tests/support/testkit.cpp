#include "testkit.hpp"

#include <fstream>
#include <iterator>
#include <random>

#include "pt/error.hpp"
#include "pt/file_io.hpp"
#include "pt/url.hpp"

namespace pt::testkit {

std::filesystem::path fixture(const std::string& relative) {
  return std::filesystem::path(PT_FIXTURE_DIR) / relative;
}

std::string read_text(const std::filesystem::path& path) { return read_file(path); }

Bytes read_bytes(const std::filesystem::path& path) {
  auto s = read_file(path);
  return Bytes(s.begin(), s.end());
}

SigningKey seeded_key(std::string_view label) {
  auto seed = sha256(label);
  return SigningKey::ed25519_from_seed(seed);
}

Pki make_pki(std::string_view name) {
  auto key = SigningKey::generate_ed25519();
  CertificateRequest req;
  req.common_name = std::string(name);
  req.is_ca = true;
  req.not_before = 0;
  auto ca = make_self_signed_ca(key, req);
  return {key, ca};
}

Owner make_owner(const Pki& pki, const std::string& host) {
  auto key = SigningKey::generate_ed25519();
  CertificateRequest req;
  req.common_name = host;
  req.dns_names = {host};
  auto cert = issue_certificate(pki.ca, pki.ca_key, key.public_key(), req);
  return {key, cert};
}

std::unique_ptr<LogServer> make_server(const Pki& pki, PlsConfig config, LogServer::Clock clock,
                                       std::vector<LogIdentity> peers, std::string_view key_label) {
  return std::make_unique<LogServer>(seeded_key(key_label), std::move(config),
                                     std::vector<Certificate>{pki.ca}, std::move(peers), nullptr,
                                     std::move(clock));
}

RegistrationRequest make_request(LogServer& server, const Owner& owner, const std::string& url,
                                 const std::string& html, std::optional<Bytes> png) {
  RegistrationRequest req;
  req.domain = url_host(url);
  auto challenge = server.issue_challenge(req.domain);
  req.certificate_pem = owner.cert.pem();
  req.url = url;
  req.html = html;
  req.nonce = challenge.nonce;
  req.signature = owner.key.sign(challenge.nonce);
  req.screenshot_png = std::move(png);
  return req;
}

LogEntry register_page(LogServer& server, const Owner& owner, const std::string& url,
                       const std::string& html, const Image& screenshot) {
  return server.register_page(make_request(server, owner, url, html, png_bytes(screenshot)));
}

Bytes png_bytes(const Image& image) { return encode_png(image); }

TempDir::TempDir() {
  std::random_device rd;
  auto base = std::filesystem::temp_directory_path();
  for (int i = 0; i < 100; ++i) {
    auto p = base / ("pt-test-" + std::to_string(rd()));
    if (std::filesystem::create_directory(p)) {
      path_ = p;
      return;
    }
  }
  throw Error(ErrorCode::Internal, "cannot create a temporary directory");
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

}  // namespace pt::testkit
