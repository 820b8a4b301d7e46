#pragma once

// Thin RAII layer over OpenSSL: SHA-256, base64, Ed25519/EVP keys and X.509.

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

typedef struct evp_pkey_st EVP_PKEY;
typedef struct x509_st X509;

namespace pt {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;
using Sha256Digest = std::array<std::uint8_t, 32>;

inline ByteView as_bytes(std::string_view s) noexcept {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

Sha256Digest sha256(ByteView data);
inline Sha256Digest sha256(std::string_view data) { return sha256(as_bytes(data)); }

/// Lowercase hexadecimal.
std::string to_hex(ByteView data);
std::optional<Bytes> from_hex(std::string_view hex);

/// Standard alphabet with '=' padding.
std::string base64_encode(ByteView data);
/// Strict decode: rejects bad characters, bad padding and lengths not divisible by 4.
std::optional<Bytes> base64_decode(std::string_view text);

Bytes random_bytes(std::size_t n);

namespace detail {
struct PKeyDeleter {
  void operator()(EVP_PKEY* key) const noexcept;
};
struct X509Deleter {
  void operator()(X509* cert) const noexcept;
};
}  // namespace detail

class VerifyKey {
 public:
  static VerifyKey from_pem(std::string_view pem);
  static VerifyKey from_der(ByteView der);
  /// Takes a reference on `key`.
  static VerifyKey from_evp(EVP_PKEY* key);

  /// SubjectPublicKeyInfo, DER.
  Bytes der() const;
  std::string pem() const;

  /// Ed25519/Ed448 keys verify `message` directly; RSA and EC keys verify with SHA-256.
  bool verify(ByteView message, ByteView signature) const;

  EVP_PKEY* native() const noexcept { return key_.get(); }

 private:
  explicit VerifyKey(std::shared_ptr<EVP_PKEY> key) : key_(std::move(key)) {}
  std::shared_ptr<EVP_PKEY> key_;
};

class SigningKey {
 public:
  static SigningKey generate_ed25519();
  /// Deterministic Ed25519 key from a 32-byte seed.
  static SigningKey ed25519_from_seed(ByteView seed);
  static SigningKey from_pem(std::string_view pem);

  /// PKCS#8 PEM.
  std::string pem() const;
  VerifyKey public_key() const;
  Bytes sign(ByteView message) const;

  EVP_PKEY* native() const noexcept { return key_.get(); }

 private:
  explicit SigningKey(std::shared_ptr<EVP_PKEY> key) : key_(std::move(key)) {}
  std::shared_ptr<EVP_PKEY> key_;
};

struct CertificateRequest;

class Certificate {
 public:
  static Certificate from_pem(std::string_view pem);
  /// Parses every certificate in a PEM bundle.
  static std::vector<Certificate> bundle_from_pem(std::string_view pem);

  std::string pem() const;
  VerifyKey public_key() const;
  /// DNS SAN / CN wildcard-aware host match.
  bool matches_host(std::string_view host) const;
  std::vector<std::string> dns_names() const;
  /// Verifies the chain `this <- intermediates <- roots` at time `at` (epoch seconds).
  bool verify_chain(const std::vector<Certificate>& roots,
                    const std::vector<Certificate>& intermediates, std::int64_t at,
                    std::string* why = nullptr) const;

  X509* native() const noexcept { return cert_.get(); }

 private:
  friend Certificate make_self_signed_ca(const SigningKey&, const CertificateRequest&);
  friend Certificate issue_certificate(const Certificate&, const SigningKey&, const VerifyKey&,
                                       const CertificateRequest&);
  explicit Certificate(std::shared_ptr<X509> cert) : cert_(std::move(cert)) {}
  std::shared_ptr<X509> cert_;
};

struct CertificateRequest {
  std::string common_name;
  std::vector<std::string> dns_names;
  std::int64_t not_before = 0;  // epoch seconds, 0 = now
  std::int64_t lifetime_seconds = 365LL * 24 * 3600;
  bool is_ca = false;
};

/// Self-signed root, used by the demo tooling and tests.
Certificate make_self_signed_ca(const SigningKey& key, const CertificateRequest& req);
Certificate issue_certificate(const Certificate& issuer, const SigningKey& issuer_key,
                              const VerifyKey& subject_key, const CertificateRequest& req);

}  // namespace pt
