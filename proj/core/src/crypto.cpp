#include "pt/crypto.hpp"

#include <openssl/bio.h>
#include <openssl/err.h>
#include <openssl/evp.h>
#include <openssl/pem.h>
#include <openssl/rand.h>
#include <openssl/sha.h>
#include <openssl/x509.h>
#include <openssl/x509v3.h>

#include <ctime>

#include "pt/error.hpp"

namespace pt {

namespace detail {
void PKeyDeleter::operator()(EVP_PKEY* key) const noexcept { EVP_PKEY_free(key); }
void X509Deleter::operator()(X509* cert) const noexcept { X509_free(cert); }
}  // namespace detail

namespace {

struct BioDeleter {
  void operator()(BIO* b) const noexcept { BIO_free(b); }
};
using BioPtr = std::unique_ptr<BIO, BioDeleter>;

struct MdCtxDeleter {
  void operator()(EVP_MD_CTX* c) const noexcept { EVP_MD_CTX_free(c); }
};
using MdCtxPtr = std::unique_ptr<EVP_MD_CTX, MdCtxDeleter>;

std::string openssl_error() {
  unsigned long code = ERR_get_error();
  if (code == 0) return "unknown OpenSSL error";
  char buf[256];
  ERR_error_string_n(code, buf, sizeof(buf));
  ERR_clear_error();
  return buf;
}

std::shared_ptr<EVP_PKEY> wrap(EVP_PKEY* key) {
  return std::shared_ptr<EVP_PKEY>(key, detail::PKeyDeleter{});
}

BioPtr memory_bio(std::string_view data) {
  BioPtr bio(BIO_new_mem_buf(data.data(), static_cast<int>(data.size())));
  if (!bio) throw Error(ErrorCode::Internal, "BIO_new_mem_buf failed");
  return bio;
}

std::string drain(BIO* bio) {
  char* data = nullptr;
  long len = BIO_get_mem_data(bio, &data);
  return std::string(data, static_cast<std::size_t>(len));
}

// Pure EdDSA signs the message itself; everything else goes through SHA-256.
const EVP_MD* digest_for(EVP_PKEY* key) {
  int id = EVP_PKEY_get_id(key);
  if (id == EVP_PKEY_ED25519 || id == EVP_PKEY_ED448) return nullptr;
  return EVP_sha256();
}

bool is_base64_char(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '+' ||
         c == '/';
}

}  // namespace

Sha256Digest sha256(ByteView data) {
  Sha256Digest out{};
  SHA256(data.data(), data.size(), out.data());
  return out;
}

std::string to_hex(ByteView data) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (std::uint8_t b : data) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0x0f]);
  }
  return out;
}

std::optional<Bytes> from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) return std::nullopt;
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = nibble(hex[2 * i]);
    int lo = nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

std::string base64_encode(ByteView data) {
  std::string out(4 * ((data.size() + 2) / 3), '\0');
  int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data.data(),
                          static_cast<int>(data.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::optional<Bytes> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) return std::nullopt;
  if (text.empty()) return Bytes{};
  std::size_t padding = 0;
  if (text.back() == '=') ++padding;
  if (text.size() >= 2 && text[text.size() - 2] == '=') ++padding;
  for (std::size_t i = 0; i < text.size() - padding; ++i) {
    if (!is_base64_char(text[i])) return std::nullopt;
  }
  Bytes out(3 * text.size() / 4);
  int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                          static_cast<int>(text.size()));
  if (n < 0) return std::nullopt;
  out.resize(static_cast<std::size_t>(n) - padding);
  // Reject non-canonical encodings whose padding bits are set.
  if (base64_encode(out) != text) return std::nullopt;
  return out;
}

Bytes random_bytes(std::size_t n) {
  Bytes out(n);
  if (n > 0 && RAND_bytes(out.data(), static_cast<int>(n)) != 1) {
    throw Error(ErrorCode::Internal, "RAND_bytes: " + openssl_error());
  }
  return out;
}

// ---------------------------------------------------------------------------
// VerifyKey

VerifyKey VerifyKey::from_pem(std::string_view pem) {
  auto bio = memory_bio(pem);
  EVP_PKEY* key = PEM_read_bio_PUBKEY(bio.get(), nullptr, nullptr, nullptr);
  if (!key) throw Error(ErrorCode::InvalidKey, "cannot parse public key PEM: " + openssl_error());
  return VerifyKey(wrap(key));
}

VerifyKey VerifyKey::from_der(ByteView der) {
  const unsigned char* p = der.data();
  EVP_PKEY* key = d2i_PUBKEY(nullptr, &p, static_cast<long>(der.size()));
  if (!key) throw Error(ErrorCode::InvalidKey, "cannot parse public key DER: " + openssl_error());
  return VerifyKey(wrap(key));
}

VerifyKey VerifyKey::from_evp(EVP_PKEY* key) {
  if (!key || EVP_PKEY_up_ref(key) != 1) throw Error(ErrorCode::InvalidKey, "null key");
  return VerifyKey(wrap(key));
}

Bytes VerifyKey::der() const {
  unsigned char* buf = nullptr;
  int len = i2d_PUBKEY(key_.get(), &buf);
  if (len <= 0) throw Error(ErrorCode::InvalidKey, "i2d_PUBKEY failed: " + openssl_error());
  Bytes out(buf, buf + len);
  OPENSSL_free(buf);
  return out;
}

std::string VerifyKey::pem() const {
  BioPtr bio(BIO_new(BIO_s_mem()));
  if (!bio || PEM_write_bio_PUBKEY(bio.get(), key_.get()) != 1) {
    throw Error(ErrorCode::InvalidKey, "PEM_write_bio_PUBKEY failed: " + openssl_error());
  }
  return drain(bio.get());
}

bool VerifyKey::verify(ByteView message, ByteView signature) const {
  MdCtxPtr ctx(EVP_MD_CTX_new());
  if (!ctx) return false;
  if (EVP_DigestVerifyInit(ctx.get(), nullptr, digest_for(key_.get()), nullptr, key_.get()) != 1) {
    ERR_clear_error();
    return false;
  }
  int rc = EVP_DigestVerify(ctx.get(), signature.data(), signature.size(), message.data(),
                            message.size());
  ERR_clear_error();
  return rc == 1;
}

// ---------------------------------------------------------------------------
// SigningKey

SigningKey SigningKey::generate_ed25519() {
  EVP_PKEY* key = EVP_PKEY_Q_keygen(nullptr, nullptr, "ED25519");
  if (!key) throw Error(ErrorCode::InvalidKey, "Ed25519 keygen failed: " + openssl_error());
  return SigningKey(wrap(key));
}

SigningKey SigningKey::ed25519_from_seed(ByteView seed) {
  if (seed.size() != 32) throw Error(ErrorCode::InvalidKey, "Ed25519 seed must be 32 bytes");
  EVP_PKEY* key =
      EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr, seed.data(), seed.size());
  if (!key) throw Error(ErrorCode::InvalidKey, "cannot load Ed25519 seed: " + openssl_error());
  return SigningKey(wrap(key));
}

SigningKey SigningKey::from_pem(std::string_view pem) {
  auto bio = memory_bio(pem);
  EVP_PKEY* key = PEM_read_bio_PrivateKey(bio.get(), nullptr, nullptr, nullptr);
  if (!key) throw Error(ErrorCode::InvalidKey, "cannot parse private key PEM: " + openssl_error());
  return SigningKey(wrap(key));
}

std::string SigningKey::pem() const {
  BioPtr bio(BIO_new(BIO_s_mem()));
  if (!bio || PEM_write_bio_PrivateKey(bio.get(), key_.get(), nullptr, nullptr, 0, nullptr,
                                       nullptr) != 1) {
    throw Error(ErrorCode::InvalidKey, "PEM_write_bio_PrivateKey failed: " + openssl_error());
  }
  return drain(bio.get());
}

VerifyKey SigningKey::public_key() const {
  // Round-trip through SPKI so the public handle carries no private material.
  unsigned char* buf = nullptr;
  int len = i2d_PUBKEY(key_.get(), &buf);
  if (len <= 0) throw Error(ErrorCode::InvalidKey, "i2d_PUBKEY failed: " + openssl_error());
  Bytes der(buf, buf + len);
  OPENSSL_free(buf);
  return VerifyKey::from_der(der);
}

Bytes SigningKey::sign(ByteView message) const {
  MdCtxPtr ctx(EVP_MD_CTX_new());
  if (!ctx || EVP_DigestSignInit(ctx.get(), nullptr, digest_for(key_.get()), nullptr,
                                 key_.get()) != 1) {
    throw Error(ErrorCode::InvalidKey, "EVP_DigestSignInit failed: " + openssl_error());
  }
  std::size_t len = 0;
  if (EVP_DigestSign(ctx.get(), nullptr, &len, message.data(), message.size()) != 1) {
    throw Error(ErrorCode::InvalidKey, "EVP_DigestSign failed: " + openssl_error());
  }
  Bytes sig(len);
  if (EVP_DigestSign(ctx.get(), sig.data(), &len, message.data(), message.size()) != 1) {
    throw Error(ErrorCode::InvalidKey, "EVP_DigestSign failed: " + openssl_error());
  }
  sig.resize(len);
  return sig;
}

// ---------------------------------------------------------------------------
// Certificate

namespace {

std::shared_ptr<X509> wrap_cert(X509* cert) {
  return std::shared_ptr<X509>(cert, detail::X509Deleter{});
}

void add_extension(X509* cert, X509* issuer, int nid, const char* value) {
  X509V3_CTX ctx;
  X509V3_set_ctx_nodb(&ctx);
  X509V3_set_ctx(&ctx, issuer, cert, nullptr, nullptr, 0);
  X509_EXTENSION* ext = X509V3_EXT_conf_nid(nullptr, &ctx, nid, value);
  if (!ext) throw Error(ErrorCode::Internal, "X509V3_EXT_conf_nid failed: " + openssl_error());
  X509_add_ext(cert, ext, -1);
  X509_EXTENSION_free(ext);
}

std::shared_ptr<X509> new_cert(const VerifyKey& subject_key, const CertificateRequest& req) {
  auto cert = wrap_cert(X509_new());
  if (!cert) throw Error(ErrorCode::Internal, "X509_new failed");
  X509_set_version(cert.get(), 2);
  Bytes serial = random_bytes(16);
  serial[0] &= 0x7f;
  BIGNUM* bn = BN_bin2bn(serial.data(), static_cast<int>(serial.size()), nullptr);
  BN_to_ASN1_INTEGER(bn, X509_get_serialNumber(cert.get()));
  BN_free(bn);

  std::time_t start = req.not_before != 0 ? static_cast<std::time_t>(req.not_before)
                                          : std::time(nullptr) - 60;
  ASN1_TIME_set(X509_getm_notBefore(cert.get()), start);
  ASN1_TIME_set(X509_getm_notAfter(cert.get()),
                start + static_cast<std::time_t>(req.lifetime_seconds));
  X509_set_pubkey(cert.get(), subject_key.native());

  X509_NAME* name = X509_get_subject_name(cert.get());
  X509_NAME_add_entry_by_txt(name, "CN", MBSTRING_UTF8,
                             reinterpret_cast<const unsigned char*>(req.common_name.c_str()), -1,
                             -1, 0);
  return cert;
}

void sign_cert(X509* cert, const SigningKey& key) {
  if (X509_sign(cert, key.native(), digest_for(key.native())) <= 0) {
    throw Error(ErrorCode::Internal, "X509_sign failed: " + openssl_error());
  }
}

}  // namespace

Certificate Certificate::from_pem(std::string_view pem) {
  auto bio = memory_bio(pem);
  X509* cert = PEM_read_bio_X509(bio.get(), nullptr, nullptr, nullptr);
  if (!cert) {
    throw Error(ErrorCode::CertificateInvalid, "cannot parse certificate PEM: " + openssl_error());
  }
  return Certificate(wrap_cert(cert));
}

std::vector<Certificate> Certificate::bundle_from_pem(std::string_view pem) {
  auto bio = memory_bio(pem);
  std::vector<Certificate> out;
  while (X509* cert = PEM_read_bio_X509(bio.get(), nullptr, nullptr, nullptr)) {
    out.push_back(Certificate(wrap_cert(cert)));
  }
  ERR_clear_error();
  if (out.empty()) throw Error(ErrorCode::CertificateInvalid, "no certificate in PEM bundle");
  return out;
}

std::string Certificate::pem() const {
  BioPtr bio(BIO_new(BIO_s_mem()));
  if (!bio || PEM_write_bio_X509(bio.get(), cert_.get()) != 1) {
    throw Error(ErrorCode::Internal, "PEM_write_bio_X509 failed: " + openssl_error());
  }
  return drain(bio.get());
}

VerifyKey Certificate::public_key() const {
  EVP_PKEY* key = X509_get0_pubkey(cert_.get());
  if (!key) throw Error(ErrorCode::CertificateInvalid, "certificate has no usable public key");
  return VerifyKey::from_evp(key);
}

bool Certificate::matches_host(std::string_view host) const {
  std::string h(host);
  if (h.empty()) return false;
  if (X509_check_ip_asc(cert_.get(), h.c_str(), 0) == 1) return true;
  return X509_check_host(cert_.get(), h.data(), h.size(), 0, nullptr) == 1;
}

std::vector<std::string> Certificate::dns_names() const {
  std::vector<std::string> out;
  auto* names = static_cast<GENERAL_NAMES*>(
      X509_get_ext_d2i(cert_.get(), NID_subject_alt_name, nullptr, nullptr));
  if (!names) return out;
  for (int i = 0; i < sk_GENERAL_NAME_num(names); ++i) {
    const GENERAL_NAME* gn = sk_GENERAL_NAME_value(names, i);
    if (gn->type != GEN_DNS) continue;
    const ASN1_IA5STRING* s = gn->d.dNSName;
    out.emplace_back(reinterpret_cast<const char*>(ASN1_STRING_get0_data(s)),
                     static_cast<std::size_t>(ASN1_STRING_length(s)));
  }
  GENERAL_NAMES_free(names);
  return out;
}

bool Certificate::verify_chain(const std::vector<Certificate>& roots,
                               const std::vector<Certificate>& intermediates, std::int64_t at,
                               std::string* why) const {
  std::unique_ptr<X509_STORE, decltype(&X509_STORE_free)> store(X509_STORE_new(),
                                                                 &X509_STORE_free);
  for (const auto& root : roots) X509_STORE_add_cert(store.get(), root.native());

  std::unique_ptr<STACK_OF(X509), void (*)(STACK_OF(X509)*)> chain(
      sk_X509_new_null(), [](STACK_OF(X509)* s) { sk_X509_free(s); });
  for (const auto& c : intermediates) sk_X509_push(chain.get(), c.native());

  std::unique_ptr<X509_STORE_CTX, decltype(&X509_STORE_CTX_free)> ctx(X509_STORE_CTX_new(),
                                                                      &X509_STORE_CTX_free);
  if (X509_STORE_CTX_init(ctx.get(), store.get(), cert_.get(), chain.get()) != 1) {
    if (why) *why = openssl_error();
    return false;
  }
  X509_STORE_CTX_set_time(ctx.get(), 0, static_cast<std::time_t>(at));
  int ok = X509_verify_cert(ctx.get());
  if (ok != 1 && why) {
    *why = X509_verify_cert_error_string(X509_STORE_CTX_get_error(ctx.get()));
  }
  ERR_clear_error();
  return ok == 1;
}

Certificate make_self_signed_ca(const SigningKey& key, const CertificateRequest& req) {
  auto cert = new_cert(key.public_key(), req);
  X509_set_issuer_name(cert.get(), X509_get_subject_name(cert.get()));
  add_extension(cert.get(), cert.get(), NID_basic_constraints, "critical,CA:TRUE");
  add_extension(cert.get(), cert.get(), NID_key_usage, "critical,keyCertSign,cRLSign");
  add_extension(cert.get(), cert.get(), NID_subject_key_identifier, "hash");
  sign_cert(cert.get(), key);
  return Certificate(std::move(cert));
}

Certificate issue_certificate(const Certificate& issuer, const SigningKey& issuer_key,
                              const VerifyKey& subject_key, const CertificateRequest& req) {
  auto cert = new_cert(subject_key, req);
  X509_set_issuer_name(cert.get(), X509_get_subject_name(issuer.native()));
  add_extension(cert.get(), issuer.native(), NID_basic_constraints,
                req.is_ca ? "critical,CA:TRUE" : "critical,CA:FALSE");
  add_extension(cert.get(), issuer.native(), NID_subject_key_identifier, "hash");
  add_extension(cert.get(), issuer.native(), NID_authority_key_identifier, "keyid:always");
  if (!req.dns_names.empty()) {
    std::string san;
    for (const auto& n : req.dns_names) {
      if (!san.empty()) san += ",";
      san += "DNS:" + n;
    }
    add_extension(cert.get(), issuer.native(), NID_subject_alt_name, san.c_str());
  }
  sign_cert(cert.get(), issuer_key);
  return Certificate(std::move(cert));
}

}  // namespace pt
