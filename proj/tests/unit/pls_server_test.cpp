#include <gtest/gtest.h>

#include <json.hpp>
#include <thread>

#include "pt/error.hpp"
#include "pt/file_io.hpp"
#include "pt/pls_server.hpp"
#include "pt/synthetic_corpus.hpp"
#include "testkit.hpp"

namespace pt {
namespace {

using testkit::ManualClock;

const std::string kHtml = "<form><input type=password><button type=submit>Log in</button></form>";

Image brand(std::size_t i) { return synthetic::render_page(synthetic::logged_brands()[i]); }

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::Internal;
}

class PlsTest : public ::testing::Test {
 protected:
  testkit::Pki pki = testkit::make_pki();
  ManualClock clock;
  std::unique_ptr<LogServer> server = testkit::make_server(pki, {}, clock.fn());
  testkit::Owner alpha = testkit::make_owner(pki, "alpha.test");
  testkit::Owner beta = testkit::make_owner(pki, "beta.test");
};

TEST_F(PlsTest, ChallengesAreDistinctAndExpire) {
  auto a = server->issue_challenge("alpha.test");
  auto b = server->issue_challenge("alpha.test");
  EXPECT_EQ(a.nonce.size(), 32u);
  EXPECT_NE(a.nonce, b.nonce);
  EXPECT_EQ(a.expires_at, clock.now() + 300);
}

TEST_F(PlsTest, FirstRegistrationIssuesVerifiableSpt) {
  auto e = testkit::register_page(*server, alpha, "https://alpha.test/login", kHtml, brand(0));
  EXPECT_EQ(e.sequence, 1u);
  EXPECT_EQ(e.domain, "alpha.test");
  EXPECT_EQ(e.logged_at, clock.now());
  auto logs = server->get_logs();
  EXPECT_TRUE(verify_spt(e.spt, "https://alpha.test/login", kHtml, logs));
  EXPECT_EQ(server->check(e.spt, "https://alpha.test/login", kHtml), SptStatus::Verified);
  EXPECT_EQ(check_spt_hashes(e.spt, e.url_hash, e.content_hash, logs), SptStatus::Verified);
}

TEST_F(PlsTest, ExpiredNonce) {
  auto req = testkit::make_request(*server, alpha, "https://alpha.test/", kHtml, testkit::png_bytes(brand(0)));
  clock.advance(301);
  EXPECT_EQ(code_of([&] { server->register_page(req); }), ErrorCode::ChallengeExpired);
  EXPECT_EQ(server->log().size(), 0u);
}

TEST_F(PlsTest, NonceIsSingleUseAndDomainBound) {
  auto req = testkit::make_request(*server, alpha, "https://alpha.test/", kHtml, testkit::png_bytes(brand(0)));
  server->register_page(req);
  EXPECT_EQ(code_of([&] { server->register_page(req); }), ErrorCode::ChallengeInvalid);

  auto other = testkit::make_request(*server, beta, "https://beta.test/", kHtml, testkit::png_bytes(brand(1)));
  auto c = server->issue_challenge("alpha.test");
  other.nonce = c.nonce;
  other.signature = beta.key.sign(c.nonce);
  EXPECT_EQ(code_of([&] { server->register_page(other); }), ErrorCode::ChallengeInvalid);

  auto unknown = testkit::make_request(*server, beta, "https://beta.test/", kHtml, testkit::png_bytes(brand(1)));
  unknown.nonce = Bytes(32, 1);
  unknown.signature = beta.key.sign(unknown.nonce);
  EXPECT_EQ(code_of([&] { server->register_page(unknown); }), ErrorCode::ChallengeInvalid);
}

TEST_F(PlsTest, BadChallengeSignature) {
  auto req = testkit::make_request(*server, alpha, "https://alpha.test/", kHtml, testkit::png_bytes(brand(0)));
  req.signature = beta.key.sign(req.nonce);
  EXPECT_EQ(code_of([&] { server->register_page(req); }), ErrorCode::ChallengeInvalid);
  EXPECT_EQ(server->log().size(), 0u);
}

TEST_F(PlsTest, CertificateChecks) {
  auto req = testkit::make_request(*server, alpha, "https://beta.test/", kHtml, testkit::png_bytes(brand(0)));
  EXPECT_EQ(code_of([&] { server->register_page(req); }), ErrorCode::DomainMismatch);

  auto mismatch = testkit::make_request(*server, alpha, "https://alpha.test/", kHtml, testkit::png_bytes(brand(0)));
  mismatch.domain = "beta.test";
  EXPECT_EQ(code_of([&] { server->register_page(mismatch); }), ErrorCode::DomainMismatch);

  auto rogue_pki = testkit::make_pki("Rogue");
  auto rogue = testkit::make_owner(rogue_pki, "alpha.test");
  auto forged = testkit::make_request(*server, rogue, "https://alpha.test/", kHtml, testkit::png_bytes(brand(0)));
  EXPECT_EQ(code_of([&] { server->register_page(forged); }), ErrorCode::CertificateInvalid);

  auto garbage = testkit::make_request(*server, alpha, "https://alpha.test/", kHtml, testkit::png_bytes(brand(0)));
  garbage.certificate_pem = "junk";
  EXPECT_EQ(code_of([&] { server->register_page(garbage); }), ErrorCode::CertificateInvalid);
  EXPECT_EQ(server->log().size(), 0u);
}

TEST_F(PlsTest, ScreenshotProblems) {
  auto none = testkit::make_request(*server, alpha, "https://alpha.test/", kHtml, std::nullopt);
  EXPECT_EQ(code_of([&] { server->register_page(none); }), ErrorCode::ScreenshotUnavailable);
  auto blank = testkit::make_request(*server, alpha, "https://alpha.test/", kHtml,
                                     testkit::png_bytes(Image(200, 100, 255.0f)));
  EXPECT_EQ(code_of([&] { server->register_page(blank); }), ErrorCode::DegenerateImage);
  auto junk = testkit::make_request(*server, alpha, "https://alpha.test/", kHtml, Bytes{1, 2, 3});
  EXPECT_EQ(code_of([&] { server->register_page(junk); }), ErrorCode::InvalidImage);
}

class FixedRenderer final : public PageRenderer {
 public:
  explicit FixedRenderer(Image img) : img_(std::move(img)) {}
  Image render(std::string_view, std::string_view) override { return img_; }

 private:
  Image img_;
};

TEST_F(PlsTest, RendererSuppliesScreenshot) {
  LogServer s(testkit::seeded_key("r"), {}, {pki.ca}, {}, std::make_unique<FixedRenderer>(brand(2)),
              clock.fn());
  auto e = s.register_page(testkit::make_request(s, alpha, "https://alpha.test/", kHtml, std::nullopt));
  EXPECT_EQ(e.embedding, s.embedder().embed(brand(2)));
}

TEST_F(PlsTest, AdmissionControl) {
  testkit::register_page(*server, alpha, "https://alpha.test/login", kHtml, brand(0));
  EXPECT_EQ(code_of([&] {
              testkit::register_page(*server, beta, "https://beta.test/login", kHtml, brand(0));
            }),
            ErrorCode::SimilarityConflict);
  auto noisy = augment(brand(0), AugmentationSpec::gaussian_noise(5, 3));
  EXPECT_EQ(code_of([&] {
              testkit::register_page(*server, beta, "https://beta.test/login", kHtml, noisy);
            }),
            ErrorCode::SimilarityConflict);
  // Same domain may re-register a near copy of its own page.
  auto again = testkit::register_page(*server, alpha, "https://alpha.test/login", kHtml + "v2", noisy);
  EXPECT_EQ(again.sequence, 2u);
  auto other = testkit::register_page(*server, beta, "https://beta.test/login", kHtml, brand(1));
  EXPECT_EQ(other.sequence, 3u);
}

TEST_F(PlsTest, ConflictMessageHidesForeignDetails) {
  testkit::register_page(*server, alpha, "https://alpha.test/secret-path", kHtml, brand(0));
  try {
    testkit::register_page(*server, beta, "https://beta.test/", kHtml, brand(0));
    FAIL();
  } catch (const Error& e) {
    std::string what = e.what();
    EXPECT_EQ(what.find("alpha"), std::string::npos);
    EXPECT_EQ(what.find("secret"), std::string::npos);
  }
}

TEST_F(PlsTest, ChallengeRateLimit) {
  for (int i = 0; i < 100; ++i) server->issue_challenge("alpha.test");
  EXPECT_EQ(code_of([&] { server->issue_challenge("alpha.test"); }), ErrorCode::RateLimited);
  EXPECT_NO_THROW(server->issue_challenge("beta.test"));
  clock.advance(61);
  EXPECT_NO_THROW(server->issue_challenge("alpha.test"));
}

TEST_F(PlsTest, FallbackVerdicts) {
  testkit::register_page(*server, alpha, "https://alpha.test/login", kHtml, brand(0));
  auto png = testkit::png_bytes(brand(0));
  auto same = server->verify_fallback("https://alpha.test/other", png, "c");
  EXPECT_FALSE(same.phishing);
  EXPECT_EQ(same.matched_domain, "alpha.test");
  auto foreign = server->verify_fallback("https://alpha-login.test/", png, "c");
  EXPECT_TRUE(foreign.phishing);
  EXPECT_EQ(foreign.matched_domain, "alpha.test");
  EXPECT_LT(foreign.distance, foreign.threshold);
  auto unmatched = server->verify_fallback(
      "https://x.test/", testkit::png_bytes(synthetic::render_page(synthetic::unlogged_brands()[0])), "c");
  EXPECT_FALSE(unmatched.phishing);
  EXPECT_FALSE(unmatched.matched_domain);
  EXPECT_EQ(code_of([&] { server->verify_fallback("https://x.test/", Image(64, 64, 0.0f), "c"); }),
            ErrorCode::DegenerateImage);
}

TEST_F(PlsTest, ImportedEntriesAreMatchedAndAudited) {
  testkit::register_page(*server, alpha, "https://alpha.test/login", kHtml, brand(0));
  LogEntry e;
  e.sequence = 42;
  e.domain = "mirror.test";
  e.url = "https://mirror.test/login";
  e.embedding = server->embedder().embed(brand(1));
  server->import_entries({e});
  auto entries = server->audit();
  ASSERT_EQ(entries.size(), 2u);
  EXPECT_EQ(entries[1].sequence, 2u);
  auto v = server->verify_fallback("https://elsewhere.test/", brand(1), "c");
  EXPECT_TRUE(v.phishing);
  EXPECT_EQ(v.matched_domain, "mirror.test");

  e.embedding = BaselineEmbedder().embed(brand(2));
  EXPECT_EQ(code_of([&] { server->import_entries({e}); }), ErrorCode::EmbedderMismatch);
  EXPECT_EQ(server->log().size(), 2u);
}

TEST_F(PlsTest, FallbackRateLimitPerSource) {
  auto img = brand(0);
  for (int i = 0; i < 600; ++i) server->verify_fallback("https://x.test/", img, "10.0.0.1");
  EXPECT_EQ(code_of([&] { server->verify_fallback("https://x.test/", img, "10.0.0.1"); }),
            ErrorCode::RateLimited);
  EXPECT_NO_THROW(server->verify_fallback("https://x.test/", img, "10.0.0.2"));
}

TEST_F(PlsTest, AuditPaginationIsStable) {
  EXPECT_EQ(server->audit().size(), 0u);
  for (std::size_t i = 0; i < 5; ++i) {
    auto owner = testkit::make_owner(pki, "d" + std::to_string(i) + ".test");
    testkit::register_page(*server, owner, "https://d" + std::to_string(i) + ".test/", kHtml, brand(i));
  }
  auto all = server->audit();
  ASSERT_EQ(all.size(), 5u);
  for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i].sequence, i + 1);
  EXPECT_EQ(server->audit_json(), server->audit_json());
  auto page = nlohmann::json::parse(server->audit_json(2, 2));
  ASSERT_EQ(page["entries"].size(), 2u);
  EXPECT_EQ(page["entries"][0]["sequence"], 2);
  EXPECT_EQ(page["next"], 4);
  EXPECT_TRUE(page["entries"][0].contains("content_hash"));
  EXPECT_FALSE(page["entries"][0].contains("html"));
  EXPECT_TRUE(nlohmann::json::parse(server->audit_json(4, 10))["next"].is_null());
}

TEST_F(PlsTest, PeersArePublished) {
  std::vector<LogIdentity> peers{LogIdentity::from_key(testkit::seeded_key("p1").public_key()),
                                 LogIdentity::from_key(testkit::seeded_key("p2").public_key())};
  auto s = testkit::make_server(pki, {}, clock.fn(), peers);
  auto logs = s->get_logs();
  ASSERT_EQ(logs.size(), 3u);
  EXPECT_EQ(logs[0].log_id, s->identity().log_id);
  for (const auto& l : logs) EXPECT_EQ(l.log_id, derive_log_id(l.public_key));
}

TEST_F(PlsTest, ConcurrentRegistrationsKeepInvariant) {
  std::vector<testkit::Owner> owners;
  for (int i = 0; i < 8; ++i) owners.push_back(testkit::make_owner(pki, "c" + std::to_string(i) + ".test"));
  std::vector<std::thread> threads;
  std::atomic<int> ok{0};
  std::atomic<int> conflicts{0};
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&, i] {
      try {
        // Pairs of owners race for the same look.
        testkit::register_page(*server, owners[i], "https://c" + std::to_string(i) + ".test/", kHtml,
                               brand(static_cast<std::size_t>(i / 2)));
        ++ok;
      } catch (const Error& e) {
        if (e.code() == ErrorCode::SimilarityConflict) ++conflicts;
      }
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(ok.load(), 4);
  EXPECT_EQ(conflicts.load(), 4);
  auto snap = server->log().embeddings().snapshot();
  for (std::size_t i = 0; i < snap.size(); ++i) {
    for (std::size_t j = i + 1; j < snap.size(); ++j) {
      if (snap[i].domain == snap[j].domain) continue;
      EXPECT_GE(distance(snap[i].embedding, snap[j].embedding), server->config().threshold);
    }
  }
  auto entries = server->audit(1, 0);
  for (std::size_t i = 0; i < entries.size(); ++i) EXPECT_EQ(entries[i].sequence, i + 1);
}

TEST(PageLog, RestartPreservesEntries) {
  testkit::TempDir dir;
  auto pki = testkit::make_pki();
  auto owner = testkit::make_owner(pki, "alpha.test");
  PlsConfig cfg;
  cfg.data_dir = dir.path();
  std::string spt;
  {
    auto s = testkit::make_server(pki, cfg);
    spt = testkit::register_page(*s, owner, "https://alpha.test/", kHtml, brand(0)).spt;
    testkit::register_page(*s, owner, "https://alpha.test/b", kHtml, brand(0));
  }
  auto s = testkit::make_server(pki, cfg);
  ASSERT_EQ(s->log().size(), 2u);
  EXPECT_EQ(s->audit()[0].spt, spt);
  EXPECT_EQ(s->log().embeddings().size(), 2u);
  EXPECT_EQ(s->log().next_sequence(), 3u);
  auto thief = testkit::make_owner(pki, "thief.test");
  EXPECT_THROW(testkit::register_page(*s, thief, "https://thief.test/", kHtml, brand(0)), Error);
  EXPECT_TRUE(verify_spt(spt, "https://alpha.test/", kHtml, s->get_logs()));
}

TEST(PageLog, OrphanEmbeddingsAreDropped) {
  testkit::TempDir dir;
  {
    PageLog log(dir.path());
    log.append({1, "a.test", "https://a.test/", url_hash("https://a.test/"), std::string(64, '0'), "spt", 1,
                {{1.0, 0.0}, "t"}});
  }
  // An embedding written without its entry (crash between the two writes).
  {
    JsonlEmbeddingBackend backend(dir.path() / "embeddings.jsonl");
    backend.append({"b.test", "https://b.test/", {{0.0, 1.0}, "t"}, 2});
  }
  PageLog log(dir.path());
  EXPECT_EQ(log.size(), 1u);
  EXPECT_EQ(log.embeddings().size(), 1u);
  EXPECT_EQ(log.next_sequence(), 2u);
}

TEST(PageLog, RejectsGaps) {
  PageLog log;
  EXPECT_THROW(log.append({2, "a.test", "u", "", "", "", 0, {{1.0}, "t"}}), Error);
}

TEST(PageLog, EmbedderMismatchOnRestart) {
  testkit::TempDir dir;
  auto pki = testkit::make_pki();
  auto owner = testkit::make_owner(pki, "alpha.test");
  PlsConfig cfg;
  cfg.data_dir = dir.path();
  {
    auto s = testkit::make_server(pki, cfg);
    testkit::register_page(*s, owner, "https://alpha.test/", kHtml, brand(0));
  }
  cfg.embedder = "baseline";
  EXPECT_THROW(testkit::make_server(pki, cfg), Error);
}

TEST(RateLimiter, SlidingWindow) {
  RateLimiter rl(3, 60);
  EXPECT_TRUE(rl.allow("k", 0));
  EXPECT_TRUE(rl.allow("k", 10));
  EXPECT_TRUE(rl.allow("k", 20));
  EXPECT_FALSE(rl.allow("k", 30));
  EXPECT_TRUE(rl.allow("k", 60));
  EXPECT_FALSE(rl.allow("k", 61));
  EXPECT_TRUE(rl.allow("other", 61));
}

TEST(PlsConfig, JsonEnvAndValidation) {
  auto cfg = PlsConfig::from_json(R"({"port": 9000, "data_dir": "data", "threshold": 0.5})", "/srv");
  EXPECT_EQ(cfg.port, 9000);
  EXPECT_EQ(cfg.data_dir, std::filesystem::path("/srv/data"));
  EXPECT_EQ(cfg.threshold, 0.5);
  EXPECT_THROW(PlsConfig::from_json(R"({"prot": 1})"), Error);
  EXPECT_THROW(PlsConfig::from_json(R"({"content_mode": "xml"})"), Error);

  ::setenv("PT_PLS_PORT", "9100", 1);
  ::setenv("PT_PLS_CHALLENGE_LIMIT", "7", 1);
  cfg.apply_env();
  ::unsetenv("PT_PLS_PORT");
  ::unsetenv("PT_PLS_CHALLENGE_LIMIT");
  EXPECT_EQ(cfg.port, 9100);
  EXPECT_EQ(cfg.challenge_limit_per_minute, 7);
  auto back = PlsConfig::from_json(cfg.to_json());
  EXPECT_EQ(back.port, 9100);

  ::setenv("PT_PLS_THRESHOLD", "abc", 1);
  EXPECT_THROW(cfg.apply_env(), Error);
  ::unsetenv("PT_PLS_THRESHOLD");
  cfg.port = 70000;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(PlsConfig, ShippedDefaultMatchesCalibration) {
  auto path = std::filesystem::path(PT_SOURCE_DIR) / "config" / "pls.default.json";
  auto cfg = PlsConfig::from_json(read_file(path), path.parent_path());
  auto golden = nlohmann::json::parse(testkit::read_text(testkit::fixture("golden/calibration.json")));
  EXPECT_NEAR(cfg.threshold, golden[cfg.embedder]["threshold"].get<double>(), 1e-12);
  EXPECT_NEAR(kDefaultSiameseThreshold, cfg.threshold, 1e-12);
  EXPECT_EQ(make_embedder(kDefaultEmbedder)->id(), cfg.embedder);
}

TEST(PlsConfig, FromConfigLoadsKeyRootsPeers) {
  testkit::TempDir dir;
  auto pki = testkit::make_pki();
  auto key = testkit::seeded_key("file");
  write_file_atomic(dir.path() / "pls.key", key.pem());
  write_file_atomic(dir.path() / "roots.pem", pki.ca.pem());
  std::vector<LogIdentity> peers{LogIdentity::from_key(testkit::seeded_key("peer").public_key())};
  write_file_atomic(dir.path() / "peers.json", trusted_logs_to_json(peers));
  auto cfg = PlsConfig::from_json(
      R"({"key_file": "pls.key", "roots_file": "roots.pem", "peers_file": "peers.json", "data_dir": "d"})",
      dir.path());
  auto s = LogServer::from_config(cfg);
  EXPECT_EQ(s->identity().log_id, derive_log_id(key.public_key()));
  EXPECT_EQ(s->get_logs().size(), 2u);
  auto owner = testkit::make_owner(pki, "alpha.test");
  EXPECT_EQ(testkit::register_page(*s, owner, "https://alpha.test/", kHtml, brand(0)).sequence, 1u);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "d" / "entries.jsonl"));
}

}  // namespace
}  // namespace pt
