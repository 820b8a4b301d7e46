#include <gtest/gtest.h>

#include <atomic>
#include <json.hpp>
#include <thread>

#include "pt/client_verifier.hpp"
#include "pt/error.hpp"
#include "pt/file_io.hpp"
#include "pt/synthetic_corpus.hpp"
#include "testkit.hpp"

namespace pt {
namespace {

const std::string kLoginUrl = "https://alpha.test/login";

std::string login_html() { return testkit::read_text(testkit::fixture("demo_site/login.html")); }
std::string index_html() { return testkit::read_text(testkit::fixture("demo_site/index.html")); }
Bytes login_png() { return testkit::read_bytes(testkit::fixture("demo_site/login.png")); }

FetchedPage page_with(std::string url, std::string html, std::vector<std::string> spts = {}) {
  FetchedPage p;
  p.url = std::move(url);
  p.status = 200;
  p.html = std::move(html);
  for (auto& s : spts) p.headers.add("spt-header", s);
  return p;
}

class DownPls final : public PlsClient {
 public:
  Challenge challenge(std::string_view) override { throw Error(ErrorCode::NetworkError, "down"); }
  std::string register_page(const RegistrationRequest&) override {
    throw Error(ErrorCode::NetworkError, "down");
  }
  std::vector<LogIdentity> get_logs() override {
    ++calls;
    throw Error(ErrorCode::NetworkError, "down");
  }
  FallbackVerdict verify_screenshot(std::string_view, ByteView) override {
    throw Error(ErrorCode::NetworkError, "down");
  }
  int calls = 0;
};

class GateTest : public ::testing::Test {
 protected:
  void SetUp() override {
    auto png = login_png();
    spt = owner_register(client, alpha.credentials(), kLoginUrl, login_html(), png);
    logs = server->get_logs();
  }

  testkit::Pki pki = testkit::make_pki();
  std::unique_ptr<LogServer> server = testkit::make_server(pki);
  LocalPlsClient client{*server};
  testkit::Owner alpha = testkit::make_owner(pki, "alpha.test");
  FixtureCapturer capturer{testkit::fixture("demo_site/login.png")};
  std::string spt;
  std::vector<LogIdentity> logs;
};

TEST_F(GateTest, NotLoginRendersRegardlessOfHeaders) {
  for (auto headers : {std::vector<std::string>{}, std::vector<std::string>{"junk"}, std::vector{spt}}) {
    auto d = gate(page_with("https://alpha.test/", index_html(), headers), logs, client, &capturer);
    EXPECT_EQ(d.action, RenderAction::Render);
    EXPECT_EQ(d.reason, RenderReason::NotLogin);
  }
}

TEST_F(GateTest, VerifiedSpt) {
  auto d = gate(page_with(kLoginUrl, login_html(), {spt}), logs, client, &capturer);
  EXPECT_EQ(d.action, RenderAction::Render);
  EXPECT_EQ(d.reason, RenderReason::SptVerified);
  ASSERT_TRUE(d.detection);
  EXPECT_TRUE(d.detection->is_login);
}

TEST_F(GateTest, MissingHeaderBlocks) {
  auto d = gate(page_with(kLoginUrl, login_html()), logs, client, &capturer);
  EXPECT_EQ(d.action, RenderAction::Block);
  EXPECT_EQ(d.reason, RenderReason::NoSptHeader);
}

TEST_F(GateTest, UnknownLogAndMalformedBlock) {
  auto forged = create_spt(kLoginUrl, login_html(), testkit::seeded_key("rogue"), 1700000000);
  auto d = gate(page_with(kLoginUrl, login_html(), {forged}), logs, client, &capturer);
  EXPECT_EQ(d.action, RenderAction::Block);
  EXPECT_EQ(d.reason, RenderReason::UnknownLogId);
  d = gate(page_with(kLoginUrl, login_html(), {"@@@"}), logs, client, &capturer);
  EXPECT_EQ(d.action, RenderAction::Block);
  EXPECT_EQ(d.reason, RenderReason::UnknownLogId);
}

TEST_F(GateTest, StaleContentFallsBackSafeOnOwnDomain) {
  auto html = login_html() + "<p>Updated notice</p>";
  auto d = gate(page_with(kLoginUrl, html, {spt}), logs, client, &capturer);
  EXPECT_EQ(d.action, RenderAction::Render);
  EXPECT_EQ(d.reason, RenderReason::FallbackSafe);
  ASSERT_TRUE(d.fallback);
  EXPECT_EQ(d.fallback->matched_domain, "alpha.test");
}

TEST_F(GateTest, ClonedPageOnOtherDomainIsPhishing) {
  auto d = gate(page_with("https://alpha-secure.test/login", login_html(), {spt}), logs, client, &capturer);
  EXPECT_EQ(d.action, RenderAction::Block);
  EXPECT_EQ(d.reason, RenderReason::FallbackPhishing);
}

TEST_F(GateTest, UnmatchedScreenshotIsSafe) {
  auto page = page_with("https://other.test/login", login_html(), {spt});
  page.screenshot_png = encode_png(synthetic::render_page(synthetic::unlogged_brands()[2]));
  auto d = gate(page, logs, client, nullptr);
  EXPECT_EQ(d.reason, RenderReason::FallbackSafe);
  EXPECT_FALSE(d.fallback->matched_domain);
}

TEST_F(GateTest, UnreachableFailsClosedByDefault) {
  DownPls down;
  auto page = page_with(kLoginUrl, login_html() + "x", {spt});
  auto d = gate(page, logs, down, &capturer);
  EXPECT_EQ(d.action, RenderAction::Block);
  EXPECT_EQ(d.reason, RenderReason::FallbackUnreachable);
  GateConfig open;
  open.fail_closed = false;
  d = gate(page, logs, down, &capturer, open);
  EXPECT_EQ(d.action, RenderAction::Render);
  EXPECT_EQ(d.reason, RenderReason::FallbackUnreachable);
}

TEST_F(GateTest, NoScreenshotSourceIsUnreachable) {
  auto d = gate(page_with(kLoginUrl, login_html() + "x", {spt}), logs, client, nullptr);
  EXPECT_EQ(d.reason, RenderReason::FallbackUnreachable);
  FixtureCapturer missing{testkit::fixture("demo_site/missing.png")};
  d = gate(page_with(kLoginUrl, login_html() + "x", {spt}), logs, client, &missing);
  EXPECT_EQ(d.reason, RenderReason::FallbackUnreachable);
  EXPECT_EQ(d.action, RenderAction::Block);
}

TEST_F(GateTest, FirstOfDuplicateHeadersWins) {
  auto d = gate(page_with(kLoginUrl, login_html(), {spt, "junk"}), logs, client, &capturer);
  EXPECT_EQ(d.reason, RenderReason::SptVerified);
  EXPECT_NE(d.detail.find("2 SPT-Header values"), std::string::npos);
  d = gate(page_with(kLoginUrl, login_html(), {"junk", spt}), logs, client, &capturer);
  EXPECT_EQ(d.reason, RenderReason::UnknownLogId);
}

TEST_F(GateTest, BlockIffBlockingReason) {
  // Every reachable decision obeys the action/reason pairing.
  std::vector<RenderDecision> ds;
  DownPls down;
  ds.push_back(gate(page_with("https://alpha.test/", index_html()), logs, client, &capturer));
  ds.push_back(gate(page_with(kLoginUrl, login_html(), {spt}), logs, client, &capturer));
  ds.push_back(gate(page_with(kLoginUrl, login_html()), logs, client, &capturer));
  ds.push_back(gate(page_with(kLoginUrl, login_html(), {"x"}), logs, client, &capturer));
  ds.push_back(gate(page_with("https://b.test/login", login_html(), {spt}), logs, client, &capturer));
  ds.push_back(gate(page_with(kLoginUrl, login_html() + "x", {spt}), logs, client, &capturer));
  ds.push_back(gate(page_with(kLoginUrl, login_html() + "x", {spt}), logs, down, &capturer));
  for (const auto& d : ds) {
    bool blocking = d.reason == RenderReason::NoSptHeader || d.reason == RenderReason::UnknownLogId ||
                    d.reason == RenderReason::FallbackPhishing ||
                    d.reason == RenderReason::FallbackUnreachable;
    EXPECT_EQ(d.action == RenderAction::Block, blocking) << to_string(d.reason);
  }
}

TEST_F(GateTest, DecisionJson) {
  auto d = gate(page_with("https://b.test/login", login_html(), {spt}), logs, client, &capturer);
  auto j = nlohmann::json::parse(d.to_json());
  EXPECT_EQ(j["action"], "BLOCK");
  EXPECT_EQ(j["reason"], "FALLBACK_PHISHING");
  EXPECT_EQ(j["fallback"]["matched_domain"], "alpha.test");
  EXPECT_EQ(j["login_threshold"], 75);
}

TEST_F(GateTest, OwnerRegisterPersistsAndPropagates) {
  testkit::TempDir dir;
  auto page = dir.path() / "login.html";
  auto png = encode_png(synthetic::render_page(synthetic::logged_brands()[5]));
  auto beta = testkit::make_owner(pki, "beta.test");
  auto s = owner_register(client, beta.credentials(), "https://beta.test/login", login_html(), png,
                          spt_path_for(page));
  EXPECT_EQ(read_file(dir.path() / "login.html.spt"), s + "\n");
  try {
    owner_register(client, beta.credentials(), "https://gamma.test/login", login_html(), png);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DomainMismatch);
  }
  auto gamma = testkit::make_owner(pki, "gamma.test");
  try {
    owner_register(client, gamma.credentials(), "https://gamma.test/login", login_html(), png);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SimilarityConflict);
  }
}

TEST(HeaderMap, CaseInsensitive) {
  HeaderMap h;
  h.add("SPT-Header", "a");
  h.add("Content-Type", "text/html");
  h.add("spt-header", "b");
  EXPECT_EQ(h.get("Spt-HEADER"), "a");
  EXPECT_EQ(h.get_all("spt-header"), (std::vector<std::string>{"a", "b"}));
  EXPECT_FALSE(h.get("missing"));
}

TEST(RenderEnums, Names) {
  EXPECT_EQ(to_string(RenderAction::Render), "RENDER");
  EXPECT_EQ(to_string(RenderAction::Block), "BLOCK");
  EXPECT_EQ(to_string(RenderReason::NotLogin), "NOT_LOGIN");
  EXPECT_EQ(to_string(RenderReason::SptVerified), "SPT_VERIFIED");
  EXPECT_EQ(to_string(RenderReason::NoSptHeader), "NO_SPT_HEADER");
  EXPECT_EQ(to_string(RenderReason::UnknownLogId), "UNKNOWN_LOG_ID");
  EXPECT_EQ(to_string(RenderReason::FallbackPhishing), "FALLBACK_PHISHING");
  EXPECT_EQ(to_string(RenderReason::FallbackSafe), "FALLBACK_SAFE");
  EXPECT_EQ(to_string(RenderReason::FallbackUnreachable), "FALLBACK_UNREACHABLE");
}

TEST(TrustedLogCache, RefreshesAfterTtl) {
  testkit::TempDir dir;
  auto pki = testkit::make_pki();
  auto server = testkit::make_server(pki);
  LocalPlsClient client(*server);
  testkit::ManualClock clock(1000);
  TrustedLogCache cache(dir.path() / "logs.json", 60, clock.fn());
  EXPECT_TRUE(cache.cached().empty());
  auto first = cache.get(client);
  ASSERT_EQ(first.size(), 1u);
  EXPECT_EQ(cache.cached().size(), 1u);

  DownPls down;
  clock.advance(30);
  EXPECT_EQ(cache.get(down).size(), 1u);
  EXPECT_EQ(down.calls, 0);
  clock.advance(60);
  // Stale but the refresh fails: the cached list is still served.
  EXPECT_EQ(cache.get(down).size(), 1u);
  EXPECT_EQ(down.calls, 1);

  TrustedLogCache empty(dir.path() / "none.json", 60, clock.fn());
  EXPECT_THROW(empty.get(down), Error);
}

class CountingPls final : public PlsClient {
 public:
  explicit CountingPls(LogServer& s) : inner_(s) {}
  Challenge challenge(std::string_view d) override { return inner_.challenge(d); }
  std::string register_page(const RegistrationRequest& r) override { return inner_.register_page(r); }
  std::vector<LogIdentity> get_logs() override {
    ++calls;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    return inner_.get_logs();
  }
  FallbackVerdict verify_screenshot(std::string_view u, ByteView p) override {
    return inner_.verify_screenshot(u, p);
  }
  std::atomic<int> calls{0};

 private:
  LocalPlsClient inner_;
};

TEST(TrustedLogCache, SingleFlight) {
  testkit::TempDir dir;
  auto pki = testkit::make_pki();
  auto server = testkit::make_server(pki);
  CountingPls pls(*server);
  TrustedLogCache cache(dir.path() / "logs.json", 3600);
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) threads.emplace_back([&] { cache.get(pls); });
  for (auto& t : threads) t.join();
  EXPECT_EQ(pls.calls.load(), 1);
}

TEST(ClientConfig, JsonAndEnv) {
  auto c = ClientConfig::from_json(
      R"({"pls_url": "http://127.0.0.1:1", "trusted_logs": "logs.json", "fail_closed": false,
          "detection": {"login_threshold": 80}})",
      "/etc/pt");
  EXPECT_EQ(c.pls_url, "http://127.0.0.1:1");
  EXPECT_EQ(c.trusted_logs, std::filesystem::path("/etc/pt/logs.json"));
  EXPECT_FALSE(c.gate.fail_closed);
  EXPECT_EQ(c.gate.detection.login_threshold, 80);
  EXPECT_THROW(ClientConfig::from_json(R"({"timeout_ms": 0})"), Error);
  EXPECT_THROW(ClientConfig::from_json(R"({"bogus": 1})"), Error);

  ::setenv("PT_FAIL_CLOSED", "1", 1);
  ::setenv("PT_LOGIN_THRESHOLD", "90", 1);
  ::setenv("PT_TIMEOUT_MS", "1234", 1);
  c.apply_env();
  ::unsetenv("PT_FAIL_CLOSED");
  ::unsetenv("PT_LOGIN_THRESHOLD");
  ::unsetenv("PT_TIMEOUT_MS");
  EXPECT_TRUE(c.gate.fail_closed);
  EXPECT_EQ(c.gate.detection.login_threshold, 90);
  EXPECT_EQ(c.timeout_ms, 1234);
}

TEST(ClientConfig, ShippedExampleLoads) {
  auto path = std::filesystem::path(PT_SOURCE_DIR) / "config" / "client.example.json";
  auto c = ClientConfig::from_json(read_file(path), path.parent_path());
  EXPECT_TRUE(c.gate.fail_closed);
  EXPECT_FALSE(c.pls_url.empty());
}

}  // namespace
}  // namespace pt
