#include <gtest/gtest.h>

#include "pt/error.hpp"
#include "pt/file_io.hpp"
#include "pt/url.hpp"
#include "testkit.hpp"

namespace pt {
namespace {

TEST(Url, Parse) {
  auto u = Url::parse("HTTPS://Bank.Test:8443/a/b?c=d#frag");
  ASSERT_TRUE(u);
  EXPECT_EQ(u->scheme, "https");
  EXPECT_EQ(u->host, "bank.test");
  EXPECT_EQ(u->port, 8443);
  EXPECT_EQ(u->target.substr(0, 8), "/a/b?c=d");
  EXPECT_EQ(u->origin(), "https://bank.test:8443");
}

TEST(Url, Defaults) {
  auto u = Url::parse("http://a.test");
  ASSERT_TRUE(u);
  EXPECT_EQ(u->port, 80);
  EXPECT_EQ(u->target, "/");
  EXPECT_EQ(u->origin(), "http://a.test");
  EXPECT_EQ(Url::parse("https://a.test/")->port, 443);
  auto v6 = Url::parse("http://[::1]:99/x");
  ASSERT_TRUE(v6);
  EXPECT_EQ(v6->host, "::1");
  EXPECT_EQ(v6->port, 99);
}

TEST(Url, Rejects) {
  EXPECT_FALSE(Url::parse("ftp://a.test/"));
  EXPECT_FALSE(Url::parse("/relative"));
  EXPECT_FALSE(Url::parse("http://"));
  EXPECT_FALSE(Url::parse("http://a.test:notaport/"));
  EXPECT_FALSE(Url::parse("http://a.test:70000/"));
  EXPECT_EQ(url_host("nonsense"), "");
  EXPECT_EQ(url_host("https://user@Shop.Test/x"), "shop.test");
}

TEST(FileIo, AtomicWriteAndRead) {
  testkit::TempDir dir;
  auto p = dir.path() / "f.txt";
  write_file_atomic(p, "one");
  write_file_atomic(p, "two");
  EXPECT_EQ(read_file(p), "two");
  EXPECT_THROW(read_file(dir.path() / "missing"), Error);
}

TEST(ErrorCodes, RoundTripNames) {
  for (int i = 0; i <= static_cast<int>(ErrorCode::Internal); ++i) {
    auto code = static_cast<ErrorCode>(i);
    EXPECT_EQ(error_code_from_string(to_string(code)), code);
  }
  EXPECT_FALSE(error_code_from_string("Nope"));
  Error e(ErrorCode::RateLimited, "slow down");
  EXPECT_STREQ(e.what(), "RateLimited: slow down");
  EXPECT_EQ(e.detail(), "slow down");
}

}  // namespace
}  // namespace pt
