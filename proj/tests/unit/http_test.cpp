#include <gtest/gtest.h>

#include <thread>

#include "local_server.hpp"
#include "relscan/http.hpp"

using namespace relscan;
using relscan::testsupport::LocalServer;
using relscan::testsupport::SelfSigned;
using Clock = std::chrono::steady_clock;

namespace {

Url url(const char* text) { return *Url::parse(text); }

const char* kWeb = R"({
  "sites": {
    "www.a.test": {
      "cors": {"mode": "related", "domain": "a.test", "credentials": true},
      "routes": {
        "/": {"status": 200, "headers": [["content-type", "text/html"], ["set-cookie", "a=1"],
                                         ["set-cookie", "b=2"]], "body": "home"},
        "/q?x=1": {"status": 201, "body": "exact target"},
        "/moved": {"status": 301, "headers": [["location", "/"]]}
      }
    },
    "fallback.a.test": {"default": {"status": 418, "body": "teapot"}},
    "down.a.test": {"fault": "tls"},
    "slow.a.test": {"fault": "timeout"},
    "suffix.b.test": {"cors": {"mode": "suffix", "domain": "b.test"}, "routes": {"/": {}}},
    "substr.b.test": {"cors": {"mode": "substring", "domain": "b.test"}, "routes": {"/": {}}},
    "any.b.test": {"cors": {"mode": "reflect"}, "routes": {"/": {}}},
    "*.wild.test": {"routes": {"/": {"body": "wildcard"}}},
    "exact.wild.test": {"routes": {"/": {"body": "exact"}}}
  }
})";

std::optional<std::string> acao(const FixtureWeb& web, const char* target, const char* origin) {
  auto r = web.respond(url(target), {{"origin", origin}});
  return header_value(r.response.headers, "access-control-allow-origin");
}

}  // namespace

TEST(Headers, LookupIsByLowercaseName) {
  HeaderList h = {{"set-cookie", "a=1"}, {"x", "y"}, {"set-cookie", "b=2"}};
  EXPECT_EQ(header_value(h, "set-cookie"), "a=1");
  EXPECT_EQ(header_values(h, "set-cookie").size(), 2u);
  EXPECT_FALSE(header_value(h, "missing"));
}

TEST(FixtureWeb, RoutesAndFallbacks) {
  auto web = FixtureWeb::load(kWeb);
  auto home = web.respond(url("http://www.a.test/"), {});
  ASSERT_TRUE(home.ok());
  EXPECT_EQ(home.response.status, 200);
  EXPECT_EQ(home.response.body, "home");
  EXPECT_EQ(header_values(home.response.headers, "set-cookie").size(), 2u);
  EXPECT_EQ(web.respond(url("http://www.a.test/q?x=1"), {}).response.status, 201);
  EXPECT_EQ(web.respond(url("http://www.a.test/missing"), {}).response.status, 404);
  EXPECT_EQ(web.respond(url("http://fallback.a.test/any/path"), {}).response.status, 418);
  auto unknown = web.respond(url("http://nowhere.test/"), {});
  EXPECT_EQ(unknown.error, HttpError::kNetwork);
}

TEST(FixtureWeb, Faults) {
  auto web = FixtureWeb::load(kWeb);
  EXPECT_EQ(web.respond(url("https://down.a.test/"), {}).error, HttpError::kTls);
  EXPECT_EQ(web.respond(url("https://slow.a.test/"), {}).error, HttpError::kTimeout);
  EXPECT_THROW(FixtureWeb::load(R"({"sites": {"x": {"fault": "weird"}}})"), std::runtime_error);
  EXPECT_THROW(FixtureWeb::load("{not json"), std::exception);
}

TEST(FixtureWeb, WildcardSites) {
  auto web = FixtureWeb::load(kWeb);
  EXPECT_EQ(web.respond(url("http://random.wild.test/"), {}).response.body, "wildcard");
  EXPECT_EQ(web.respond(url("http://a.b.wild.test/"), {}).response.body, "wildcard");
  EXPECT_EQ(web.respond(url("http://exact.wild.test/"), {}).response.body, "exact");
  EXPECT_FALSE(web.respond(url("http://wild.test/"), {}).ok());
}

TEST(FixtureWeb, CorsValidators) {
  auto web = FixtureWeb::load(kWeb);
  EXPECT_EQ(acao(web, "http://www.a.test/", "https://x.a.test"), "https://x.a.test");
  EXPECT_FALSE(acao(web, "http://www.a.test/", "https://evila.test"));
  auto cred = web.respond(url("http://www.a.test/"), {{"origin", "https://a.test"}});
  EXPECT_EQ(header_value(cred.response.headers, "access-control-allow-credentials"), "true");

  EXPECT_TRUE(acao(web, "http://suffix.b.test/", "https://evilb.test"));
  EXPECT_FALSE(acao(web, "http://suffix.b.test/", "https://b.test.evil.test"));
  EXPECT_TRUE(acao(web, "http://substr.b.test/", "https://b.test.evil.test"));
  EXPECT_FALSE(acao(web, "http://substr.b.test/", "https://other.test"));
  EXPECT_TRUE(acao(web, "http://any.b.test/", "https://other.test"));
  EXPECT_FALSE(acao(web, "http://www.a.test/", "null"));
}

TEST(RateLimiter, SpacesRequestsPerHost) {
  RateLimiter limiter(20.0);  // 50 ms
  std::vector<Clock::time_point> a, b;
  const auto start = Clock::now();
  std::thread other([&] {
    for (int i = 0; i < 4; ++i) limiter.run("b", [&] { b.push_back(Clock::now()); });
  });
  for (int i = 0; i < 4; ++i) limiter.run("a", [&] { a.push_back(Clock::now()); });
  other.join();
  for (const auto* times : {&a, &b}) {
    for (std::size_t i = 1; i < times->size(); ++i)
      EXPECT_GE((*times)[i] - (*times)[i - 1], std::chrono::milliseconds(49));
  }
  // Hosts do not wait for each other: 4 requests each take ~150 ms, not ~350.
  EXPECT_LT(Clock::now() - start, std::chrono::milliseconds(300));
  EXPECT_THROW(RateLimiter(0.0), std::invalid_argument);
}

TEST(RecordingClient, LogsGetsWithOrigin) {
  auto web = std::make_shared<FixtureWeb>(FixtureWeb::load(kWeb));
  FixtureHttpClient fixture(web);
  RecordingClient recorder(fixture);
  RateLimitedClient limited(recorder, std::make_shared<RateLimiter>(100.0));
  limited.get({url("http://www.a.test/"), {{"origin", "https://x.a.test"}}});
  limited.get({url("http://www.a.test/moved"), {}});
  auto log = recorder.log();
  ASSERT_EQ(log.size(), 2u);
  EXPECT_EQ(log[0].method, "GET");
  EXPECT_EQ(log[0].origin_header, "https://x.a.test");
  EXPECT_EQ(log[1].url, "http://www.a.test/moved");
}

TEST(NetworkHttpClient, TalksToLocalServer) {
  httplib::Server server;
  std::string seen_host, seen_agent, seen_method;
  server.Get("/", [&](const httplib::Request& req, httplib::Response& res) {
    seen_host = req.get_header_value("Host");
    seen_agent = req.get_header_value("User-Agent");
    seen_method = req.method;
    res.set_header("X-Test", "yes");
    res.set_content(std::string(1000, 'x'), "text/plain");
  });
  server.Get("/redirect", [](const httplib::Request&, httplib::Response& res) {
    res.status = 302;
    res.set_header("Location", "/");
  });
  LocalServer local(server);

  HttpOptions options;
  options.http_connect = local.address();
  options.body_cap = 100;
  NetworkHttpClient client(options);
  auto r = client.get({url("http://www.example.test/"), {}});
  ASSERT_TRUE(r.ok()) << r.detail;
  EXPECT_EQ(r.response.status, 200);
  EXPECT_EQ(header_value(r.response.headers, "x-test"), "yes");
  EXPECT_EQ(r.response.body.size(), 100u);
  EXPECT_TRUE(r.response.body_truncated);
  EXPECT_EQ(seen_host, "www.example.test");
  EXPECT_EQ(seen_method, "GET");
  EXPECT_NE(seen_agent.find("relscan"), std::string::npos);

  auto redirect = client.get({url("http://www.example.test/redirect"), {}});
  ASSERT_TRUE(redirect.ok());
  EXPECT_EQ(redirect.response.status, 302);
  EXPECT_EQ(header_value(redirect.response.headers, "location"), "/");
}

TEST(NetworkHttpClient, ConnectionRefused) {
  HttpOptions options;
  options.http_connect = "127.0.0.1:1";
  options.timeout = std::chrono::milliseconds(1000);
  auto r = NetworkHttpClient(options).get({url("http://www.example.test/"), {}});
  EXPECT_EQ(r.error, HttpError::kNetwork);
  EXPECT_FALSE(r.detail.empty());
}

TEST(NetworkHttpClient, UntrustedCertificateIsTlsError) {
  SelfSigned cert;
  httplib::SSLServer server(cert.cert_path.c_str(), cert.key_path.c_str());
  ASSERT_TRUE(server.is_valid());
  server.Get("/", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("secret", "text/plain");
  });
  LocalServer local(server);

  HttpOptions options;
  options.https_connect = local.address();
  options.timeout = std::chrono::milliseconds(3000);
  auto strict = NetworkHttpClient(options).get({url("https://localhost/"), {}});
  EXPECT_EQ(strict.error, HttpError::kTls) << strict.detail;

  options.verify_tls = false;
  auto lax = NetworkHttpClient(options).get({url("https://localhost/"), {}});
  ASSERT_TRUE(lax.ok()) << lax.detail;
  EXPECT_EQ(lax.response.body, "secret");
}
