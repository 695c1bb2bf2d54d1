#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "relscan/url.hpp"

namespace relscan {

// Header names are stored lowercase; order and repetition are preserved.
using HeaderList = std::vector<std::pair<std::string, std::string>>;

std::optional<std::string> header_value(const HeaderList& headers,
                                        std::string_view name);
std::vector<std::string> header_values(const HeaderList& headers,
                                       std::string_view name);

// There is no method field: the client layer only ever issues GET.
struct HttpRequest {
  Url url;
  HeaderList headers;
};

enum class HttpError : std::uint8_t { kNone, kNetwork, kTls, kTimeout };
std::string_view to_string(HttpError error);

struct HttpResponse {
  int status = 0;
  HeaderList headers;
  std::string body;
  bool body_truncated = false;
};

struct HttpResult {
  HttpError error = HttpError::kNone;
  std::string detail;
  HttpResponse response;

  bool ok() const { return error == HttpError::kNone; }
};

class HttpClient {
 public:
  virtual ~HttpClient() = default;
  virtual HttpResult get(const HttpRequest& request) const = 0;
};

struct HttpOptions {
  std::string user_agent =
      "relscan/1.0 (related-domain security research; +https://relscan.invalid/optout)";
  std::chrono::milliseconds timeout{10000};
  std::size_t body_cap = 256 * 1024;
  bool verify_tls = true;
  // Connect here instead of resolving the URL host ("address:port"). The
  // Host header and TLS SNI still carry the URL host.
  std::string http_connect;
  std::string https_connect;
};

// Live client over cpp-httplib. Never follows redirects itself.
class NetworkHttpClient : public HttpClient {
 public:
  explicit NetworkHttpClient(HttpOptions options = {});
  HttpResult get(const HttpRequest& request) const override;

 private:
  HttpOptions options_;
};

// A static web described by JSON, for offline scans and local test servers.
//
// {
//   "sites": {
//     "<host>": {
//       "fault": "network" | "tls" | "timeout",          optional
//       "cors": {"mode": "related"|"suffix"|"substring"|"reflect",
//                "domain": "<name>", "credentials": bool},  optional
//       "routes": {"<path>": {"status": 200,
//                             "headers": [["name", "value"], ...],
//                             "body": "..."}},
//       "default": {...}                                      optional
//     }
//   }
// }
//
// A "*.<name>" site answers for every host below <name> that has no site of
// its own. Unknown hosts fail with a network error; unknown paths answer 404 unless a
// "default" route is given.
class FixtureWeb {
 public:
  // Throws std::runtime_error on malformed JSON.
  static FixtureWeb load(std::string_view json_text);
  static FixtureWeb load_file(const std::string& path);

  HttpResult respond(const Url& url, const HeaderList& request_headers) const;
  bool has_site(const std::string& host) const { return sites_.contains(host); }

 private:
  struct Route {
    int status = 200;
    HeaderList headers;
    std::string body;
  };
  struct Cors {
    std::string mode;
    std::string domain;
    bool credentials = false;
  };
  struct Site {
    HttpError fault = HttpError::kNone;
    std::optional<Cors> cors;
    std::map<std::string, Route> routes;
    std::optional<Route> fallback;
  };
  std::map<std::string, Site> sites_;
};

class FixtureHttpClient : public HttpClient {
 public:
  explicit FixtureHttpClient(std::shared_ptr<const FixtureWeb> web)
      : web_(std::move(web)) {}
  HttpResult get(const HttpRequest& request) const override {
    return web_->respond(request.url, request.headers);
  }

 private:
  std::shared_ptr<const FixtureWeb> web_;
};

// Per-host token bucket with burst 1: successive requests to one host are
// spaced at least 1/rate apart, and at most one is in flight per host.
class RateLimiter {
 public:
  explicit RateLimiter(double requests_per_second);

  // Runs |action| once the host's slot is due, holding the host's lock.
  template <typename F>
  auto run(const std::string& host, F&& action) {
    Slot& slot = slot_for(host);
    std::lock_guard<std::mutex> lock(slot.busy);
    wait_turn(slot);
    return action();
  }

  double rate() const { return rate_; }

 private:
  struct Slot {
    std::mutex busy;
    std::chrono::steady_clock::time_point next{};
  };
  Slot& slot_for(const std::string& host);
  void wait_turn(Slot& slot);

  double rate_;
  std::chrono::nanoseconds interval_;
  std::mutex map_mutex_;
  std::map<std::string, std::unique_ptr<Slot>> slots_;
};

class RateLimitedClient : public HttpClient {
 public:
  RateLimitedClient(const HttpClient& inner, std::shared_ptr<RateLimiter> limiter)
      : inner_(inner), limiter_(std::move(limiter)) {}
  HttpResult get(const HttpRequest& request) const override;

 private:
  const HttpClient& inner_;
  std::shared_ptr<RateLimiter> limiter_;
};

struct RecordedRequest {
  std::string method;
  std::string url;
  std::string origin_header;
  std::chrono::steady_clock::time_point at;
};

// Logs every request that reaches the wrapped client.
class RecordingClient : public HttpClient {
 public:
  explicit RecordingClient(const HttpClient& inner) : inner_(inner) {}
  HttpResult get(const HttpRequest& request) const override;
  std::vector<RecordedRequest> log() const;

 private:
  const HttpClient& inner_;
  mutable std::mutex mutex_;
  mutable std::vector<RecordedRequest> log_;
};

}  // namespace relscan
