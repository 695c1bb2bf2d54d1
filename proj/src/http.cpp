#include "relscan/http.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "relscan/domain.hpp"

namespace relscan {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::pair<std::string, int> split_address(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos) return {address, 0};
  return {address.substr(0, colon), std::stoi(address.substr(colon + 1))};
}

HttpError map_error(httplib::Error error) {
  switch (error) {
    case httplib::Error::SSLConnection:
    case httplib::Error::SSLLoadingCerts:
    case httplib::Error::SSLServerVerification:
      return HttpError::kTls;
    case httplib::Error::ConnectionTimeout:
      return HttpError::kTimeout;
    default:
      return HttpError::kNetwork;
  }
}

}  // namespace

std::optional<std::string> header_value(const HeaderList& headers,
                                        std::string_view name) {
  for (const auto& [key, value] : headers) {
    if (key == name) return value;
  }
  return std::nullopt;
}

std::vector<std::string> header_values(const HeaderList& headers,
                                       std::string_view name) {
  std::vector<std::string> out;
  for (const auto& [key, value] : headers) {
    if (key == name) out.push_back(value);
  }
  return out;
}

std::string_view to_string(HttpError error) {
  switch (error) {
    case HttpError::kNone: return "none";
    case HttpError::kNetwork: return "network-error";
    case HttpError::kTls: return "tls-error";
    case HttpError::kTimeout: return "timeout";
  }
  return "?";
}

NetworkHttpClient::NetworkHttpClient(HttpOptions options)
    : options_(std::move(options)) {}

HttpResult NetworkHttpClient::get(const HttpRequest& request) const {
  const Origin& origin = request.url.origin;
  const bool https = origin.scheme == "https";
  const std::string& connect = https ? options_.https_connect : options_.http_connect;

  int port = origin.port;
  std::map<std::string, std::string> addr_map;
  if (!connect.empty()) {
    auto [address, connect_port] = split_address(connect);
    addr_map[origin.host] = address;
    if (connect_port != 0) port = connect_port;
  }

  httplib::Client client(origin.scheme + "://" + origin.host + ":" +
                         std::to_string(port));
  client.set_hostname_addr_map(addr_map);
  const auto seconds =
      std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout);
  client.set_connection_timeout(seconds);
  client.set_read_timeout(seconds);
  client.set_write_timeout(seconds);
  client.set_follow_location(false);
  client.set_keep_alive(false);
  client.enable_server_certificate_verification(options_.verify_tls);

  httplib::Headers headers;
  headers.emplace("User-Agent", options_.user_agent);
  headers.emplace("Host", origin.port == default_port(origin.scheme)
                              ? origin.host
                              : origin.host + ":" + std::to_string(origin.port));
  for (const auto& [key, value] : request.headers) headers.emplace(key, value);

  HttpResult result;
  auto& response = result.response;
  const std::size_t cap = options_.body_cap;
  auto outcome = client.Get(
      request.url.target, headers,
      [&](const httplib::Response& r) {
        response.status = r.status;
        for (const auto& [key, value] : r.headers) {
          response.headers.emplace_back(lower(key), value);
        }
        return true;
      },
      [&](const char* data, std::size_t length) {
        const std::size_t room = cap - std::min(cap, response.body.size());
        response.body.append(data, std::min(room, length));
        if (length > room) {
          response.body_truncated = true;
          return false;
        }
        return true;
      });

  if (!outcome) {
    if (response.body_truncated && response.status != 0) return result;
    result.error = map_error(outcome.error());
    result.detail = httplib::to_string(outcome.error());
    if (outcome.error() == httplib::Error::SSLServerVerification) {
      result.detail += " (verify result " +
                       std::to_string(client.get_openssl_verify_result()) + ")";
    }
    result.response = {};
  }
  return result;
}

FixtureWeb FixtureWeb::load(std::string_view json_text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("fixture web: ") + e.what());
  }
  auto route_of = [](const json& j) {
    Route route;
    route.status = j.value("status", 200);
    if (j.contains("headers")) {
      for (const auto& pair : j.at("headers")) {
        route.headers.emplace_back(lower(pair.at(0).get<std::string>()),
                                   pair.at(1).get<std::string>());
      }
    }
    route.body = j.value("body", "");
    return route;
  };

  FixtureWeb web;
  try {
    for (const auto& [host, spec] : doc.at("sites").items()) {
      Site site;
      if (spec.contains("fault")) {
        const std::string fault = spec.at("fault");
        if (fault == "network") {
          site.fault = HttpError::kNetwork;
        } else if (fault == "tls") {
          site.fault = HttpError::kTls;
        } else if (fault == "timeout") {
          site.fault = HttpError::kTimeout;
        } else {
          throw std::runtime_error("fixture web: unknown fault '" + fault + "'");
        }
      }
      if (spec.contains("cors")) {
        const auto& c = spec.at("cors");
        site.cors = Cors{c.at("mode").get<std::string>(), c.value("domain", ""),
                         c.value("credentials", false)};
      }
      if (spec.contains("routes")) {
        for (const auto& [path, route] : spec.at("routes").items()) {
          site.routes[path] = route_of(route);
        }
      }
      if (spec.contains("default")) site.fallback = route_of(spec.at("default"));
      web.sites_[lower(host)] = std::move(site);
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("fixture web: ") + e.what());
  }
  return web;
}

FixtureWeb FixtureWeb::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return load(buffer.str());
}

HttpResult FixtureWeb::respond(const Url& url,
                               const HeaderList& request_headers) const {
  HttpResult result;
  auto it = sites_.find(url.origin.host);
  // "*.example.test" answers for any name below example.test.
  for (auto dot = url.origin.host.find('.');
       it == sites_.end() && dot != std::string::npos;
       dot = url.origin.host.find('.', dot + 1))
    it = sites_.find("*" + url.origin.host.substr(dot));
  if (it == sites_.end()) {
    result.error = HttpError::kNetwork;
    result.detail = "Could not establish connection";
    return result;
  }
  const Site& site = it->second;
  if (site.fault != HttpError::kNone) {
    result.error = site.fault;
    result.detail = "injected " + std::string(to_string(site.fault));
    return result;
  }

  const Route* route = nullptr;
  if (auto r = site.routes.find(url.target); r != site.routes.end()) {
    route = &r->second;
  } else if (auto p = site.routes.find(url.path()); p != site.routes.end()) {
    route = &p->second;
  } else if (site.fallback) {
    route = &*site.fallback;
  }
  if (route == nullptr) {
    result.response.status = 404;
    result.response.headers = {{"content-type", "text/plain"}};
    result.response.body = "not found";
    return result;
  }
  result.response.status = route->status;
  result.response.headers = route->headers;
  result.response.body = route->body;

  const auto origin_header = header_value(request_headers, "origin");
  if (site.cors && origin_header) {
    const auto origin = Origin::parse(*origin_header);
    const std::string& domain = site.cors->domain;
    bool allow = false;
    if (origin) {
      const std::string& host = origin->host;
      if (site.cors->mode == "reflect") {
        allow = true;
      } else if (site.cors->mode == "related") {
        allow = host == domain || host.ends_with("." + domain);
      } else if (site.cors->mode == "suffix") {
        allow = host.ends_with(domain);
      } else if (site.cors->mode == "substring") {
        allow = host.find(domain) != std::string::npos;
      }
    }
    if (allow) {
      result.response.headers.emplace_back("access-control-allow-origin",
                                           *origin_header);
      if (site.cors->credentials) {
        result.response.headers.emplace_back("access-control-allow-credentials",
                                             "true");
      }
      result.response.headers.emplace_back("vary", "Origin");
    }
  }
  return result;
}

RateLimiter::RateLimiter(double requests_per_second) : rate_(requests_per_second) {
  if (!(requests_per_second > 0)) {
    throw std::invalid_argument("rate limit must be positive");
  }
  interval_ = std::chrono::nanoseconds(
      static_cast<long long>(1e9 / requests_per_second));
}

RateLimiter::Slot& RateLimiter::slot_for(const std::string& host) {
  std::lock_guard<std::mutex> lock(map_mutex_);
  auto& slot = slots_[host];
  if (!slot) slot = std::make_unique<Slot>();
  return *slot;
}

void RateLimiter::wait_turn(Slot& slot) {
  if (slot.next > std::chrono::steady_clock::now()) std::this_thread::sleep_until(slot.next);
  // Measured after waking, so a late wake-up never shortens the next gap.
  slot.next = std::chrono::steady_clock::now() + interval_;
}

HttpResult RateLimitedClient::get(const HttpRequest& request) const {
  return limiter_->run(request.url.origin.host,
                       [&] { return inner_.get(request); });
}

HttpResult RecordingClient::get(const HttpRequest& request) const {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    log_.push_back({"GET", request.url.str(),
                    header_value(request.headers, "origin").value_or(""),
                    std::chrono::steady_clock::now()});
  }
  return inner_.get(request);
}

std::vector<RecordedRequest> RecordingClient::log() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return log_;
}

}  // namespace relscan
