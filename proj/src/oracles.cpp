#include "relscan/oracles.hpp"

#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace relscan {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

// Sends |query| to host:43 and reads until EOF. Empty optional on failure,
// with |error| set.
std::optional<std::string> whois_exchange(const std::string& host,
                                          const std::string& query,
                                          std::chrono::milliseconds timeout,
                                          std::string& error) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  if (const int rc = getaddrinfo(host.c_str(), "43", &hints, &found); rc != 0) {
    error = std::string("resolve ") + host + ": " + gai_strerror(rc);
    return std::nullopt;
  }
  std::unique_ptr<addrinfo, decltype(&freeaddrinfo)> guard(found, freeaddrinfo);

  int fd = -1;
  for (addrinfo* ai = found; ai != nullptr; ai = ai->ai_next) {
    fd = socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    close(fd);
    fd = -1;
  }
  if (fd < 0) {
    error = "connect " + host + ":43 failed";
    return std::nullopt;
  }

  const std::string line = query + "\r\n";
  if (send(fd, line.data(), line.size(), MSG_NOSIGNAL) !=
      static_cast<ssize_t>(line.size())) {
    close(fd);
    error = "send to " + host + " failed";
    return std::nullopt;
  }
  std::string response;
  std::array<char, 4096> buffer;
  for (;;) {
    pollfd p{fd, POLLIN, 0};
    const int ready = poll(&p, 1, static_cast<int>(timeout.count()));
    if (ready <= 0) {
      close(fd);
      error = "timeout reading from " + host;
      return std::nullopt;
    }
    const ssize_t n = recv(fd, buffer.data(), buffer.size(), 0);
    if (n < 0) {
      close(fd);
      error = "read from " + host + " failed";
      return std::nullopt;
    }
    if (n == 0) break;
    response.append(buffer.data(), static_cast<std::size_t>(n));
    if (response.size() > (1u << 20)) break;
  }
  close(fd);
  return response;
}

std::string find_referral(const std::string& iana_response) {
  std::istringstream in(iana_response);
  std::string line;
  while (std::getline(in, line)) {
    const std::string l = lower(line);
    for (const char* key : {"refer:", "whois:"}) {
      if (l.starts_with(key)) {
        std::string value = line.substr(std::string_view(key).size());
        value.erase(0, value.find_first_not_of(" \t"));
        value.erase(value.find_last_not_of(" \t\r") + 1);
        if (!value.empty()) return value;
      }
    }
  }
  return {};
}

}  // namespace

std::shared_ptr<FixtureOracles> FixtureOracles::load(std::string_view text) {
  auto oracles = std::make_shared<FixtureOracles>();
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    std::string kind, key, value, extra;
    if (!(fields >> kind)) continue;
    if (!(fields >> key >> value) || (fields >> extra)) {
      throw std::runtime_error("oracle fixture line " + std::to_string(line_no) +
                               ": expected '<kind> <key> <answer>'");
    }
    auto bad = [&] {
      throw std::runtime_error("oracle fixture line " + std::to_string(line_no) +
                               ": bad answer '" + value + "' for " + kind);
    };
    if (kind == "whois") {
      if (value != "registered" && value != "free" && value != "error") bad();
      oracles->whois_[DomainName(key).str()] = value;
    } else if (kind == "registrar") {
      if (value != "available" && value != "unavailable" && value != "premium" &&
          value != "error") {
        bad();
      }
      oracles->registrar_[DomainName(key).str()] = value;
    } else if (kind == "ping") {
      const auto address = IpAddress::parse(key);
      if (!address) bad();
      if (value != "up" && value != "down" && value != "error") bad();
      oracles->ping_[address->str()] = value;
    } else {
      throw std::runtime_error("oracle fixture line " + std::to_string(line_no) +
                               ": unknown kind '" + kind + "'");
    }
  }
  return oracles;
}

std::shared_ptr<FixtureOracles> FixtureOracles::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return load(buffer.str());
}

OracleReply FixtureOracles::registered(const DomainName& apex) const {
  const auto it = whois_.find(apex.str());
  const std::string answer = it == whois_.end() ? "free" : it->second;
  if (answer == "error") return {Tri::kUnknown, "whois " + apex.str() + ": error"};
  return {answer == "registered" ? Tri::kTrue : Tri::kFalse,
          "whois " + apex.str() + ": " +
              (answer == "registered" ? "registration found" : "no match")};
}

OracleReply FixtureOracles::available(const DomainName& apex) const {
  const auto it = registrar_.find(apex.str());
  const std::string answer = it == registrar_.end() ? "unavailable" : it->second;
  if (answer == "error") return {Tri::kUnknown, "registrar " + apex.str() + ": error"};
  return {answer == "available" ? Tri::kTrue : Tri::kFalse,
          "registrar " + apex.str() + ": " + answer};
}

OracleReply FixtureOracles::alive(const IpAddress& address) const {
  const auto it = ping_.find(address.str());
  const std::string answer = it == ping_.end() ? "down" : it->second;
  if (answer == "error") return {Tri::kUnknown, "ping " + address.str() + ": error"};
  return {answer == "up" ? Tri::kTrue : Tri::kFalse,
          "ping " + address.str() + ": " + (answer == "up" ? "reply" : "no reply")};
}

bool whois_says_unregistered(std::string_view response) {
  static const char* const kNoMatch[] = {
      "no match for",  "not found",           "no data found",
      "no entries found", "status: free",     "status: available",
      "domain not found", "no object found",  "is available for registration",
      "nothing found"};
  const std::string text = lower(response);
  return std::any_of(std::begin(kNoMatch), std::end(kNoMatch),
                     [&](const char* phrase) { return text.find(phrase) != std::string::npos; });
}

OracleReply NetworkWhoisOracle::registered(const DomainName& apex) const {
  std::string error;
  const std::string tld = apex.labels().back();
  const auto iana = whois_exchange("whois.iana.org", tld, timeout_, error);
  if (!iana) return {Tri::kUnknown, "whois: " + error};
  const std::string server = find_referral(*iana);
  if (server.empty()) return {Tri::kUnknown, "whois: no referral server for ." + tld};
  const auto answer = whois_exchange(server, apex.str(), timeout_, error);
  if (!answer) return {Tri::kUnknown, "whois " + server + ": " + error};
  const bool unregistered = whois_says_unregistered(*answer);
  return {unregistered ? Tri::kFalse : Tri::kTrue,
          "whois " + server + " " + apex.str() + ": " +
              (unregistered ? "no match" : "registration found")};
}

OracleReply HttpRegistrarOracle::available(const DomainName& apex) const {
  std::string url = url_template_;
  if (const auto at = url.find("{domain}"); at != std::string::npos) {
    url.replace(at, 8, apex.str());
  }
  const auto parsed = Url::parse(url);
  if (!parsed) return {Tri::kUnknown, "registrar: bad URL " + url};
  HttpRequest request{*parsed, extra_headers_};
  request.headers.emplace_back("accept", "application/json");
  const HttpResult result = client_.get(request);
  if (!result.ok()) {
    return {Tri::kUnknown, "registrar " + url + ": " + result.detail};
  }
  if (result.response.status != 200) {
    return {Tri::kUnknown,
            "registrar " + url + ": HTTP " + std::to_string(result.response.status)};
  }
  try {
    const auto doc = nlohmann::json::parse(result.response.body);
    if (!doc.contains("available") || !doc.at("available").is_boolean()) {
      return {Tri::kUnknown, "registrar " + url + ": no 'available' field"};
    }
    const bool available = doc.at("available").get<bool>();
    if (doc.contains("definitive") && !doc.at("definitive").get<bool>()) {
      return {Tri::kUnknown, "registrar " + url + ": answer not definitive"};
    }
    return {available ? Tri::kTrue : Tri::kFalse,
            "registrar " + apex.str() + ": " + (available ? "available" : "unavailable")};
  } catch (const nlohmann::json::exception& e) {
    return {Tri::kUnknown, "registrar " + url + ": " + e.what()};
  }
}

OracleReply SystemPingOracle::alive(const IpAddress& address) const {
  // The address went through inet_pton, so it is safe to splice.
  const std::string command = std::string(address.is_v4() ? "ping" : "ping -6") +
                              " -c 1 -W 2 " + address.str() + " >/dev/null 2>&1";
  const int status = std::system(command.c_str());
  if (status == -1 || !WIFEXITED(status)) {
    return {Tri::kUnknown, "ping " + address.str() + ": could not run ping"};
  }
  switch (WEXITSTATUS(status)) {
    case 0: return {Tri::kTrue, "ping " + address.str() + ": reply"};
    case 1: return {Tri::kFalse, "ping " + address.str() + ": no reply"};
    default:
      return {Tri::kUnknown, "ping " + address.str() + ": ping exited with " +
                                 std::to_string(WEXITSTATUS(status))};
  }
}

}  // namespace relscan
