#include "relscan/url.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "relscan/domain.hpp"
#include "relscan/ip.hpp"

namespace relscan {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

bool valid_scheme(std::string_view s) {
  if (s.empty() || !std::isalpha(static_cast<unsigned char>(s[0]))) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '+' || c == '-' || c == '.';
  });
}

// Parses "host[:port]" into |origin|; handles bracketed IPv6 literals.
bool parse_authority(std::string_view authority, Origin& origin) {
  if (const auto at = authority.rfind('@'); at != std::string_view::npos) {
    authority.remove_prefix(at + 1);
  }
  std::string_view host = authority;
  std::string_view port;
  if (!authority.empty() && authority.front() == '[') {
    const auto close = authority.find(']');
    if (close == std::string_view::npos) return false;
    host = authority.substr(1, close - 1);
    const auto rest = authority.substr(close + 1);
    if (!rest.empty()) {
      if (rest.front() != ':') return false;
      port = rest.substr(1);
    }
    if (!IpAddress::parse(host)) return false;
    origin.host = lower(host);
  } else {
    if (const auto colon = authority.rfind(':'); colon != std::string_view::npos) {
      host = authority.substr(0, colon);
      port = authority.substr(colon + 1);
    }
    if (host.empty()) return false;
    if (IpAddress::parse(host)) {
      origin.host = std::string(host);
    } else {
      const auto name = DomainName::parse(host);
      if (!name) return false;
      origin.host = name->str();
    }
  }
  if (port.empty()) {
    origin.port = default_port(origin.scheme);
    return true;
  }
  unsigned value = 0;
  const auto [end, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
  if (ec != std::errc() || end != port.data() + port.size() || value == 0 ||
      value > 65535) {
    return false;
  }
  origin.port = static_cast<std::uint16_t>(value);
  return true;
}

}  // namespace

std::uint16_t default_port(std::string_view scheme) {
  if (scheme == "http" || scheme == "ws") return 80;
  if (scheme == "https" || scheme == "wss") return 443;
  if (scheme == "ftp") return 21;
  return 0;
}

std::optional<Origin> Origin::parse(std::string_view text) {
  const auto sep = text.find("://");
  if (sep == std::string_view::npos) return std::nullopt;
  Origin origin;
  origin.scheme = lower(text.substr(0, sep));
  if (!valid_scheme(origin.scheme)) return std::nullopt;
  std::string_view rest = text.substr(sep + 3);
  rest = rest.substr(0, rest.find_first_of("/?#"));
  if (!parse_authority(rest, origin)) return std::nullopt;
  return origin;
}

std::string Origin::str() const {
  std::string out = scheme + "://";
  out += host.find(':') != std::string::npos ? "[" + host + "]" : host;
  if (port != default_port(scheme)) out += ":" + std::to_string(port);
  return out;
}

std::optional<Url> Url::parse(std::string_view text) {
  auto origin = Origin::parse(text);
  if (!origin || (origin->scheme != "http" && origin->scheme != "https")) {
    return std::nullopt;
  }
  Url url;
  url.origin = std::move(*origin);
  std::string_view rest = text.substr(text.find("://") + 3);
  const auto start = rest.find_first_of("/?#");
  if (start != std::string_view::npos) {
    std::string_view target = rest.substr(start);
    target = target.substr(0, target.find('#'));
    if (!target.empty()) {
      url.target = target.front() == '/' ? std::string(target) : "/" + std::string(target);
    }
  }
  return url;
}

std::string Url::str() const { return origin.str() + target; }

std::string Url::path() const { return target.substr(0, target.find('?')); }

namespace {

// RFC 3986 section 5.2.4, applied to the path part of a target.
std::string remove_dot_segments(const std::string& target) {
  const auto query = target.find('?');
  std::string in = target.substr(0, query);
  std::string out;
  while (!in.empty()) {
    if (in.starts_with("../")) {
      in.erase(0, 3);
    } else if (in.starts_with("./")) {
      in.erase(0, 2);
    } else if (in.starts_with("/./")) {
      in.erase(0, 2);
    } else if (in == "/.") {
      in = "/";
    } else if (in.starts_with("/../") || in == "/..") {
      in = in.size() == 3 ? "/" : in.substr(3);
      const auto cut = out.rfind('/');
      out.erase(cut == std::string::npos ? 0 : cut);
    } else if (in == "." || in == "..") {
      in.clear();
    } else {
      const auto next = in.find('/', 1);
      out += in.substr(0, next);
      in.erase(0, next == std::string::npos ? in.size() : next);
    }
  }
  if (out.empty()) out = "/";
  return query == std::string::npos ? out : out + target.substr(query);
}

}  // namespace

std::optional<Url> Url::resolve(std::string_view reference) const {
  if (reference.find("://") != std::string_view::npos) return Url::parse(reference);
  if (reference.starts_with("//")) {
    return Url::parse(origin.scheme + ":" + std::string(reference));
  }
  Url out = *this;
  if (reference.empty()) return out;
  if (reference.front() == '/') {
    out.target = std::string(reference);
  } else if (reference.front() == '?') {
    out.target = path() + std::string(reference);
  } else {
    const std::string base = path();
    out.target = base.substr(0, base.rfind('/') + 1) + std::string(reference);
  }
  out.target = remove_dot_segments(out.target.substr(0, out.target.find('#')));
  return out;
}

}  // namespace relscan
