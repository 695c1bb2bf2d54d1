#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace relscan {

// Default port for http/https/ws/wss/ftp, 0 when unknown.
std::uint16_t default_port(std::string_view scheme);

// scheme://host:port, with the port always resolved.
struct Origin {
  std::string scheme;
  std::string host;
  std::uint16_t port = 0;

  static std::optional<Origin> parse(std::string_view text);
  // Serialization omits a default port.
  std::string str() const;

  friend bool operator==(const Origin&, const Origin&) = default;
  friend auto operator<=>(const Origin&, const Origin&) = default;
};

// Absolute http(s) URL. Userinfo and fragments are dropped.
struct Url {
  Origin origin;
  std::string target = "/";  // path plus optional query

  static std::optional<Url> parse(std::string_view text);
  std::string str() const;
  std::string path() const;
  // Resolves a Location header value against this URL.
  std::optional<Url> resolve(std::string_view reference) const;
};

}  // namespace relscan
