#include "relscan/ip.hpp"

#include <arpa/inet.h>

#include <charconv>
#include <cstring>

namespace relscan {
namespace {

bool prefix_equal(const std::array<std::uint8_t, 16>& a,
                  const std::array<std::uint8_t, 16>& b, unsigned bits) {
  const unsigned full = bits / 8;
  if (std::memcmp(a.data(), b.data(), full) != 0) return false;
  const unsigned rest = bits % 8;
  if (rest == 0) return true;
  const auto mask = static_cast<std::uint8_t>(0xff << (8 - rest));
  return (a[full] & mask) == (b[full] & mask);
}

}  // namespace

std::optional<IpAddress> IpAddress::parse(std::string_view text) {
  const std::string buffer(text);
  IpAddress out;
  if (buffer.find(':') == std::string::npos) {
    if (inet_pton(AF_INET, buffer.c_str(), out.bytes_.data()) != 1) {
      return std::nullopt;
    }
    out.family_ = IpFamily::kV4;
  } else {
    if (inet_pton(AF_INET6, buffer.c_str(), out.bytes_.data()) != 1) {
      return std::nullopt;
    }
    out.family_ = IpFamily::kV6;
  }
  return out;
}

std::string IpAddress::str() const {
  char buffer[INET6_ADDRSTRLEN] = {};
  inet_ntop(is_v4() ? AF_INET : AF_INET6, bytes_.data(), buffer,
            sizeof(buffer));
  return buffer;
}

IpAddress IpAddress::masked(unsigned prefix_bits) const {
  IpAddress out = *this;
  for (unsigned bit = prefix_bits; bit < width_bits(); ++bit) {
    out.bytes_[bit / 8] &= static_cast<std::uint8_t>(~(0x80u >> (bit % 8)));
  }
  return out;
}

std::optional<IpNetwork> IpNetwork::parse(std::string_view text) {
  const auto slash = text.find('/');
  auto address = IpAddress::parse(text.substr(0, slash));
  if (!address) return std::nullopt;

  unsigned prefix = static_cast<unsigned>(address->width_bits());
  if (slash != std::string_view::npos) {
    const std::string_view digits = text.substr(slash + 1);
    auto [ptr, ec] =
        std::from_chars(digits.data(), digits.data() + digits.size(), prefix);
    if (ec != std::errc() || ptr != digits.data() + digits.size() ||
        digits.empty() || prefix > address->width_bits()) {
      return std::nullopt;
    }
  }

  IpNetwork out;
  out.prefix_ = prefix;
  out.base_ = address->masked(prefix);
  return out;
}

std::string IpNetwork::str() const {
  return base_.str() + "/" + std::to_string(prefix_);
}

bool IpNetwork::contains(const IpAddress& address) const {
  return address.family() == base_.family() &&
         prefix_equal(address.bytes(), base_.bytes(), prefix_);
}

bool IpNetwork::contains(const IpNetwork& other) const {
  return other.prefix_ >= prefix_ && contains(other.base_);
}

}  // namespace relscan
