#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace relscan {

enum class IpFamily : std::uint8_t { kV4, kV6 };

class IpAddress {
 public:
  static std::optional<IpAddress> parse(std::string_view text);

  IpFamily family() const { return family_; }
  bool is_v4() const { return family_ == IpFamily::kV4; }
  // Network byte order; only the first 4 bytes are meaningful for IPv4.
  const std::array<std::uint8_t, 16>& bytes() const { return bytes_; }
  std::size_t width_bits() const { return is_v4() ? 32 : 128; }
  std::string str() const;
  // Copy with every bit past |prefix_bits| cleared.
  IpAddress masked(unsigned prefix_bits) const;

  friend auto operator<=>(const IpAddress&, const IpAddress&) = default;
  friend bool operator==(const IpAddress&, const IpAddress&) = default;

 private:
  IpFamily family_ = IpFamily::kV4;
  std::array<std::uint8_t, 16> bytes_{};
};

// A CIDR block; host bits are cleared at parse time.
class IpNetwork {
 public:
  // Accepts "a.b.c.d/len", "v6::/len" or a bare address (full-length prefix).
  static std::optional<IpNetwork> parse(std::string_view text);

  const IpAddress& base() const { return base_; }
  unsigned prefix_length() const { return prefix_; }
  std::string str() const;

  bool contains(const IpAddress& address) const;
  bool contains(const IpNetwork& other) const;

  friend auto operator<=>(const IpNetwork&, const IpNetwork&) = default;
  friend bool operator==(const IpNetwork&, const IpNetwork&) = default;

 private:
  IpAddress base_;
  unsigned prefix_ = 0;
};

}  // namespace relscan
