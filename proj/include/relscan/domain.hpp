#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace relscan {

class InvalidDomain : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A normalized DNS name: lowercase ASCII (IDNs converted to their A-label
// form), no trailing dot, labels ordered left to right with the root-most
// label last. A leading "*" label marks the wildcard form.
class DomainName {
 public:
  static constexpr std::size_t kMaxLabelLength = 63;
  static constexpr std::size_t kMaxNameLength = 253;

  // Returns nullopt and fills |error| when |text| is not a valid name.
  static std::optional<DomainName> parse(std::string_view text,
                                         std::string* error = nullptr);

  // Throws InvalidDomain.
  explicit DomainName(std::string_view text);

  const std::string& str() const { return name_; }
  const std::string& raw() const { return raw_; }
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t label_count() const { return labels_.size(); }

  bool is_wildcard() const { return labels_.front() == "*"; }

  // Strict descendant test: "a.b.c" is a subdomain of "b.c" but not of itself.
  bool is_subdomain_of(const DomainName& ancestor) const;
  // Equal to or a descendant of |ancestor|. This is cookie domain-match.
  bool is_within(const DomainName& ancestor) const;

  // Name made of the rightmost |count| labels; count must be in [1, label_count].
  DomainName suffix(std::size_t count) const;
  std::optional<DomainName> parent() const;
  // Throws InvalidDomain if the result would be invalid.
  DomainName child(std::string_view label) const;

  friend bool operator==(const DomainName& a, const DomainName& b) {
    return a.name_ == b.name_;
  }
  friend std::strong_ordering operator<=>(const DomainName& a,
                                          const DomainName& b) {
    return a.name_ <=> b.name_;
  }

 private:
  DomainName() = default;
  static bool build(std::string_view text, DomainName& out, std::string& error);

  std::string name_;
  std::string raw_;
  std::vector<std::string> labels_;
};

// Lowercases ASCII, strips one trailing dot and converts non-ASCII labels to
// punycode. Returns nullopt if the text cannot be converted.
std::optional<std::string> to_ascii_name(std::string_view text);

}  // namespace relscan
