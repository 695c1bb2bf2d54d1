#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>

#include "relscan/domain.hpp"

namespace relscan {

class PslLoadError : public std::runtime_error {
 public:
  PslLoadError(std::size_t line, const std::string& message)
      : std::runtime_error(line == 0 ? message
                                     : "line " + std::to_string(line) + ": " +
                                           message),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

enum class PslRuleKind { kNormal, kWildcard, kException };
enum class PslSection { kIcann, kPrivate };

struct PslRule {
  PslRuleKind kind;
  PslSection section;
  std::size_t line;
};

struct PslStats {
  std::size_t normal = 0;
  std::size_t wildcard = 0;
  std::size_t exception = 0;
  std::size_t total() const { return normal + wildcard + exception; }
};

// The registrable domain (eTLD+1) of a name: one label left of its public
// suffix.
struct SiteKey {
  DomainName etld_plus_one;

  friend bool operator==(const SiteKey&, const SiteKey&) = default;
  friend auto operator<=>(const SiteKey& a, const SiteKey& b) {
    return a.etld_plus_one <=> b.etld_plus_one;
  }
};

// Immutable after load; safe for concurrent lookups.
class PublicSuffixList {
 public:
  // Parses the standard public_suffix_list.dat text. Throws PslLoadError.
  static PublicSuffixList load(std::string_view text);
  static PublicSuffixList load_file(const std::string& path);

  // When false, rules from the PRIVATE DOMAINS section are ignored.
  void set_private_rules(bool enabled) { use_private_ = enabled; }
  bool private_rules() const { return use_private_; }

  // Number of labels in the public suffix of |name| under the prevailing
  // rule (the implicit "*" rule when nothing matches).
  std::size_t public_suffix_length(const DomainName& name) const;
  bool is_public_suffix(const DomainName& name) const {
    return public_suffix_length(name) >= name.label_count();
  }

  const std::unordered_map<std::string, PslRule>& rules() const {
    return rules_;
  }
  const PslStats& stats() const { return stats_; }
  // SHA-256 of the loaded text, lowercase hex.
  const std::string& version() const { return version_; }

 private:
  bool active(const PslRule& rule) const {
    return use_private_ || rule.section == PslSection::kIcann;
  }

  // Keyed by rule text without the leading "!"; wildcard rules keep "*.".
  std::unordered_map<std::string, PslRule> rules_;
  std::unordered_map<std::string, PslRule> exceptions_;
  PslStats stats_;
  std::string version_;
  bool use_private_ = true;
};

std::optional<SiteKey> etld_plus_one(const DomainName& name,
                                     const PublicSuffixList& psl);

// True iff both names have a registrable domain and it is the same one. Names
// that are themselves public suffixes are never related to anything.
bool is_related(const DomainName& a, const DomainName& b,
                const PublicSuffixList& psl);

// DNS wildcard synthesis: |pattern| is "*.base"; |explicit_names| are the
// owner names that exist in the zone.
bool wildcard_match(const DomainName& pattern, const DomainName& name,
                    const std::set<DomainName>& explicit_names);

}  // namespace relscan
