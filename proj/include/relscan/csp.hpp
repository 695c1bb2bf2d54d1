#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "relscan/capability.hpp"
#include "relscan/psl.hpp"
#include "relscan/takeover.hpp"
#include "relscan/url.hpp"

namespace relscan {

struct SourceExpression {
  enum class Kind : std::uint8_t { kScheme, kHost, kKeyword, kNonce, kHash };

  Kind kind = Kind::kKeyword;
  std::string raw;
  std::string scheme;    // kScheme, or optional prefix of kHost
  std::string host;      // "*" for any host; without the "*." of a wildcard
  bool host_wildcard = false;  // leading "*."
  std::optional<std::uint16_t> port;
  bool port_wildcard = false;
  std::string path;      // may be empty
  std::string keyword;   // lowercase, without quotes: self, none, ...
  std::string value;     // nonce or hash value
  std::string hash_algorithm;

  // Returns nullopt for tokens that are not valid source expressions.
  static std::optional<SourceExpression> parse(std::string_view token);
};

enum class CspDisposition : std::uint8_t { kEnforce, kReportOnly };
std::string_view to_string(CspDisposition disposition);

struct CspDirective {
  std::string name;  // lowercase
  std::vector<std::string> tokens;
  std::vector<SourceExpression> sources;  // source-list directives only
};

struct CspPolicy {
  std::vector<CspDirective> directives;
  CspDisposition disposition = CspDisposition::kEnforce;
  std::string raw;
  std::vector<std::string> warnings;

  const CspDirective* directive(std::string_view name) const;
};

// One serialized policy. Total: every input yields a policy.
CspPolicy parse_csp(std::string_view text,
                    CspDisposition disposition = CspDisposition::kEnforce);
// A header value may carry several comma-separated policies.
std::vector<CspPolicy> parse_csp_header(std::string_view value,
                                        CspDisposition disposition);

enum class CspThreat : std::uint8_t { kScript, kStyle, kObject, kFrame, kFramingControl };
inline constexpr CspThreat kCspThreats[] = {CspThreat::kScript, CspThreat::kStyle,
                                            CspThreat::kObject, CspThreat::kFrame,
                                            CspThreat::kFramingControl};
std::string_view to_string(CspThreat threat);
Threat to_threat(CspThreat threat);

// The directive governing |threat|, after fallback; nullptr means the policy
// places no restriction.
const CspDirective* effective_sources(const CspPolicy& policy, CspThreat threat);

// CSP3 URL matching. |path| nullopt compares origins only (the join used for
// related domains, which ignores paths).
bool source_matches(const SourceExpression& expression, const Origin& target,
                    const Origin& page,
                    std::optional<std::string_view> path = std::string_view("/"));

// True when the directive admits content from any host at all.
bool allows_any_host(const CspDirective* directive, CspThreat threat);
// True when the directive admits arbitrary inline script or style.
bool allows_inline(const CspDirective* directive, CspThreat threat);

enum class CspClass : std::uint8_t {
  kUnsafeWeb,
  kSafe,
  kPotentiallyExploitable,
  kExploitable,
};
std::string_view to_string(CspClass value);

struct CspVerdict {
  CspThreat threat = CspThreat::kScript;
  CspClass verdict = CspClass::kSafe;
  // Related domains (or wildcard patterns) every policy whitelists.
  std::vector<std::string> whitelisted;
  // Indices into the findings argument that make the verdict exploitable.
  std::vector<std::size_t> findings;
  std::string requirement;
  std::string reason;
};

// |policies| are the enforced policies shipped with one page.
CspVerdict classify(const std::vector<CspPolicy>& policies, CspThreat threat,
                    const Origin& page, const PublicSuffixList& psl,
                    const std::vector<TakeoverFinding>& findings);

}  // namespace relscan
