#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace relscan {

// What an attacker can do from a position on a related domain.
enum class Capability : std::uint8_t {
  kHeaders,  // access and modify HTTP headers
  kJs,       // execute arbitrary JavaScript
  kHtml,     // alter markup, excluding scripts
  kContent,  // alter textual content only
  kFile,     // host arbitrary files
  kHttps,    // serve over HTTPS with a valid certificate
};

inline constexpr std::array<Capability, 6> kAllCapabilities = {
    Capability::kHeaders, Capability::kJs,   Capability::kHtml,
    Capability::kContent, Capability::kFile, Capability::kHttps};

std::string_view to_string(Capability capability);
std::optional<Capability> parse_capability(std::string_view text);

// A set of capabilities, always closed under subsumption: js implies html and
// content, html implies content.
class CapabilitySet {
 public:
  CapabilitySet() = default;
  CapabilitySet(std::initializer_list<Capability> members);

  static CapabilitySet from_bits(std::uint8_t bits);
  static CapabilitySet all();

  bool contains(Capability capability) const {
    return (bits_ & bit(capability)) != 0;
  }
  bool subset_of(const CapabilitySet& other) const {
    return (bits_ & ~other.bits_) == 0;
  }
  bool empty() const { return bits_ == 0; }
  std::uint8_t bits() const { return bits_; }

  CapabilitySet with(Capability capability) const;
  CapabilitySet without(Capability capability) const;
  CapabilitySet operator|(const CapabilitySet& other) const;

  // Members in alphabet order, e.g. "{js, html, content, https}".
  std::string str() const;
  std::vector<std::string> names() const;

  friend bool operator==(const CapabilitySet&, const CapabilitySet&) = default;

  static constexpr std::uint8_t bit(Capability capability) {
    return static_cast<std::uint8_t>(1u << static_cast<unsigned>(capability));
  }

 private:
  static std::uint8_t closure(std::uint8_t bits);
  std::uint8_t bits_ = 0;
};

// Minimal superset of |members| closed under subsumption.
CapabilitySet close(std::initializer_list<Capability> members);
CapabilitySet close(const std::vector<Capability>& members);

// Disjunctive normal form: satisfied iff some alternative is a subset of the
// attacker's capabilities.
struct CapabilityRequirement {
  std::vector<CapabilitySet> alternatives;

  bool satisfied_by(const CapabilitySet& caps) const;
  // "{headers, https} | {js, html, content, https}"
  std::string str() const;
};

enum class CookiePrefix : std::uint8_t { kNone, kSecure, kHost };
std::string_view to_string(CookiePrefix prefix);

struct CookieAttributes {
  bool http_only = false;
  bool secure = false;
  CookiePrefix prefix = CookiePrefix::kNone;
};

enum class Threat : std::uint8_t {
  kCookieConfidentiality,
  kCookieIntegrity,
  kCspScript,
  kCspStyle,
  kCspObject,
  kCspFrame,
  kCspFramingControl,
  kCors,
  kPostMessage,
  kDomainRelaxation,
};

inline constexpr std::array<Threat, 8> kNonCookieThreats = {
    Threat::kCspScript,   Threat::kCspStyle,
    Threat::kCspObject,   Threat::kCspFrame,
    Threat::kCspFramingControl, Threat::kCors,
    Threat::kPostMessage, Threat::kDomainRelaxation};

std::string_view to_string(Threat threat);
bool is_cookie_threat(Threat threat);

struct ThreatContext {
  Threat threat = Threat::kCors;
  bool target_https = false;
  // Present iff the threat is a cookie threat.
  std::optional<CookieAttributes> cookie;

  static ThreatContext for_cookie(Threat threat, CookieAttributes attrs);
  static ThreatContext for_threat(Threat threat, bool target_https);
  bool well_formed() const;
};

// Either a requirement, or immunity: no capability set breaks the property.
struct RequirementResult {
  bool immune = false;
  CapabilityRequirement requirement;

  std::string str() const { return immune ? "immune" : requirement.str(); }
};

RequirementResult required_for(const ThreatContext& context);

// True iff |caps| satisfies the requirement of |context|; immune contexts are
// never exploitable.
bool exploitable(const CapabilitySet& caps, const ThreatContext& context);

enum class VectorKind : std::uint8_t {
  kExpiredDomain,
  kDiscontinuedService,
  kDeprovisionedCloud,
};
std::string_view to_string(VectorKind kind);

// Capabilities granted by a takeover vector. |service_grants| is the service
// fingerprint's grant and must be present iff kind is kDiscontinuedService.
CapabilitySet vector_default_caps(VectorKind kind,
                                  const std::optional<CapabilitySet>& service_grants,
                                  bool caa_https_ok);

}  // namespace relscan
