#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "relscan/capability.hpp"
#include "relscan/dns.hpp"
#include "relscan/http.hpp"
#include "relscan/ip.hpp"
#include "relscan/oracles.hpp"
#include "relscan/psl.hpp"

namespace relscan {

class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ServiceFingerprint {
  enum class Detection : std::uint8_t { kCnameSuffix, kARecord, kNsSuffix };
  enum class Check : std::uint8_t { kHttpBodyMarker, kActiveClaim };

  std::string id;
  Detection detection = Detection::kCnameSuffix;
  std::vector<DomainName> suffixes;  // kCnameSuffix, kNsSuffix
  std::set<IpAddress> addresses;     // kARecord
  Check check = Check::kActiveClaim;
  std::optional<int> marker_status;  // nullopt matches any status
  std::vector<std::string> markers;
  bool supports_wildcard_claim = false;
  bool www_redirect_claimable = false;
  bool psl_listed = false;
  CapabilitySet granted;
  std::string notes;

  // Some record of |chain| points into the service.
  bool matches(const ResolvingChain& chain) const;
  // Status equal (when constrained) and at least one marker in the body.
  bool unclaimed_response(const HttpResponse& response) const;
};

// Text format, one section per service:
//
//   format-version: 1
//   [shopify]
//   detection: cname_suffix myshopify.com
//   check: http_body_marker 404
//   marker: Sorry, this shop is currently unavailable.
//   wildcard_claim: true
//   www_redirect_claimable: true
//   psl_listed: false
//   granted: js https
//   notes: free text
//
// "check: active_claim" takes no markers. Throws LoadError naming the row.
std::vector<ServiceFingerprint> load_service_db(std::string_view text);
std::vector<ServiceFingerprint> load_service_db_file(const std::string& path);

struct CloudProviderRanges {
  std::string provider_id;
  std::vector<IpNetwork> ranges;
  std::vector<IpNetwork> reserved;

  bool in_range(const IpAddress& address) const;
  bool in_reserved(const IpAddress& address) const;
};

// "provider <id>", then one CIDR per line; "reserved <cidr>" lines mark load
// balancer and proxy space. Each reserved block must sit inside a range.
CloudProviderRanges load_cloud_ranges(std::string_view text,
                                      std::string_view source = "<ranges>");
CloudProviderRanges load_cloud_ranges_file(const std::string& path);

struct PortKey {
  std::string protocol;  // "tcp" or "udp"
  std::uint16_t port = 0;
  friend auto operator<=>(const PortKey&, const PortKey&) = default;
  std::string str() const { return protocol + "/" + std::to_string(port); }
};

// Open-port observations from an external Internet-wide scan.
//
//   # probed: tcp/22,tcp/80,...,udp/53      (optional port universe)
//   203.0.113.7<TAB>tcp/443,tcp/80
struct LivenessDataset {
  std::map<IpAddress, std::set<PortKey>> open_ports;
  std::set<PortKey> probed_ports;  // empty when the file does not declare it

  // nullptr when the address has no entry.
  const std::set<PortKey>* lookup(const IpAddress& address) const;
};

LivenessDataset load_liveness(std::string_view text,
                              std::string_view source = "<liveness>");
LivenessDataset load_liveness_file(const std::string& path);

enum class Certainty : std::uint8_t { kVulnerable, kPotentiallyVulnerable };
std::string_view to_string(Certainty certainty);

// confirmed: all checks passed. deferred: an oracle or probe could not answer.
// manual_check: the service needs an account-side claim test.
enum class Disposition : std::uint8_t { kConfirmed, kDeferred, kManualCheck };
std::string_view to_string(Disposition disposition);

struct TakeoverFinding {
  explicit TakeoverFinding(DomainName name) : domain(std::move(name)) {}

  DomainName domain;
  VectorKind vector = VectorKind::kExpiredDomain;
  std::string vector_ref;  // service id or provider id; empty for expired
  Certainty certainty = Certainty::kVulnerable;
  Disposition disposition = Disposition::kConfirmed;
  CapabilitySet granted;
  // The finding sits on a PSL-listed service platform.
  bool psl_listed_service = false;
  std::vector<std::string> evidence;

  std::string vector_label() const;
  // Confirmed and vulnerable: eligible for exploitability joins.
  bool actionable() const {
    return disposition == Disposition::kConfirmed &&
           certainty == Certainty::kVulnerable;
  }
};

// Attacker at |finding| is in a related-domain position to |target|.
bool grants_related_position(const TakeoverFinding& finding,
                             const DomainName& target,
                             const PublicSuffixList& psl);

struct CaaPolicy {
  const Resolver* resolver = nullptr;  // nullptr skips the CAA lookup
  std::set<std::string> automated_cas = {"letsencrypt.org", "pki.goog",
                                         "sectigo.com", "zerossl.com",
                                         "buypass.com", "ssl.com"};
  QueryOptions query;
};

// Two-step check: no whois registration, then the registrar confirms the
// apex can be bought. kUnknown when either oracle fails.
Tri registrability_check(const DomainName& apex, const WhoisOracle& whois,
                         const RegistrarOracle& registrar,
                         std::vector<std::string>* transcript = nullptr);

std::vector<TakeoverFinding> detect_expired_domains(
    const std::vector<ResolvingChain>& chains, const WhoisOracle& whois,
    const RegistrarOracle& registrar, const PublicSuffixList& psl,
    const CaaPolicy& caa = {});

struct DiscontinuedOptions {
  ChainOptions chains;
  std::uint64_t nonce_seed = 0;
};

std::vector<TakeoverFinding> detect_discontinued_services(
    const std::vector<ResolvingChain>& chains,
    const std::vector<ServiceFingerprint>& services, const Resolver& resolver,
    const HttpClient& http, const CaaPolicy& caa = {},
    const DiscontinuedOptions& options = {});

std::vector<TakeoverFinding> detect_deprovisioned_cloud(
    const std::vector<ResolvingChain>& chains,
    const std::vector<CloudProviderRanges>& providers,
    const LivenessDataset& liveness, const PingOracle& ping,
    const CaaPolicy& caa = {});

}  // namespace relscan
