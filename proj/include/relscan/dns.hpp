#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "relscan/domain.hpp"
#include "relscan/ip.hpp"

namespace relscan {

enum class RecordType : std::uint8_t { kA, kAAAA, kCNAME, kNS, kCAA };

std::string_view to_string(RecordType type);
std::optional<RecordType> parse_record_type(std::string_view text);

struct CaaData {
  std::uint8_t flags = 0;
  std::string tag;
  std::string value;

  bool critical() const { return (flags & 0x80) != 0; }
  friend bool operator==(const CaaData&, const CaaData&) = default;
};

using RecordData = std::variant<IpAddress, DomainName, CaaData>;

struct DnsRecord {
  DomainName name;
  std::uint32_t ttl = 0;
  RecordType type = RecordType::kA;
  RecordData data;

  // Throws std::invalid_argument when |data| does not fit |type|.
  static DnsRecord make(DomainName name, std::uint32_t ttl, RecordType type,
                        RecordData data);

  // CNAME/NS target, nullptr otherwise.
  const DomainName* target() const { return std::get_if<DomainName>(&data); }
  const IpAddress* address() const { return std::get_if<IpAddress>(&data); }
  const CaaData* caa() const { return std::get_if<CaaData>(&data); }

  std::string data_str() const;
  // "name. ttl IN TYPE data" as printed by dig.
  std::string str() const;

  friend bool operator==(const DnsRecord&, const DnsRecord&) = default;
};

enum class Rcode : std::uint8_t {
  kNoError,
  kNxDomain,
  kServFail,
  kRefused,
  kTimeout,
};

std::string_view to_string(Rcode rcode);

struct QueryOptions {
  std::chrono::milliseconds timeout{5000};
  int retries = 1;
};

struct QueryResult {
  Rcode rcode = Rcode::kNoError;
  std::vector<DnsRecord> answers;

  // The query produced an authoritative answer (possibly empty).
  bool answered() const {
    return rcode == Rcode::kNoError || rcode == Rcode::kNxDomain;
  }
};

// Query interface over some DNS backend. query() returns the records of
// |type| owned by |name| itself; aliases are not chased. Implementations must
// be safe for concurrent calls.
class Resolver {
 public:
  virtual ~Resolver() = default;
  virtual QueryResult query(const DomainName& name, RecordType type,
                            const QueryOptions& options) const = 0;
};

struct ChainTerminal {
  enum class Kind : std::uint8_t { kResolved, kUnresolvable, kTruncated };

  Kind kind = Kind::kTruncated;
  // kResolved: every address of the final name for the final record type.
  std::vector<IpAddress> addresses;
  // kUnresolvable: NXDOMAIN or NOERROR (empty answer).
  Rcode rcode = Rcode::kNoError;
  // kTruncated: "timeout", "servfail", "loop" or "max-length".
  std::string reason;

  static ChainTerminal resolved(std::vector<IpAddress> addresses);
  static ChainTerminal unresolvable(Rcode rcode);
  static ChainTerminal truncated(std::string reason);

  std::string str() const;
};

// Ordered DNS records where each record's name is the previous record's data.
struct ResolvingChain {
  std::vector<DnsRecord> records;
  ChainTerminal terminal;

  const DomainName& domain() const { return records.front().name; }
  const DnsRecord& head() const { return records.front(); }
  const DnsRecord& tail() const { return records.back(); }
  RecordType initial_type() const { return head().type; }

  // Every address the chain points to (records and terminal).
  std::vector<IpAddress> addresses() const;
  bool linked() const;
  std::string str() const;
};

struct ChainOptions {
  QueryOptions query;
  std::size_t max_length = 16;
  // One recomputation pass with doubled timeout for chains cut short by
  // timeouts or server failures.
  bool retry_unterminated = true;
};

struct ChainSet {
  DomainName name;
  std::vector<ResolvingChain> chains;
  // Set when the name itself could not be queried.
  std::optional<std::string> failure;

  bool has_truncated() const;
};

// One chain per initial record type present (CNAME, A, AAAA, NS). MX and other
// types are ignored.
ChainSet resolve_chain(const DomainName& name, const Resolver& resolver,
                       const ChainOptions& options = {});

enum class Tri : std::uint8_t { kFalse, kTrue, kUnknown };
std::string_view to_string(Tri value);

// Deterministic generator of random DNS labels.
class NonceGenerator {
 public:
  static constexpr std::size_t kLength = 20;
  explicit NonceGenerator(std::uint64_t seed) : engine_(seed) {}
  std::string next();

 private:
  std::mt19937_64 engine_;
};

struct WildcardProbe {
  Tri wildcard = Tri::kUnknown;
  DomainName probe_name;
};

// Resolves <nonce>.parent for A and CNAME; an answer means the zone
// synthesizes records for arbitrary children.
WildcardProbe detect_zone_wildcard(const DomainName& parent,
                                   const Resolver& resolver,
                                   NonceGenerator& nonces,
                                   const QueryOptions& options = {});

struct CaaVerdict {
  bool permits = true;
  bool indeterminate = false;
  // Owner of the CAA record set that decided the result, if any.
  std::optional<DomainName> relevant_name;
  std::string note;
};

// Climbs from |name| towards the root and evaluates the closest non-empty CAA
// record set. Resolver failures are treated as permitting, with a note.
CaaVerdict caa_permits_automated_issuance(
    const DomainName& name, const Resolver& resolver,
    const std::set<std::string>& automated_cas,
    const QueryOptions& options = {});

}  // namespace relscan
