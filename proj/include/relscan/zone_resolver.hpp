#pragma once

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "relscan/dns.hpp"

namespace relscan {

class ZoneParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Resolver over zone-file text, for tests and offline scans.
//
// Supported syntax: $ORIGIN, $TTL, "@", relative owner names, blank owner
// (repeat previous), optional TTL and class fields, ";" comments and
// parenthesised continuation lines. Records of types other than A, AAAA,
// CNAME, NS and CAA are accepted and only mark their owner as existing.
//
// Fixture extension: "$FAULT <name> TIMEOUT|SERVFAIL|REFUSED" makes every
// query for <name> fail with that outcome.
//
// Names outside all loaded data answer NXDOMAIN. Wildcard owners synthesize
// records following RFC 4592 closest-encloser rules. Immutable after loading.
class ZoneResolver : public Resolver {
 public:
  ZoneResolver() = default;

  // Throws ZoneParseError naming the source and line.
  void add_zone_text(std::string_view text, std::string_view default_origin = "",
                     std::string_view source = "<zone>");
  void add_zone_file(const std::string& path);

  QueryResult query(const DomainName& name, RecordType type,
                    const QueryOptions& options) const override;

  const std::set<DomainName>& existing_names() const { return existing_; }

 private:
  void add_record(const DnsRecord& record);
  void add_existing(const DomainName& owner, const DomainName& origin);

  std::map<DomainName, std::vector<DnsRecord>> records_;
  std::set<DomainName> existing_;
  std::set<DomainName> wildcard_owners_;
  std::map<DomainName, Rcode> faults_;
};

}  // namespace relscan
