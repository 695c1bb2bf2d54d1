#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "relscan/dns.hpp"

namespace relscan {

// Live backend: plain DNS over UDP (TCP on truncation) to a recursive
// resolver, through the system resolver library. No DNSSEC validation.
class SystemResolver : public Resolver {
 public:
  // |server| is "address" or "address:port"; empty uses /etc/resolv.conf.
  explicit SystemResolver(std::string server = {});

  QueryResult query(const DomainName& name, RecordType type,
                    const QueryOptions& options) const override;

  const std::string& server() const { return server_; }

 private:
  std::string server_;
};

// Decodes a DNS response message and keeps the answers of |type| owned by
// |name|. Malformed messages yield SERVFAIL.
QueryResult parse_dns_response(std::span<const std::uint8_t> message,
                               const DomainName& name, RecordType type);

}  // namespace relscan
