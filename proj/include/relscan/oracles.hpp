#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <string>

#include "relscan/dns.hpp"
#include "relscan/domain.hpp"
#include "relscan/http.hpp"
#include "relscan/ip.hpp"

namespace relscan {

// kUnknown means the oracle could not answer; transcript says why.
struct OracleReply {
  Tri value = Tri::kUnknown;
  std::string transcript;
};

class WhoisOracle {
 public:
  virtual ~WhoisOracle() = default;
  // kTrue when a registration record exists for |apex|.
  virtual OracleReply registered(const DomainName& apex) const = 0;
};

class RegistrarOracle {
 public:
  virtual ~RegistrarOracle() = default;
  // kTrue when |apex| can be bought at list price right now.
  virtual OracleReply available(const DomainName& apex) const = 0;
};

class PingOracle {
 public:
  virtual ~PingOracle() = default;
  virtual OracleReply alive(const IpAddress& address) const = 0;
};

// One table answers all three oracles. Line format, "#" comments:
//   whois      <apex>  registered|free|error
//   registrar  <apex>  available|unavailable|premium|error
//   ping       <addr>  up|down|error
// Names or addresses absent from the table answer: whois free, registrar
// unavailable, ping down.
class FixtureOracles : public WhoisOracle,
                       public RegistrarOracle,
                       public PingOracle {
 public:
  // Throws std::runtime_error naming the offending line.
  static std::shared_ptr<FixtureOracles> load(std::string_view text);
  static std::shared_ptr<FixtureOracles> load_file(const std::string& path);

  OracleReply registered(const DomainName& apex) const override;
  OracleReply available(const DomainName& apex) const override;
  OracleReply alive(const IpAddress& address) const override;

 private:
  std::map<std::string, std::string> whois_;
  std::map<std::string, std::string> registrar_;
  std::map<std::string, std::string> ping_;
};

// RFC 3912 whois over TCP port 43: asks whois.iana.org for the referral
// server of the TLD, then queries it. No-match phrases mean unregistered.
class NetworkWhoisOracle : public WhoisOracle {
 public:
  explicit NetworkWhoisOracle(std::chrono::milliseconds timeout = std::chrono::seconds(10))
      : timeout_(timeout) {}
  OracleReply registered(const DomainName& apex) const override;

 private:
  std::chrono::milliseconds timeout_;
};

// True when the whois response text signals that no object matched.
bool whois_says_unregistered(std::string_view response);

// Registrar availability API queried with GET. |url_template| contains
// "{domain}"; the JSON reply must carry a boolean "available" and may carry
// a "price"/"definitive" pair, as the GoDaddy domains API does.
class HttpRegistrarOracle : public RegistrarOracle {
 public:
  HttpRegistrarOracle(const HttpClient& client, std::string url_template,
                      HeaderList extra_headers = {})
      : client_(client),
        url_template_(std::move(url_template)),
        extra_headers_(std::move(extra_headers)) {}
  OracleReply available(const DomainName& apex) const override;

 private:
  const HttpClient& client_;
  std::string url_template_;
  HeaderList extra_headers_;
};

// Runs the system ping binary once. Missing binary or permission errors
// answer kUnknown.
class SystemPingOracle : public PingOracle {
 public:
  OracleReply alive(const IpAddress& address) const override;
};

}  // namespace relscan
