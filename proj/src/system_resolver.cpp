#include "relscan/system_resolver.hpp"

#include <arpa/inet.h>
#include <arpa/nameser.h>
#include <netinet/in.h>
#include <resolv.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <vector>

namespace relscan {
namespace {

int wire_type(RecordType type) {
  switch (type) {
    case RecordType::kA: return ns_t_a;
    case RecordType::kAAAA: return ns_t_aaaa;
    case RecordType::kCNAME: return ns_t_cname;
    case RecordType::kNS: return ns_t_ns;
    case RecordType::kCAA: return 257;
  }
  return 0;
}

// Per-thread resolver state; libresolv's res_n* calls are reentrant over it.
struct ThreadState {
  struct __res_state state {};
  bool ready = false;
  ~ThreadState() {
    if (ready) res_nclose(&state);
  }
};

res_state prepare(const std::string& server, const QueryOptions& options) {
  thread_local ThreadState local;
  if (!local.ready) {
    std::memset(&local.state, 0, sizeof(local.state));
    if (res_ninit(&local.state) != 0) return nullptr;
    local.ready = true;
  }
  res_state statp = &local.state;
  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(options.timeout).count();
  statp->retrans = static_cast<int>(std::max<long long>(1, seconds));
  statp->retry = std::max(1, options.retries);
  if (!server.empty()) {
    std::string host = server;
    int port = NS_DEFAULTPORT;
    if (const auto colon = server.rfind(':'); colon != std::string::npos) {
      host = server.substr(0, colon);
      port = std::stoi(server.substr(colon + 1));
    }
    sockaddr_in address{};
    address.sin_family = AF_INET;
    address.sin_port = htons(static_cast<uint16_t>(port));
    if (inet_pton(AF_INET, host.c_str(), &address.sin_addr) != 1) return nullptr;
    statp->nscount = 1;
    statp->nsaddr_list[0] = address;
  }
  return statp;
}

}  // namespace

SystemResolver::SystemResolver(std::string server) : server_(std::move(server)) {}

QueryResult SystemResolver::query(const DomainName& name, RecordType type,
                                  const QueryOptions& options) const {
  res_state statp = prepare(server_, options);
  if (statp == nullptr) return QueryResult{Rcode::kServFail, {}};

  std::vector<unsigned char> request(NS_PACKETSZ);
  const int request_length =
      res_nmkquery(statp, ns_o_query, name.str().c_str(), ns_c_in,
                   wire_type(type), nullptr, 0, nullptr, request.data(),
                   static_cast<int>(request.size()));
  if (request_length < 0) return QueryResult{Rcode::kServFail, {}};

  std::vector<unsigned char> answer(65535);
  errno = 0;
  const int answer_length =
      res_nsend(statp, request.data(), request_length, answer.data(),
                static_cast<int>(answer.size()));
  if (answer_length < 0) {
    return QueryResult{errno == ECONNREFUSED ? Rcode::kRefused : Rcode::kTimeout,
                       {}};
  }
  return parse_dns_response(
      std::span<const std::uint8_t>(answer.data(),
                                    static_cast<std::size_t>(answer_length)),
      name, type);
}

QueryResult parse_dns_response(std::span<const std::uint8_t> message,
                               const DomainName& name, RecordType type) {
  ns_msg handle;
  if (ns_initparse(message.data(), static_cast<int>(message.size()), &handle) != 0) {
    return QueryResult{Rcode::kServFail, {}};
  }

  QueryResult result;
  switch (ns_msg_getflag(handle, ns_f_rcode)) {
    case ns_r_noerror: result.rcode = Rcode::kNoError; break;
    case ns_r_nxdomain: result.rcode = Rcode::kNxDomain; break;
    case ns_r_refused: result.rcode = Rcode::kRefused; break;
    default: return QueryResult{Rcode::kServFail, {}};
  }

  const int count = ns_msg_count(handle, ns_s_an);
  for (int i = 0; i < count; ++i) {
    ns_rr rr;
    if (ns_parserr(&handle, ns_s_an, i, &rr) != 0) {
      return QueryResult{Rcode::kServFail, {}};
    }
    if (ns_rr_class(rr) != ns_c_in || ns_rr_type(rr) != wire_type(type)) continue;
    const auto owner = DomainName::parse(ns_rr_name(rr));
    if (!owner || *owner != name) continue;

    const unsigned char* rdata = ns_rr_rdata(rr);
    const std::size_t rdlen = ns_rr_rdlen(rr);
    const std::uint32_t ttl = ns_rr_ttl(rr);
    switch (type) {
      case RecordType::kA:
      case RecordType::kAAAA: {
        const std::size_t width = type == RecordType::kA ? 4 : 16;
        if (rdlen != width) return QueryResult{Rcode::kServFail, {}};
        char text[INET6_ADDRSTRLEN] = {};
        inet_ntop(type == RecordType::kA ? AF_INET : AF_INET6, rdata, text,
                  sizeof(text));
        result.answers.push_back(
            DnsRecord::make(*owner, ttl, type, *IpAddress::parse(text)));
        break;
      }
      case RecordType::kCNAME:
      case RecordType::kNS: {
        char target[NS_MAXDNAME];
        if (ns_name_uncompress(ns_msg_base(handle), ns_msg_end(handle), rdata,
                               target, sizeof(target)) < 0) {
          return QueryResult{Rcode::kServFail, {}};
        }
        auto host = DomainName::parse(target);
        if (!host) continue;
        result.answers.push_back(DnsRecord::make(*owner, ttl, type, *host));
        break;
      }
      case RecordType::kCAA: {
        if (rdlen < 2 || rdata[1] == 0 || 2u + rdata[1] > rdlen) {
          return QueryResult{Rcode::kServFail, {}};
        }
        CaaData caa;
        caa.flags = rdata[0];
        caa.tag.assign(reinterpret_cast<const char*>(rdata + 2), rdata[1]);
        caa.value.assign(reinterpret_cast<const char*>(rdata + 2 + rdata[1]),
                         rdlen - 2 - rdata[1]);
        result.answers.push_back(DnsRecord::make(*owner, ttl, type, caa));
        break;
      }
    }
  }
  return result;
}

}  // namespace relscan
