#include "relscan/dns.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace relscan {

std::string_view to_string(RecordType type) {
  switch (type) {
    case RecordType::kA: return "A";
    case RecordType::kAAAA: return "AAAA";
    case RecordType::kCNAME: return "CNAME";
    case RecordType::kNS: return "NS";
    case RecordType::kCAA: return "CAA";
  }
  return "?";
}

std::optional<RecordType> parse_record_type(std::string_view text) {
  std::string upper(text);
  std::transform(upper.begin(), upper.end(), upper.begin(), ::toupper);
  if (upper == "A") return RecordType::kA;
  if (upper == "AAAA") return RecordType::kAAAA;
  if (upper == "CNAME") return RecordType::kCNAME;
  if (upper == "NS") return RecordType::kNS;
  if (upper == "CAA") return RecordType::kCAA;
  return std::nullopt;
}

std::string_view to_string(Rcode rcode) {
  switch (rcode) {
    case Rcode::kNoError: return "NOERROR";
    case Rcode::kNxDomain: return "NXDOMAIN";
    case Rcode::kServFail: return "SERVFAIL";
    case Rcode::kRefused: return "REFUSED";
    case Rcode::kTimeout: return "TIMEOUT";
  }
  return "?";
}

std::string_view to_string(Tri value) {
  switch (value) {
    case Tri::kFalse: return "false";
    case Tri::kTrue: return "true";
    case Tri::kUnknown: return "unknown";
  }
  return "?";
}

DnsRecord DnsRecord::make(DomainName name, std::uint32_t ttl, RecordType type,
                          RecordData data) {
  bool ok = false;
  switch (type) {
    case RecordType::kA:
      ok = std::holds_alternative<IpAddress>(data) &&
           std::get<IpAddress>(data).is_v4();
      break;
    case RecordType::kAAAA:
      ok = std::holds_alternative<IpAddress>(data) &&
           !std::get<IpAddress>(data).is_v4();
      break;
    case RecordType::kCNAME:
    case RecordType::kNS:
      ok = std::holds_alternative<DomainName>(data) &&
           !std::get<DomainName>(data).is_wildcard();
      break;
    case RecordType::kCAA:
      ok = std::holds_alternative<CaaData>(data) &&
           !std::get<CaaData>(data).tag.empty();
      break;
  }
  if (!ok) {
    throw std::invalid_argument("record data does not match type " +
                                std::string(to_string(type)) + " for " +
                                name.str());
  }
  return DnsRecord{std::move(name), ttl, type, std::move(data)};
}

std::string DnsRecord::data_str() const {
  if (const auto* ip = address()) return ip->str();
  if (const auto* host = target()) return host->str() + ".";
  const auto& c = std::get<CaaData>(data);
  return std::to_string(c.flags) + " " + c.tag + " \"" + c.value + "\"";
}

std::string DnsRecord::str() const {
  return name.str() + ". " + std::to_string(ttl) + " IN " +
         std::string(to_string(type)) + " " + data_str();
}

ChainTerminal ChainTerminal::resolved(std::vector<IpAddress> addresses) {
  ChainTerminal t;
  t.kind = Kind::kResolved;
  t.addresses = std::move(addresses);
  return t;
}

ChainTerminal ChainTerminal::unresolvable(Rcode rcode) {
  ChainTerminal t;
  t.kind = Kind::kUnresolvable;
  t.rcode = rcode;
  return t;
}

ChainTerminal ChainTerminal::truncated(std::string reason) {
  ChainTerminal t;
  t.kind = Kind::kTruncated;
  t.reason = std::move(reason);
  return t;
}

std::string ChainTerminal::str() const {
  switch (kind) {
    case Kind::kResolved: {
      std::string out = "resolved(";
      for (std::size_t i = 0; i < addresses.size(); ++i) {
        if (i) out += ",";
        out += addresses[i].str();
      }
      return out + ")";
    }
    case Kind::kUnresolvable:
      return "unresolvable(" + std::string(to_string(rcode)) + ")";
    case Kind::kTruncated:
      return "truncated(" + reason + ")";
  }
  return "?";
}

std::vector<IpAddress> ResolvingChain::addresses() const {
  std::vector<IpAddress> out;
  for (const auto& record : records) {
    if (const auto* ip = record.address()) out.push_back(*ip);
  }
  for (const auto& ip : terminal.addresses) {
    if (std::find(out.begin(), out.end(), ip) == out.end()) out.push_back(ip);
  }
  return out;
}

bool ResolvingChain::linked() const {
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto* previous = records[i - 1].target();
    if (previous == nullptr || *previous != records[i].name) return false;
  }
  return true;
}

std::string ResolvingChain::str() const {
  std::string out;
  for (const auto& record : records) {
    out += record.str();
    out += " -> ";
  }
  return out + terminal.str();
}

bool ChainSet::has_truncated() const {
  if (failure) return true;
  return std::any_of(chains.begin(), chains.end(), [](const auto& chain) {
    return chain.terminal.kind == ChainTerminal::Kind::kTruncated &&
           (chain.terminal.reason == "timeout" ||
            chain.terminal.reason == "servfail");
  });
}

namespace {

std::string failure_reason(Rcode rcode) {
  return rcode == Rcode::kTimeout ? "timeout" : "servfail";
}

std::vector<DnsRecord> sorted(std::vector<DnsRecord> records) {
  std::sort(records.begin(), records.end(),
            [](const DnsRecord& a, const DnsRecord& b) {
              return a.data_str() < b.data_str();
            });
  return records;
}

// Extends |chain| from |target| until an address, a dead end, or a guard.
void follow(DomainName target, ResolvingChain& chain,
            std::unordered_set<std::string>& visited, const Resolver& resolver,
            const ChainOptions& options) {
  while (true) {
    if (visited.contains(target.str())) {
      chain.terminal = ChainTerminal::truncated("loop");
      return;
    }
    if (chain.records.size() >= options.max_length) {
      chain.terminal = ChainTerminal::truncated("max-length");
      return;
    }
    visited.insert(target.str());

    const QueryResult cname =
        resolver.query(target, RecordType::kCNAME, options.query);
    if (!cname.answered()) {
      chain.terminal = ChainTerminal::truncated(failure_reason(cname.rcode));
      return;
    }
    if (!cname.answers.empty()) {
      chain.records.push_back(sorted(cname.answers).front());
      target = *chain.records.back().target();
      continue;
    }

    Rcode last = cname.rcode;
    for (RecordType type : {RecordType::kA, RecordType::kAAAA}) {
      const QueryResult result = resolver.query(target, type, options.query);
      if (!result.answered()) {
        chain.terminal = ChainTerminal::truncated(failure_reason(result.rcode));
        return;
      }
      if (!result.answers.empty()) {
        auto records = sorted(result.answers);
        chain.records.push_back(records.front());
        std::vector<IpAddress> addresses;
        for (const auto& record : records) addresses.push_back(*record.address());
        chain.terminal = ChainTerminal::resolved(std::move(addresses));
        return;
      }
      last = result.rcode;
    }
    chain.terminal = ChainTerminal::unresolvable(last);
    return;
  }
}

ChainSet resolve_once(const DomainName& name, const Resolver& resolver,
                      const ChainOptions& options) {
  ChainSet set{name, {}, std::nullopt};

  const QueryResult cname = resolver.query(name, RecordType::kCNAME, options.query);
  if (!cname.answered()) {
    set.failure = failure_reason(cname.rcode);
    return set;
  }
  if (!cname.answers.empty()) {
    // A CNAME owner cannot hold other data.
    ResolvingChain chain;
    chain.records.push_back(sorted(cname.answers).front());
    std::unordered_set<std::string> visited{name.str()};
    follow(*chain.records.back().target(), chain, visited, resolver, options);
    set.chains.push_back(std::move(chain));
    return set;
  }
  if (cname.rcode == Rcode::kNxDomain) return set;

  for (RecordType type : {RecordType::kA, RecordType::kAAAA}) {
    const QueryResult result = resolver.query(name, type, options.query);
    if (!result.answered()) {
      set.failure = failure_reason(result.rcode);
      return set;
    }
    if (result.answers.empty()) continue;
    auto records = sorted(result.answers);
    ResolvingChain chain;
    chain.records.push_back(records.front());
    std::vector<IpAddress> addresses;
    for (const auto& record : records) addresses.push_back(*record.address());
    chain.terminal = ChainTerminal::resolved(std::move(addresses));
    set.chains.push_back(std::move(chain));
  }

  const QueryResult ns = resolver.query(name, RecordType::kNS, options.query);
  if (!ns.answered()) {
    set.failure = failure_reason(ns.rcode);
    return set;
  }
  if (!ns.answers.empty()) {
    ResolvingChain chain;
    chain.records.push_back(sorted(ns.answers).front());
    std::unordered_set<std::string> visited{name.str()};
    follow(*chain.records.back().target(), chain, visited, resolver, options);
    set.chains.push_back(std::move(chain));
  }
  return set;
}

}  // namespace

ChainSet resolve_chain(const DomainName& name, const Resolver& resolver,
                       const ChainOptions& options) {
  ChainSet set = resolve_once(name, resolver, options);
  if (options.retry_unterminated && set.has_truncated()) {
    ChainOptions slower = options;
    slower.query.timeout *= 2;
    set = resolve_once(name, resolver, slower);
  }
  return set;
}

std::string NonceGenerator::next() {
  static constexpr std::string_view kAlphabet =
      "abcdefghijklmnopqrstuvwxyz0123456789";
  std::uniform_int_distribution<std::size_t> pick(0, kAlphabet.size() - 1);
  std::string out(kLength, 'a');
  for (auto& c : out) c = kAlphabet[pick(engine_)];
  return out;
}

WildcardProbe detect_zone_wildcard(const DomainName& parent,
                                   const Resolver& resolver,
                                   NonceGenerator& nonces,
                                   const QueryOptions& options) {
  WildcardProbe probe{Tri::kUnknown, parent.child(nonces.next())};
  bool failed = false;
  for (RecordType type : {RecordType::kCNAME, RecordType::kA}) {
    const QueryResult result = resolver.query(probe.probe_name, type, options);
    if (!result.answered()) {
      failed = true;
      continue;
    }
    if (!result.answers.empty()) {
      probe.wildcard = Tri::kTrue;
      return probe;
    }
  }
  probe.wildcard = failed ? Tri::kUnknown : Tri::kFalse;
  return probe;
}

CaaVerdict caa_permits_automated_issuance(
    const DomainName& name, const Resolver& resolver,
    const std::set<std::string>& automated_cas, const QueryOptions& options) {
  CaaVerdict verdict;
  std::optional<DomainName> current = name;
  while (current) {
    const QueryResult result = resolver.query(*current, RecordType::kCAA, options);
    if (!result.answered()) {
      verdict.permits = true;
      verdict.indeterminate = true;
      verdict.note = "CAA lookup failed at " + current->str() + " (" +
                     std::string(to_string(result.rcode)) +
                     "); https assumed attainable";
      return verdict;
    }
    if (!result.answers.empty()) {
      verdict.relevant_name = *current;
      bool has_issue = false;
      bool allowed = false;
      for (const auto& record : result.answers) {
        const CaaData& caa = *record.caa();
        std::string tag = caa.tag;
        std::transform(tag.begin(), tag.end(), tag.begin(), ::tolower);
        if (tag == "issue") {
          has_issue = true;
          std::string issuer = caa.value.substr(0, caa.value.find(';'));
          issuer.erase(0, issuer.find_first_not_of(" \t"));
          issuer.erase(issuer.find_last_not_of(" \t") + 1);
          std::transform(issuer.begin(), issuer.end(), issuer.begin(), ::tolower);
          if (automated_cas.contains(issuer)) allowed = true;
        } else if (tag != "issuewild" && tag != "iodef" && caa.critical()) {
          verdict.permits = false;
          verdict.note = "critical CAA property '" + caa.tag + "' at " +
                         current->str() + " forbids issuance";
          return verdict;
        }
      }
      verdict.permits = !has_issue || allowed;
      verdict.note = verdict.permits
                         ? "CAA at " + current->str() + " allows an automated CA"
                         : "CAA at " + current->str() +
                               " restricts issuance to non-automated CAs";
      return verdict;
    }
    current = current->parent();
  }
  verdict.note = "no CAA record";
  return verdict;
}

}  // namespace relscan
