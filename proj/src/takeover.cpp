#include "relscan/takeover.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

namespace relscan {
namespace {

std::string trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return std::string(s.substr(begin, end - begin + 1));
}

std::vector<std::string> words(std::string_view s) {
  std::istringstream in{std::string(s)};
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void sort_findings(std::vector<TakeoverFinding>& findings) {
  std::stable_sort(findings.begin(), findings.end(),
                   [](const TakeoverFinding& a, const TakeoverFinding& b) {
                     return std::tie(a.domain, a.vector, a.vector_ref) <
                            std::tie(b.domain, b.vector, b.vector_ref);
                   });
}

// Drops https when CAA on |domain| keeps automated CAs out.
void apply_caa(TakeoverFinding& finding, const CaaPolicy& caa) {
  if (caa.resolver == nullptr || !finding.granted.contains(Capability::kHttps)) return;
  const CaaVerdict verdict = caa_permits_automated_issuance(
      finding.domain, *caa.resolver, caa.automated_cas, caa.query);
  if (verdict.indeterminate) {
    finding.evidence.push_back("caa: indeterminate (" + verdict.note +
                               "), https kept");
    return;
  }
  if (!verdict.permits) {
    finding.granted = finding.granted.without(Capability::kHttps);
    finding.evidence.push_back("caa: " + verdict.relevant_name->str() +
                               " forbids automated issuance, https removed");
  } else if (verdict.relevant_name) {
    finding.evidence.push_back("caa: " + verdict.relevant_name->str() +
                               " permits automated issuance");
  }
}

std::string chain_excerpt(const ResolvingChain& chain) {
  std::string out = "chain:";
  for (const auto& record : chain.records) {
    out += " " + record.name.str() + " " + std::string(to_string(record.type)) +
           " " + record.data_str() + ";";
  }
  return out + " terminal " + chain.terminal.str();
}

}  // namespace

bool ServiceFingerprint::matches(const ResolvingChain& chain) const {
  switch (detection) {
    case Detection::kCnameSuffix:
    case Detection::kNsSuffix: {
      const RecordType wanted =
          detection == Detection::kCnameSuffix ? RecordType::kCNAME : RecordType::kNS;
      for (const auto& record : chain.records) {
        if (record.type != wanted) continue;
        for (const auto& suffix : suffixes) {
          if (record.target()->is_within(suffix)) return true;
        }
      }
      return false;
    }
    case Detection::kARecord:
      for (const auto& address : chain.addresses()) {
        if (addresses.contains(address)) return true;
      }
      return false;
  }
  return false;
}

bool ServiceFingerprint::unclaimed_response(const HttpResponse& response) const {
  if (check != Check::kHttpBodyMarker) return false;
  if (marker_status && response.status != *marker_status) return false;
  return std::any_of(markers.begin(), markers.end(), [&](const std::string& m) {
    return response.body.find(m) != std::string::npos;
  });
}

std::vector<ServiceFingerprint> load_service_db(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;

  std::vector<ServiceFingerprint> services;
  std::map<std::string, std::size_t> section_line;
  std::set<std::string> keys_seen;

  auto fail = [&](const std::string& row, const std::string& message) -> void {
    throw LoadError("service db line " + std::to_string(line_no) +
                    (row.empty() ? "" : " [" + row + "]") + ": " + message);
  };
  auto finish = [&] {
    if (services.empty()) return;
    const ServiceFingerprint& s = services.back();
    for (const char* key : {"detection", "check", "wildcard_claim",
                            "www_redirect_claimable", "psl_listed", "granted"}) {
      if (!keys_seen.contains(key)) {
        throw LoadError("service db [" + s.id + "] (line " +
                        std::to_string(section_line[s.id]) + "): missing '" + key + "'");
      }
    }
    if (s.check == ServiceFingerprint::Check::kHttpBodyMarker && s.markers.empty()) {
      throw LoadError("service db [" + s.id + "]: http_body_marker needs a marker");
    }
    if (s.check == ServiceFingerprint::Check::kActiveClaim && !s.markers.empty()) {
      throw LoadError("service db [" + s.id + "]: active_claim takes no markers");
    }
  };
  auto parse_bool = [&](const std::string& row, const std::string& value) {
    if (value == "true") return true;
    if (value == "false") return false;
    fail(row, "expected true or false, got '" + value + "'");
    return false;
  };

  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;

    if (!header_seen) {
      if (stripped != "format-version: 1") {
        fail("", "expected 'format-version: 1' header");
      }
      header_seen = true;
      continue;
    }

    if (stripped.front() == '[') {
      if (stripped.back() != ']' || stripped.size() < 3) fail("", "bad section header");
      finish();
      const std::string id = trim(std::string_view(stripped).substr(1, stripped.size() - 2));
      if (section_line.contains(id)) fail(id, "duplicate service id");
      section_line[id] = line_no;
      services.push_back(ServiceFingerprint{});
      services.back().id = id;
      keys_seen.clear();
      continue;
    }

    if (services.empty()) fail("", "field outside of a [service] section");
    ServiceFingerprint& s = services.back();
    const auto colon = stripped.find(':');
    if (colon == std::string::npos) fail(s.id, "expected 'key: value'");
    const std::string key = trim(std::string_view(stripped).substr(0, colon));
    const std::string value = trim(std::string_view(stripped).substr(colon + 1));
    if (key != "marker" && !keys_seen.insert(key).second) {
      fail(s.id, "repeated field '" + key + "'");
    }

    if (key == "detection") {
      const auto parts = words(value);
      if (parts.size() < 2) fail(s.id, "detection needs a kind and values");
      if (parts[0] == "cname_suffix" || parts[0] == "ns_suffix") {
        s.detection = parts[0] == "cname_suffix"
                          ? ServiceFingerprint::Detection::kCnameSuffix
                          : ServiceFingerprint::Detection::kNsSuffix;
        for (std::size_t i = 1; i < parts.size(); ++i) {
          std::string error;
          auto name = DomainName::parse(parts[i], &error);
          if (!name || name->is_wildcard()) {
            fail(s.id, "bad detection name '" + parts[i] + "'");
          }
          s.suffixes.push_back(*name);
        }
      } else if (parts[0] == "a_record") {
        s.detection = ServiceFingerprint::Detection::kARecord;
        for (std::size_t i = 1; i < parts.size(); ++i) {
          auto address = IpAddress::parse(parts[i]);
          if (!address) fail(s.id, "bad detection address '" + parts[i] + "'");
          s.addresses.insert(*address);
        }
      } else {
        fail(s.id, "unknown detection kind '" + parts[0] + "'");
      }
    } else if (key == "check") {
      const auto parts = words(value);
      if (parts.empty()) fail(s.id, "empty check");
      if (parts[0] == "active_claim" && parts.size() == 1) {
        s.check = ServiceFingerprint::Check::kActiveClaim;
      } else if (parts[0] == "http_body_marker" && parts.size() == 2) {
        s.check = ServiceFingerprint::Check::kHttpBodyMarker;
        if (parts[1] != "any") {
          const int status = std::atoi(parts[1].c_str());
          if (status < 100 || status > 599) fail(s.id, "bad status '" + parts[1] + "'");
          s.marker_status = status;
        }
      } else {
        fail(s.id, "check must be 'active_claim' or 'http_body_marker <status|any>'");
      }
    } else if (key == "marker") {
      if (value.empty()) fail(s.id, "empty marker");
      s.markers.push_back(value);
    } else if (key == "wildcard_claim") {
      s.supports_wildcard_claim = parse_bool(s.id, value);
    } else if (key == "www_redirect_claimable") {
      s.www_redirect_claimable = parse_bool(s.id, value);
    } else if (key == "psl_listed") {
      s.psl_listed = parse_bool(s.id, value);
    } else if (key == "granted") {
      std::vector<Capability> caps;
      for (const auto& word : words(value)) {
        const auto cap = parse_capability(word);
        if (!cap) fail(s.id, "unknown capability '" + word + "'");
        caps.push_back(*cap);
      }
      if (caps.empty()) fail(s.id, "granted must not be empty");
      s.granted = close(caps);
    } else if (key == "notes") {
      s.notes = value;
    } else {
      fail(s.id, "unknown field '" + key + "'");
    }
  }
  if (!header_seen) throw LoadError("service db: no services");
  finish();
  if (services.empty()) throw LoadError("service db: no services");
  return services;
}

std::vector<ServiceFingerprint> load_service_db_file(const std::string& path) {
  return load_service_db(read_file(path));
}

bool CloudProviderRanges::in_range(const IpAddress& address) const {
  return std::any_of(ranges.begin(), ranges.end(),
                     [&](const IpNetwork& net) { return net.contains(address); });
}

bool CloudProviderRanges::in_reserved(const IpAddress& address) const {
  return std::any_of(reserved.begin(), reserved.end(),
                     [&](const IpNetwork& net) { return net.contains(address); });
}

CloudProviderRanges load_cloud_ranges(std::string_view text, std::string_view source) {
  CloudProviderRanges out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& message) {
    throw LoadError(std::string(source) + ":" + std::to_string(line_no) + ": " + message);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto parts = words(line);
    if (parts.empty()) continue;
    if (parts[0] == "provider") {
      if (parts.size() != 2 || !out.provider_id.empty()) fail("bad provider line");
      out.provider_id = parts[1];
      continue;
    }
    const bool reserved = parts[0] == "reserved";
    const std::string& cidr = reserved ? (parts.size() == 2 ? parts[1] : "") : parts[0];
    if ((reserved && parts.size() != 2) || (!reserved && parts.size() != 1)) {
      fail("expected '<cidr>' or 'reserved <cidr>'");
    }
    const auto net = IpNetwork::parse(cidr);
    if (!net) fail("bad network '" + cidr + "'");
    (reserved ? out.reserved : out.ranges).push_back(*net);
  }
  if (out.provider_id.empty()) fail("missing 'provider <id>' line");
  for (const auto& r : out.reserved) {
    const bool covered = std::any_of(out.ranges.begin(), out.ranges.end(),
                                     [&](const IpNetwork& net) { return net.contains(r); });
    if (!covered) {
      throw LoadError(std::string(source) + ": reserved " + r.str() +
                      " is outside every range of " + out.provider_id);
    }
  }
  return out;
}

CloudProviderRanges load_cloud_ranges_file(const std::string& path) {
  return load_cloud_ranges(read_file(path), path);
}

const std::set<PortKey>* LivenessDataset::lookup(const IpAddress& address) const {
  const auto it = open_ports.find(address);
  return it == open_ports.end() ? nullptr : &it->second;
}

LivenessDataset load_liveness(std::string_view text, std::string_view source) {
  LivenessDataset out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& message) {
    throw LoadError(std::string(source) + ":" + std::to_string(line_no) + ": " + message);
  };
  auto parse_ports = [&](std::string_view list) {
    std::set<PortKey> ports;
    std::istringstream items{std::string(list)};
    for (std::string item; std::getline(items, item, ',');) {
      item = trim(item);
      if (item.empty()) continue;
      const auto slash = item.find('/');
      if (slash == std::string::npos) fail("bad port '" + item + "'");
      PortKey key{item.substr(0, slash), 0};
      const int port = std::atoi(item.c_str() + slash + 1);
      if ((key.protocol != "tcp" && key.protocol != "udp") || port <= 0 || port > 65535) {
        fail("bad port '" + item + "'");
      }
      key.port = static_cast<std::uint16_t>(port);
      ports.insert(key);
    }
    return ports;
  };

  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    if (stripped.front() == '#') {
      const std::string body = trim(std::string_view(stripped).substr(1));
      if (body.starts_with("probed:")) out.probed_ports = parse_ports(body.substr(7));
      continue;
    }
    const auto tab = stripped.find('\t');
    if (tab == std::string::npos) fail("expected '<address><TAB><ports>'");
    const auto address = IpAddress::parse(trim(std::string_view(stripped).substr(0, tab)));
    if (!address) fail("bad address");
    auto ports = parse_ports(std::string_view(stripped).substr(tab + 1));
    if (!out.probed_ports.empty()) {
      for (const auto& port : ports) {
        if (!out.probed_ports.contains(port)) {
          fail("port " + port.str() + " is outside the probed set");
        }
      }
    }
    out.open_ports[*address].insert(ports.begin(), ports.end());
  }
  return out;
}

LivenessDataset load_liveness_file(const std::string& path) {
  return load_liveness(read_file(path), path);
}

std::string_view to_string(Certainty certainty) {
  return certainty == Certainty::kVulnerable ? "vulnerable" : "potentially_vulnerable";
}

std::string_view to_string(Disposition disposition) {
  switch (disposition) {
    case Disposition::kConfirmed: return "confirmed";
    case Disposition::kDeferred: return "deferred";
    case Disposition::kManualCheck: return "manual-check-required";
  }
  return "?";
}

std::string TakeoverFinding::vector_label() const {
  std::string label(to_string(vector));
  if (!vector_ref.empty()) label += "(" + vector_ref + ")";
  return label;
}

bool grants_related_position(const TakeoverFinding& finding,
                             const DomainName& target,
                             const PublicSuffixList& psl) {
  return !finding.psl_listed_service && is_related(finding.domain, target, psl);
}

Tri registrability_check(const DomainName& apex, const WhoisOracle& whois,
                         const RegistrarOracle& registrar,
                         std::vector<std::string>* transcript) {
  const OracleReply who = whois.registered(apex);
  if (transcript) transcript->push_back(who.transcript);
  if (who.value == Tri::kUnknown) return Tri::kUnknown;
  if (who.value == Tri::kTrue) return Tri::kFalse;
  const OracleReply reg = registrar.available(apex);
  if (transcript) transcript->push_back(reg.transcript);
  return reg.value;
}

std::vector<TakeoverFinding> detect_expired_domains(
    const std::vector<ResolvingChain>& chains, const WhoisOracle& whois,
    const RegistrarOracle& registrar, const PublicSuffixList& psl,
    const CaaPolicy& caa) {
  std::map<DomainName, std::pair<Tri, std::vector<std::string>>> verdicts;
  std::set<DomainName> emitted;
  std::vector<TakeoverFinding> findings;

  for (const auto& chain : chains) {
    if (chain.records.empty()) continue;
    if (chain.head().type != RecordType::kCNAME ||
        chain.tail().type != RecordType::kCNAME) {
      continue;
    }
    const auto site = etld_plus_one(*chain.tail().target(), psl);
    if (!site) continue;
    const DomainName& apex = site->etld_plus_one;

    auto cached = verdicts.find(apex);
    if (cached == verdicts.end()) {
      std::vector<std::string> transcript;
      const Tri value = registrability_check(apex, whois, registrar, &transcript);
      cached = verdicts.emplace(apex, std::make_pair(value, std::move(transcript))).first;
    }
    const auto& [registrable, transcript] = cached->second;
    if (registrable == Tri::kFalse) continue;
    if (!emitted.insert(chain.domain()).second) continue;

    TakeoverFinding finding{chain.domain()};
    finding.vector = VectorKind::kExpiredDomain;
    finding.certainty = Certainty::kVulnerable;
    finding.granted = vector_default_caps(VectorKind::kExpiredDomain, std::nullopt, true);
    finding.evidence.push_back(chain_excerpt(chain));
    finding.evidence.push_back("apex " + apex.str());
    finding.evidence.insert(finding.evidence.end(), transcript.begin(), transcript.end());
    if (registrable == Tri::kUnknown) {
      finding.disposition = Disposition::kDeferred;
      finding.evidence.push_back("oracle-unavailable");
    } else {
      apply_caa(finding, caa);
    }
    findings.push_back(std::move(finding));
  }
  sort_findings(findings);
  return findings;
}

namespace {

struct ProbeOutcome {
  Tri unclaimed = Tri::kUnknown;
  std::string transcript;
};

ProbeOutcome probe_service(const DomainName& domain, const ServiceFingerprint& service,
                           const HttpClient& http) {
  const auto url = Url::parse("http://" + domain.str() + "/");
  const HttpResult result = http.get(HttpRequest{*url, {}});
  const std::string request = "GET " + url->str();
  if (!result.ok()) {
    return {Tri::kUnknown, request + " -> " + std::string(to_string(result.error)) +
                               ": " + result.detail};
  }
  const bool unclaimed = service.unclaimed_response(result.response);
  return {unclaimed ? Tri::kTrue : Tri::kFalse,
          request + " -> " + std::to_string(result.response.status) +
              (unclaimed ? ", unclaimed marker present" : ", no unclaimed marker")};
}

}  // namespace

std::vector<TakeoverFinding> detect_discontinued_services(
    const std::vector<ResolvingChain>& chains,
    const std::vector<ServiceFingerprint>& services, const Resolver& resolver,
    const HttpClient& http, const CaaPolicy& caa,
    const DiscontinuedOptions& options) {
  std::set<std::pair<DomainName, std::string>> seen;
  std::vector<TakeoverFinding> findings;
  NonceGenerator nonces(options.nonce_seed);

  auto make = [&](const DomainName& domain, const ServiceFingerprint& service,
                  const ResolvingChain& chain) {
    TakeoverFinding finding{domain};
    finding.vector = VectorKind::kDiscontinuedService;
    finding.vector_ref = service.id;
    finding.certainty = Certainty::kVulnerable;
    finding.granted = vector_default_caps(VectorKind::kDiscontinuedService,
                                          service.granted, true);
    finding.psl_listed_service =
        service.psl_listed &&
        std::any_of(service.suffixes.begin(), service.suffixes.end(),
                    [&](const DomainName& s) { return domain.is_within(s); });
    finding.evidence.push_back(chain_excerpt(chain));
    return finding;
  };

  for (const auto& chain : chains) {
    if (chain.records.empty()) continue;
    for (const auto& service : services) {
      if (!service.matches(chain)) continue;
      const DomainName& domain = chain.domain();
      if (!seen.emplace(domain, service.id).second) continue;

      if (service.check == ServiceFingerprint::Check::kActiveClaim) {
        TakeoverFinding finding = make(domain, service, chain);
        finding.disposition = Disposition::kManualCheck;
        finding.evidence.push_back("service " + service.id +
                                   " has no error marker; claim test left to the operator");
        findings.push_back(std::move(finding));
        continue;
      }

      const ProbeOutcome probe = probe_service(domain, service, http);
      if (probe.unclaimed != Tri::kFalse) {
        TakeoverFinding finding = make(domain, service, chain);
        finding.evidence.push_back(probe.transcript);
        if (probe.unclaimed == Tri::kUnknown) {
          finding.disposition = Disposition::kDeferred;
        } else {
          apply_caa(finding, caa);
        }
        findings.push_back(std::move(finding));
        continue;
      }
      if (!service.supports_wildcard_claim) continue;

      // The domain is claimed; a zone wildcard may still hand out siblings.
      const std::string nonce = nonces.next();
      const DomainName witness = domain.child(nonce);
      const ChainSet witness_chains = resolve_chain(witness, resolver, options.chains);
      for (const auto& witness_chain : witness_chains.chains) {
        if (witness_chain.records.empty() || !service.matches(witness_chain)) continue;
        const ProbeOutcome witness_probe = probe_service(witness, service, http);
        if (witness_probe.unclaimed == Tri::kFalse) break;
        TakeoverFinding finding = make(witness, service, witness_chain);
        finding.evidence.insert(finding.evidence.begin(),
                                probe.transcript + " (" + domain.str() + " is claimed)");
        finding.evidence.push_back("wildcard witness " + witness.str());
        finding.evidence.push_back(witness_probe.transcript);
        if (witness_probe.unclaimed == Tri::kUnknown) {
          finding.disposition = Disposition::kDeferred;
        } else {
          apply_caa(finding, caa);
        }
        findings.push_back(std::move(finding));
        break;
      }
    }
  }
  sort_findings(findings);
  return findings;
}

std::vector<TakeoverFinding> detect_deprovisioned_cloud(
    const std::vector<ResolvingChain>& chains,
    const std::vector<CloudProviderRanges>& providers,
    const LivenessDataset& liveness, const PingOracle& ping, const CaaPolicy& caa) {
  std::map<IpAddress, OracleReply> ping_cache;
  std::set<DomainName> emitted;
  std::vector<TakeoverFinding> findings;

  for (const auto& chain : chains) {
    if (chain.records.empty() || emitted.contains(chain.domain())) continue;
    for (const auto& address : chain.addresses()) {
      const CloudProviderRanges* provider = nullptr;
      for (const auto& p : providers) {
        if (p.in_range(address)) {
          provider = &p;
          break;
        }
      }
      if (provider == nullptr || provider->in_reserved(address)) continue;

      auto cached = ping_cache.find(address);
      if (cached == ping_cache.end()) {
        cached = ping_cache.emplace(address, ping.alive(address)).first;
      }
      const OracleReply& reply = cached->second;
      if (reply.value == Tri::kTrue) continue;

      const auto* open = liveness.lookup(address);
      if (open != nullptr && !open->empty()) continue;

      TakeoverFinding finding{chain.domain()};
      finding.vector = VectorKind::kDeprovisionedCloud;
      finding.vector_ref = provider->provider_id;
      finding.certainty = Certainty::kPotentiallyVulnerable;
      finding.granted =
          vector_default_caps(VectorKind::kDeprovisionedCloud, std::nullopt, true);
      finding.evidence.push_back(chain_excerpt(chain));
      finding.evidence.push_back(address.str() + " in " + provider->provider_id +
                                 " ranges, not reserved");
      finding.evidence.push_back(reply.transcript);
      finding.evidence.push_back(open == nullptr
                                     ? "liveness: no entry for " + address.str() +
                                           ", no open ports known"
                                     : "liveness: no open ports for " + address.str());
      if (reply.value == Tri::kUnknown) {
        finding.disposition = Disposition::kDeferred;
      } else {
        apply_caa(finding, caa);
      }
      emitted.insert(finding.domain);
      findings.push_back(std::move(finding));
      break;
    }
  }
  sort_findings(findings);
  return findings;
}

}  // namespace relscan
