#include "relscan/report.hpp"

#include <functional>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace relscan {
namespace {

using nlohmann::ordered_json;

std::string value_classes_str(std::uint8_t mask) {
  std::string out;
  auto add = [&](std::uint8_t bit, const char* name) {
    if (!(mask & bit)) return;
    if (!out.empty()) out += ",";
    out += name;
  };
  add(kLower, "lower");
  add(kUpper, "upper");
  add(kDigit, "digit");
  add(kOtherChar, "other");
  return out;
}

std::string_view prefix_str(CookiePrefix prefix) {
  switch (prefix) {
    case CookiePrefix::kNone: return "none";
    case CookiePrefix::kSecure: return "secure_prefix";
    case CookiePrefix::kHost: return "host_prefix";
  }
  return "?";
}

ordered_json id_list(const ApexRecord& apex, const VulnerabilityReport& report,
                     const std::vector<std::size_t>& local) {
  ordered_json out = ordered_json::array();
  for (std::size_t i : local) out.push_back(report.findings[apex.findings.at(i)].id);
  return out;
}

ordered_json finding_json(const FindingRecord& record) {
  const TakeoverFinding& f = record.finding;
  ordered_json j;
  j["id"] = record.id;
  j["apex"] = record.apex.str();
  j["domain"] = f.domain.str();
  j["vector"] = std::string(to_string(f.vector));
  j["vector_ref"] = f.vector_ref;
  j["certainty"] = std::string(to_string(f.certainty));
  j["disposition"] = std::string(to_string(f.disposition));
  j["granted"] = f.granted.names();
  j["psl_listed_service"] = f.psl_listed_service;
  j["evidence"] = f.evidence;
  return j;
}

ordered_json cookie_json(const CookieRecord& record, const ApexRecord& apex,
                         const VulnerabilityReport& report) {
  const ObservedCookie& c = record.cookie;
  ordered_json j;
  j["name"] = c.name;
  j["set_by"] = c.set_by;
  j["value_length"] = c.value_length;
  j["value_classes"] = value_classes_str(c.value_classes);
  j["domain"] = c.domain_attr ? ordered_json(c.domain_attr->str()) : ordered_json(nullptr);
  j["host_only"] = c.host_only;
  j["path"] = c.path;
  j["secure"] = c.secure;
  j["http_only"] = c.http_only;
  j["same_site"] = c.same_site ? ordered_json(*c.same_site) : ordered_json(nullptr);
  j["prefix"] = std::string(prefix_str(c.prefix));
  j["malformed"] = c.malformed;
  j["session"] = record.session;
  j["confidentiality"] = {
      {"verdict", std::string(to_string(record.verdict.confidentiality))},
      {"requirement", record.verdict.confidentiality_requirement},
      {"findings", id_list(apex, report, record.verdict.confidentiality_findings)}};
  j["integrity"] = {
      {"verdict", std::string(to_string(record.verdict.integrity))},
      {"requirement", record.verdict.integrity_requirement},
      {"findings", id_list(apex, report, record.verdict.integrity_findings)}};
  return j;
}

ordered_json url_json(const UrlRecord& record, const ApexRecord& apex,
                      const VulnerabilityReport& report) {
  const PageObservation& p = record.page;
  ordered_json j;
  j["url"] = record.url;
  j["final_url"] = p.final_url;
  j["final_host"] = p.final_host;
  j["status"] = p.status;
  j["error"] = p.error.empty() ? ordered_json(nullptr) : ordered_json(p.error);
  j["error_detail"] = p.error_detail;
  j["fetched_at"] = p.fetched_at;
  ordered_json hops = ordered_json::array();
  for (const auto& h : p.hops) hops.push_back({{"url", h.url}, {"status", h.status}});
  j["redirects"] = hops;
  ordered_json csp_headers = ordered_json::array();
  for (const auto& h : p.csp_headers)
    csp_headers.push_back({{"disposition", std::string(to_string(h.disposition))},
                           {"value", h.value}});
  j["csp_headers"] = csp_headers;
  j["set_cookie_headers"] = p.set_cookie_headers;
  j["cookie_warnings"] = p.cookie_warnings;

  ordered_json cookies = ordered_json::array();
  for (const auto& c : record.cookies) cookies.push_back(cookie_json(c, apex, report));
  j["cookies"] = cookies;

  ordered_json csp = ordered_json::array();
  for (const auto& v : record.csp) {
    csp.push_back({{"threat", std::string(to_string(v.threat))},
                   {"verdict", std::string(to_string(v.verdict))},
                   {"whitelisted", v.whitelisted},
                   {"findings", id_list(apex, report, v.findings)},
                   {"requirement", v.requirement},
                   {"reason", v.reason}});
  }
  j["csp"] = csp;
  j["csp_report_only_policies"] = record.report_only_policies;

  if (record.cors_probe && record.cors) {
    ordered_json tests = ordered_json::array();
    for (const auto& t : record.cors_probe->tests)
      tests.push_back({{"kind", std::string(to_string(t.kind))},
                       {"origin", t.origin},
                       {"allow_origin", std::string(to_string(t.allow_origin))},
                       {"allow_credentials", t.allow_credentials},
                       {"detail", t.detail}});
    j["cors"] = {{"tests", tests},
                 {"verdict", std::string(to_string(record.cors->verdict))},
                 {"credentialed", record.cors->credentialed},
                 {"findings", id_list(apex, report, record.cors->findings)},
                 {"requirement", record.cors->requirement},
                 {"note", record.cors->note}};
  } else {
    j["cors"] = nullptr;
  }
  return j;
}

ordered_json contact_json(const std::optional<SecurityContact>& contact) {
  if (!contact) return nullptr;
  ordered_json fields = ordered_json::array();
  for (const auto& [k, v] : contact->raw_fields) fields.push_back({k, v});
  return {{"source_url", contact->source_url},
          {"contact_uris", contact->contact_uris},
          {"policy_uris", contact->policy_uris},
          {"raw_fields", fields},
          {"warnings", contact->warnings}};
}

ordered_json pair_count(std::size_t domains, std::size_t sites) {
  return {{"domains", domains}, {"sites", sites}};
}

}  // namespace

std::size_t count_indeterminate(const VulnerabilityReport& report) {
  std::size_t n = 0;
  for (const auto& f : report.findings)
    if (f.finding.disposition != Disposition::kConfirmed) ++n;
  for (const auto& apex : report.apexes)
    for (const auto& target : apex.targets)
      for (const auto& url : target.urls) {
        if (!url.page.ok()) ++n;
        if (url.cors && url.cors->verdict == CorsClass::kUnknown) ++n;
      }
  return n;
}

ordered_json summarize(const VulnerabilityReport& report) {
  ordered_json s;

  std::size_t opted_out = 0, with_findings = 0, web_probed = 0, names = 0, dns_failures = 0;
  for (const auto& a : report.apexes) {
    if (a.opted_out) ++opted_out;
    if (!a.findings.empty()) ++with_findings;
    if (a.web_probed) ++web_probed;
    names += a.names_scanned;
    dns_failures += a.dns_failures.size();
  }
  s["apexes"] = {{"configured", report.apexes.size()},
                 {"opted_out", opted_out},
                 {"scanned", report.apexes.size() - opted_out},
                 {"with_findings", with_findings},
                 {"web_probed", web_probed}};
  s["names_scanned"] = names;
  s["dns_failures"] = dns_failures;

  std::size_t confirmed = 0, deferred = 0, manual = 0;
  for (const auto& f : report.findings) {
    switch (f.finding.disposition) {
      case Disposition::kConfirmed: ++confirmed; break;
      case Disposition::kDeferred: ++deferred; break;
      case Disposition::kManualCheck: ++manual; break;
    }
  }
  s["findings"] = {{"total", report.findings.size()},
                   {"confirmed", confirmed},
                   {"deferred", deferred},
                   {"manual_check", manual}};

  // Distinct domains and sites (apexes) per vector, confirmed findings only.
  ordered_json vectors;
  std::set<std::string> vuln_domains, vuln_sites, any_domains, any_sites;
  for (VectorKind kind : {VectorKind::kExpiredDomain, VectorKind::kDiscontinuedService,
                          VectorKind::kDeprovisionedCloud}) {
    std::set<std::string> domains, sites;
    for (const auto& f : report.findings) {
      if (f.finding.vector != kind || f.finding.disposition != Disposition::kConfirmed)
        continue;
      domains.insert(f.finding.domain.str());
      sites.insert(f.apex.str());
      any_domains.insert(f.finding.domain.str());
      any_sites.insert(f.apex.str());
      if (f.finding.certainty == Certainty::kVulnerable) {
        vuln_domains.insert(f.finding.domain.str());
        vuln_sites.insert(f.apex.str());
      }
    }
    vectors[std::string(to_string(kind))] = pair_count(domains.size(), sites.size());
  }
  vectors["vulnerable"] = pair_count(vuln_domains.size(), vuln_sites.size());
  vectors["vulnerable_or_potentially"] = pair_count(any_domains.size(), any_sites.size());
  s["attack_vectors"] = vectors;

  std::size_t targets = 0, urls = 0, failed = 0, cookies = 0, session = 0, conf = 0,
              integ = 0, contacts = 0;
  std::map<std::string, std::map<std::string, std::size_t>> csp;
  for (CspThreat t : kCspThreats)
    for (CspClass c : {CspClass::kUnsafeWeb, CspClass::kSafe, CspClass::kPotentiallyExploitable,
                       CspClass::kExploitable})
      csp[std::string(to_string(t))][std::string(to_string(c))] = 0;
  std::map<std::string, std::size_t> cors;
  for (CorsClass c : {CorsClass::kSafe, CorsClass::kSafeCapabilityGap,
                      CorsClass::kRelatedDomainExploitable, CorsClass::kWebAttackerVulnerable,
                      CorsClass::kUnknown})
    cors[std::string(to_string(c))] = 0;
  std::size_t cors_credentialed = 0;

  for (const auto& a : report.apexes) {
    if (a.security_contact) ++contacts;
    targets += a.targets.size();
    for (const auto& t : a.targets) {
      for (const auto& u : t.urls) {
        ++urls;
        if (!u.page.ok()) ++failed;
        for (const auto& c : u.cookies) {
          ++cookies;
          if (!c.session) continue;
          ++session;
          if (c.verdict.confidentiality == Risk::kAtRisk) ++conf;
          if (c.verdict.integrity == Risk::kAtRisk) ++integ;
        }
        for (const auto& v : u.csp)
          ++csp[std::string(to_string(v.threat))][std::string(to_string(v.verdict))];
        if (u.cors) {
          ++cors[std::string(to_string(u.cors->verdict))];
          if (u.cors->credentialed) ++cors_credentialed;
        }
      }
    }
  }

  ordered_json csp_json;
  for (CspThreat t : kCspThreats) {
    ordered_json row;
    for (CspClass c : {CspClass::kUnsafeWeb, CspClass::kSafe, CspClass::kPotentiallyExploitable,
                       CspClass::kExploitable})
      row[std::string(to_string(c))] = csp[std::string(to_string(t))][std::string(to_string(c))];
    csp_json[std::string(to_string(t))] = row;
  }
  ordered_json cors_json;
  for (CorsClass c : {CorsClass::kSafe, CorsClass::kSafeCapabilityGap,
                      CorsClass::kRelatedDomainExploitable, CorsClass::kWebAttackerVulnerable,
                      CorsClass::kUnknown})
    cors_json[std::string(to_string(c))] = cors[std::string(to_string(c))];
  cors_json["credentialed"] = cors_credentialed;

  s["web"] = {{"targets", targets},
              {"urls", urls},
              {"urls_failed", failed},
              {"cookies",
               {{"observed", cookies},
                {"session", session},
                {"session_confidentiality_at_risk", conf},
                {"session_integrity_at_risk", integ}}},
              {"csp", csp_json},
              {"cors", cors_json},
              {"security_contacts", contacts}};
  s["indeterminate"] = count_indeterminate(report);
  return s;
}

ordered_json to_json(const VulnerabilityReport& report) {
  ordered_json j;
  j["schema"] = std::string(kReportSchema);

  const auto& m = report.metadata;
  ordered_json config;
  for (const auto& [k, v] : m.config) {
    if (!config.contains(k)) config[k] = ordered_json::array();
    config[k].push_back(v);
  }
  j["metadata"] = {{"tool", "relscan"},
                   {"version", std::string(kToolVersion)},
                   {"psl_sha256", m.psl_sha256},
                   {"service_db_sha256", m.service_db_sha256},
                   {"seed", m.seed},
                   {"offline", m.offline},
                   {"started_at", m.started_at},
                   {"finished_at", m.finished_at},
                   {"target_selection", m.target_selection},
                   {"config", config.is_null() ? ordered_json::object() : config},
                   {"notes", m.notes}};
  j["summary"] = summarize(report);

  ordered_json findings = ordered_json::array();
  for (const auto& f : report.findings) findings.push_back(finding_json(f));
  j["findings"] = findings;

  ordered_json apexes = ordered_json::array();
  for (const auto& a : report.apexes) {
    ordered_json aj;
    aj["apex"] = a.apex.str();
    aj["opted_out"] = a.opted_out;
    aj["names_scanned"] = a.names_scanned;
    aj["dns_failures"] = a.dns_failures;
    ordered_json ids = ordered_json::array();
    for (std::size_t i : a.findings) ids.push_back(report.findings[i].id);
    aj["findings"] = ids;
    aj["web_probed"] = a.web_probed;
    ordered_json targets = ordered_json::array();
    for (const auto& t : a.targets) {
      ordered_json urls = ordered_json::array();
      for (const auto& u : t.urls) urls.push_back(url_json(u, a, report));
      targets.push_back({{"host", t.host.str()}, {"urls", urls}, {"notes", t.notes}});
    }
    aj["targets"] = targets;
    aj["security_contact"] = contact_json(a.security_contact);
    aj["security_notes"] = a.security_notes;
    aj["notes"] = a.notes;
    apexes.push_back(aj);
  }
  j["apexes"] = apexes;
  return j;
}

std::vector<std::pair<std::string, long long>> flatten_counters(const ordered_json& summary) {
  std::vector<std::pair<std::string, long long>> out;
  std::function<void(const ordered_json&, const std::string&)> walk =
      [&](const ordered_json& node, const std::string& prefix) {
        if (node.is_object()) {
          for (auto it = node.begin(); it != node.end(); ++it)
            walk(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key());
        } else if (node.is_number_integer()) {
          out.emplace_back(prefix, node.get<long long>());
        }
      };
  walk(summary, "");
  return out;
}

std::string emit_report(const VulnerabilityReport& report, ReportFormat format) {
  if (format == ReportFormat::kStructured) return to_json(report).dump(2) + "\n";

  const ordered_json summary = summarize(report);
  std::ostringstream out;
  out << "relscan " << kToolVersion << "  seed " << report.metadata.seed
      << (report.metadata.offline ? "  offline" : "") << "\n\n";

  out << std::left << std::setw(24) << "apex" << std::right << std::setw(7) << "names"
      << std::setw(6) << "exp" << std::setw(6) << "svc" << std::setw(6) << "cloud"
      << std::setw(6) << "urls" << std::setw(8) << "ck-conf" << std::setw(8) << "ck-int"
      << std::setw(9) << "csp-expl" << std::setw(9) << "cors-rel" << std::setw(9)
      << "cors-web" << "\n";
  for (const auto& a : report.apexes) {
    out << std::left << std::setw(24) << a.apex.str() << std::right;
    if (a.opted_out) {
      out << "  opted out\n";
      continue;
    }
    std::size_t by_vector[3] = {0, 0, 0};
    for (std::size_t i : a.findings)
      ++by_vector[static_cast<int>(report.findings[i].finding.vector)];
    std::size_t urls = 0, conf = 0, integ = 0, csp = 0, cors_rel = 0, cors_web = 0;
    for (const auto& t : a.targets)
      for (const auto& u : t.urls) {
        ++urls;
        for (const auto& c : u.cookies) {
          if (c.session && c.verdict.confidentiality == Risk::kAtRisk) ++conf;
          if (c.session && c.verdict.integrity == Risk::kAtRisk) ++integ;
        }
        for (const auto& v : u.csp)
          if (v.verdict == CspClass::kExploitable) ++csp;
        if (u.cors && u.cors->verdict == CorsClass::kRelatedDomainExploitable) ++cors_rel;
        if (u.cors && u.cors->verdict == CorsClass::kWebAttackerVulnerable) ++cors_web;
      }
    out << std::setw(7) << a.names_scanned << std::setw(6) << by_vector[0] << std::setw(6)
        << by_vector[1] << std::setw(6) << by_vector[2] << std::setw(6) << urls
        << std::setw(8) << conf << std::setw(8) << integ << std::setw(9) << csp
        << std::setw(9) << cors_rel << std::setw(9) << cors_web << "\n";
  }

  out << "\n" << std::left << std::setw(40) << "attack vector" << std::right
      << std::setw(9) << "domains" << std::setw(7) << "sites" << "\n";
  const auto& av = summary["attack_vectors"];
  for (auto it = av.begin(); it != av.end(); ++it)
    out << std::left << std::setw(40) << it.key() << std::right << std::setw(9)
        << it.value()["domains"].get<long long>() << std::setw(7)
        << it.value()["sites"].get<long long>() << "\n";

  out << "\ncounters\n";
  for (const auto& [key, value] : flatten_counters(summary))
    out << "  " << key << " = " << value << "\n";
  return out.str();
}

void blank_timestamps(ordered_json& node) {
  if (node.is_object()) {
    for (auto it = node.begin(); it != node.end(); ++it) {
      const std::string& key = it.key();
      if (key.size() > 3 && key.ends_with("_at") && it.value().is_string())
        it.value() = "";
      else
        blank_timestamps(it.value());
    }
  } else if (node.is_array()) {
    for (auto& child : node) blank_timestamps(child);
  }
}

}  // namespace relscan
