#include "relscan/web.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <chrono>
#include <ctime>
#include <functional>

namespace relscan {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && lower(s.substr(0, prefix.size())) == lower(prefix);
}

std::uint8_t classes_of(std::string_view value) {
  std::uint8_t mask = 0;
  for (unsigned char c : value) {
    if (std::islower(c)) mask |= kLower;
    else if (std::isupper(c)) mask |= kUpper;
    else if (std::isdigit(c)) mask |= kDigit;
    else mask |= kOtherChar;
  }
  return mask;
}

// RFC 6265 default-path.
std::string default_cookie_path(const Url& url) {
  std::string path = url.path();
  if (path.empty() || path.front() != '/') return "/";
  auto slash = path.rfind('/');
  if (slash == 0) return "/";
  return path.substr(0, slash);
}

std::string now_iso8601() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string error_label(HttpError error) {
  switch (error) {
    case HttpError::kTls: return "tls-error";
    case HttpError::kTimeout: return "timeout";
    case HttpError::kNetwork: return "network-error";
    case HttpError::kNone: break;
  }
  return "";
}

bool is_redirect(int status) {
  return status == 301 || status == 302 || status == 303 || status == 307 ||
         status == 308;
}

struct FollowOutcome {
  std::optional<HttpResult> last;
  Url final_url;
  std::string error;
  std::string detail;
  std::vector<RedirectHop> hops;
};

// GETs |start| and follows up to |max_redirects| redirects. |on_response| sees
// every response, including intermediate hops.
FollowOutcome follow(const Url& start, const HttpClient& client, int max_redirects,
                     const HeaderList& headers,
                     const std::function<void(const Url&, const HttpResponse&)>& on_response) {
  FollowOutcome out{std::nullopt, start, "", "", {}};
  Url current = start;
  for (int redirects = 0;; ++redirects) {
    HttpResult result = client.get(HttpRequest{current, headers});
    out.final_url = current;
    if (!result.ok()) {
      out.error = error_label(result.error);
      out.detail = result.detail;
      out.last = std::move(result);
      return out;
    }
    if (on_response) on_response(current, result.response);
    auto location = header_value(result.response.headers, "location");
    if (!is_redirect(result.response.status) || !location) {
      out.last = std::move(result);
      return out;
    }
    out.hops.push_back({current.str(), result.response.status});
    if (redirects >= max_redirects) {
      out.error = "redirect-limit";
      out.detail = "more than " + std::to_string(max_redirects) + " redirects";
      out.last = std::move(result);
      return out;
    }
    auto next = current.resolve(*location);
    if (!next) {
      out.error = "bad-redirect";
      out.detail = "unusable Location: " + *location;
      out.last = std::move(result);
      return out;
    }
    current = *next;
  }
}

bool host_is_name(const Origin& origin) {
  return !origin.host.empty() && origin.host.front() != '[' &&
         DomainName::parse(origin.host).has_value();
}

}  // namespace

std::optional<ObservedCookie> parse_set_cookie(std::string_view header,
                                               const Url& request_url,
                                               const PublicSuffixList& psl,
                                               std::string* error) {
  auto fail = [&](std::string why) -> std::optional<ObservedCookie> {
    if (error) *error = std::move(why);
    return std::nullopt;
  };

  auto semi = header.find(';');
  std::string_view pair = trim(header.substr(0, semi));
  std::string_view attrs = semi == std::string_view::npos ? std::string_view{}
                                                          : header.substr(semi + 1);
  auto eq = pair.find('=');
  if (eq == std::string_view::npos) return fail("no name=value pair");
  std::string_view name = trim(pair.substr(0, eq));
  std::string_view value = trim(pair.substr(eq + 1));
  if (name.empty()) return fail("empty cookie name");
  if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
    value = value.substr(1, value.size() - 2);

  ObservedCookie cookie;
  cookie.name = std::string(name);
  cookie.value_length = value.size();
  cookie.value_classes = classes_of(value);
  cookie.set_by = request_url.origin.host;
  cookie.path = default_cookie_path(request_url);

  std::optional<std::string> domain_text;
  while (!attrs.empty()) {
    auto next = attrs.find(';');
    std::string_view attr = trim(attrs.substr(0, next));
    attrs = next == std::string_view::npos ? std::string_view{} : attrs.substr(next + 1);
    if (attr.empty()) continue;
    auto aeq = attr.find('=');
    std::string key = lower(trim(attr.substr(0, aeq)));
    std::string_view aval =
        aeq == std::string_view::npos ? std::string_view{} : trim(attr.substr(aeq + 1));
    if (key == "domain") {
      while (!aval.empty() && aval.front() == '.') aval.remove_prefix(1);
      if (!aval.empty()) domain_text = lower(aval);
    } else if (key == "path") {
      if (!aval.empty() && aval.front() == '/') cookie.path = std::string(aval);
    } else if (key == "secure") {
      cookie.secure = true;
    } else if (key == "httponly") {
      cookie.http_only = true;
    } else if (key == "samesite") {
      cookie.same_site = lower(aval);
    }
  }

  const bool https = request_url.origin.scheme == "https";
  if (cookie.secure && !https) return fail("Secure cookie set over http");

  if (domain_text) {
    auto host = DomainName::parse(request_url.origin.host);
    auto domain = DomainName::parse(*domain_text);
    if (!host || !domain) return fail("invalid Domain attribute: " + *domain_text);
    if (psl.is_public_suffix(*domain)) {
      if (!(*domain == *host)) return fail("Domain attribute is a public suffix");
      cookie.malformed.push_back("Domain equals a public suffix host; treated as host-only");
    } else if (!host->is_within(*domain)) {
      return fail("Domain attribute does not cover the setting host");
    } else {
      cookie.domain_attr = *domain;
      cookie.host_only = false;
    }
  }

  if (cookie.name.starts_with("__Host-")) {
    if (!cookie.secure || !https || domain_text || cookie.path != "/")
      return fail("malformed __Host- cookie");
    cookie.prefix = CookiePrefix::kHost;
  } else if (cookie.name.starts_with("__Secure-")) {
    if (!cookie.secure || !https) return fail("malformed __Secure- cookie");
    cookie.prefix = CookiePrefix::kSecure;
  }
  return cookie;
}

std::string redact_set_cookie(std::string_view header) {
  auto semi = header.find(';');
  std::string_view pair = header.substr(0, semi);
  std::string_view rest = semi == std::string_view::npos ? std::string_view{}
                                                         : header.substr(semi);
  auto eq = pair.find('=');
  if (eq == std::string_view::npos) return "<unparsable>" + std::string(rest);
  std::string_view value = trim(pair.substr(eq + 1));
  return std::string(trim(pair.substr(0, eq))) + "=<" + std::to_string(value.size()) +
         " bytes>" + std::string(rest);
}

std::vector<CspPolicy> PageObservation::enforced_policies() const {
  std::vector<CspPolicy> out;
  for (const auto& h : csp_headers) {
    if (h.disposition != CspDisposition::kEnforce) continue;
    for (auto& p : parse_csp_header(h.value, h.disposition)) out.push_back(std::move(p));
  }
  return out;
}

std::vector<CspPolicy> PageObservation::report_only_policies() const {
  std::vector<CspPolicy> out;
  for (const auto& h : csp_headers) {
    if (h.disposition != CspDisposition::kReportOnly) continue;
    for (auto& p : parse_csp_header(h.value, h.disposition)) out.push_back(std::move(p));
  }
  return out;
}

PageObservation fetch_page(const Url& url, const HttpClient& client,
                           const PublicSuffixList& psl, const FetchOptions& options) {
  PageObservation page;
  page.url = url.str();
  page.fetched_at = options.fixed_timestamp.empty() ? now_iso8601() : options.fixed_timestamp;

  auto outcome = follow(url, client, options.max_redirects, {},
                        [&](const Url& at, const HttpResponse& response) {
                          for (const auto& raw : header_values(response.headers, "set-cookie")) {
                            page.set_cookie_headers.push_back(redact_set_cookie(raw));
                            std::string why;
                            if (!host_is_name(at.origin)) continue;
                            if (auto c = parse_set_cookie(raw, at, psl, &why))
                              page.cookies.push_back(std::move(*c));
                            else
                              page.cookie_warnings.push_back(at.origin.host + ": " + why);
                          }
                        });
  page.hops = std::move(outcome.hops);
  page.final_url = outcome.final_url.str();
  page.final_host = outcome.final_url.origin.host;
  page.error = outcome.error;
  page.error_detail = outcome.detail;
  if (outcome.last && outcome.last->ok()) {
    const HttpResponse& last = outcome.last->response;
    page.status = last.status;
    if (page.error.empty()) {
      for (const auto& v : header_values(last.headers, "content-security-policy"))
        page.csp_headers.push_back({CspDisposition::kEnforce, v});
      for (const auto& v : header_values(last.headers, "content-security-policy-report-only"))
        page.csp_headers.push_back({CspDisposition::kReportOnly, v});
      page.body = last.body;
    }
  }
  return page;
}

bool is_session_cookie(const ObservedCookie& cookie, const SessionHeuristic& heuristic) {
  std::string_view base = cookie.name;
  if (base.starts_with("__Host-")) base.remove_prefix(7);
  else if (base.starts_with("__Secure-")) base.remove_prefix(9);
  const std::string name = lower(base);

  for (const auto& pref : heuristic.preference_names) {
    if (name == pref) return false;
    if (name.size() > pref.size() && name.starts_with(pref) &&
        (name[pref.size()] == '_' || name[pref.size()] == '.'))
      return false;
  }
  for (const auto& token : heuristic.name_tokens)
    if (name.find(token) != std::string::npos) return true;

  const int classes = std::popcount(
      static_cast<unsigned>(cookie.value_classes & (kLower | kUpper | kDigit)));
  return cookie.value_length >= heuristic.min_value_length && classes >= 2;
}

std::string_view to_string(Risk risk) {
  switch (risk) {
    case Risk::kSafe: return "safe";
    case Risk::kAtRisk: return "at_risk";
    case Risk::kImmune: return "immune";
  }
  return "?";
}

CookieVerdict classify_cookie(const ObservedCookie& cookie, const DomainName& page_host,
                              const std::vector<TakeoverFinding>& findings,
                              const PublicSuffixList& psl) {
  CookieVerdict verdict;
  const auto conf_ctx = ThreatContext::for_cookie(Threat::kCookieConfidentiality,
                                                  cookie.attributes());
  const auto integ_ctx = ThreatContext::for_cookie(Threat::kCookieIntegrity,
                                                   cookie.attributes());
  const auto conf_req = required_for(conf_ctx);
  const auto integ_req = required_for(integ_ctx);
  verdict.confidentiality_requirement = conf_req.str();
  verdict.integrity_requirement = integ_req.str();

  if (conf_req.immune) {
    verdict.confidentiality = Risk::kImmune;
  } else if (cookie.domain_attr) {
    for (std::size_t i = 0; i < findings.size(); ++i) {
      const auto& f = findings[i];
      if (f.actionable() && f.domain.is_within(*cookie.domain_attr) &&
          exploitable(f.granted, conf_ctx))
        verdict.confidentiality_findings.push_back(i);
    }
    if (!verdict.confidentiality_findings.empty()) verdict.confidentiality = Risk::kAtRisk;
  }

  if (integ_req.immune) {
    verdict.integrity = Risk::kImmune;
  } else {
    for (std::size_t i = 0; i < findings.size(); ++i) {
      const auto& f = findings[i];
      if (f.actionable() && grants_related_position(f, page_host, psl) &&
          exploitable(f.granted, integ_ctx))
        verdict.integrity_findings.push_back(i);
    }
    if (!verdict.integrity_findings.empty()) verdict.integrity = Risk::kAtRisk;
  }
  return verdict;
}

std::string_view to_string(CorsTestKind kind) {
  switch (kind) {
    case CorsTestKind::kRelatedRandom: return "related_random";
    case CorsTestKind::kPrefixOfRegistrable: return "starts_with_registrable";
    case CorsTestKind::kSuffixOfRegistrable: return "ends_with_registrable";
  }
  return "?";
}

std::array<std::string, 3> cors_probe_origins(const SiteKey& registrable,
                                              std::uint64_t seed) {
  NonceGenerator nonces(seed);
  const std::string reg = registrable.etld_plus_one.str();
  const std::string n1 = nonces.next();
  const std::string n2 = nonces.next().substr(0, 8);
  const std::string n3 = nonces.next().substr(0, 12);
  const std::string n4 = nonces.next().substr(0, 8);
  return {"https://" + n1 + "." + reg,
          "https://" + reg + n2 + "." + n3 + ".test",
          "https://" + n4 + reg};
}

CorsProbeResult probe_cors(const Url& target, const SiteKey& registrable,
                           std::uint64_t seed, const HttpClient& client) {
  CorsProbeResult result;
  result.target = target.str();
  const auto origins = cors_probe_origins(registrable, seed);
  constexpr CorsTestKind kinds[] = {CorsTestKind::kRelatedRandom,
                                    CorsTestKind::kPrefixOfRegistrable,
                                    CorsTestKind::kSuffixOfRegistrable};
  for (std::size_t i = 0; i < 3; ++i) {
    CorsTest& test = result.tests[i];
    test.kind = kinds[i];
    test.origin = origins[i];
    HttpResult r = client.get(HttpRequest{target, {{"origin", origins[i]}}});
    if (!r.ok()) {
      test.allow_origin = Tri::kUnknown;
      test.detail = error_label(r.error) + (r.detail.empty() ? "" : ": " + r.detail);
      continue;
    }
    auto acao = header_value(r.response.headers, "access-control-allow-origin");
    auto acac = header_value(r.response.headers, "access-control-allow-credentials");
    test.allow_origin = acao && trim(*acao) == origins[i] ? Tri::kTrue : Tri::kFalse;
    test.allow_credentials = test.allow_origin == Tri::kTrue && acac && trim(*acac) == "true";
    if (acao && trim(*acao) == "*") test.detail = "wildcard allow-origin";
    else if (!acao) test.detail = "no allow-origin";
  }
  return result;
}

std::string_view to_string(CorsClass value) {
  switch (value) {
    case CorsClass::kSafe: return "safe";
    case CorsClass::kSafeCapabilityGap: return "safe_capability_gap";
    case CorsClass::kRelatedDomainExploitable: return "related_domain_exploitable";
    case CorsClass::kWebAttackerVulnerable: return "web_attacker_vulnerable";
    case CorsClass::kUnknown: return "unknown";
  }
  return "?";
}

CorsVerdict classify_cors(const CorsProbeResult& result, const DomainName& target_host,
                          const std::vector<TakeoverFinding>& findings,
                          const PublicSuffixList& psl) {
  CorsVerdict verdict;
  auto url = Url::parse(result.target);
  const bool https = url && url->origin.scheme == "https";
  const auto ctx = ThreatContext::for_threat(Threat::kCors, https);
  verdict.requirement = required_for(ctx).str();

  const auto& related = result.tests[0];
  const auto& prefix = result.tests[1];
  const auto& suffix = result.tests[2];

  if (prefix.allow_origin == Tri::kTrue || suffix.allow_origin == Tri::kTrue) {
    verdict.verdict = CorsClass::kWebAttackerVulnerable;
    verdict.credentialed = (prefix.allow_origin == Tri::kTrue && prefix.allow_credentials) ||
                           (suffix.allow_origin == Tri::kTrue && suffix.allow_credentials);
    verdict.note = "origin validation accepts unrelated sites";
    return verdict;
  }
  if (related.allow_origin == Tri::kTrue) {
    verdict.credentialed = related.allow_credentials;
    for (std::size_t i = 0; i < findings.size(); ++i) {
      const auto& f = findings[i];
      if (f.actionable() && grants_related_position(f, target_host, psl) &&
          exploitable(f.granted, ctx))
        verdict.findings.push_back(i);
    }
    verdict.verdict = verdict.findings.empty() ? CorsClass::kSafeCapabilityGap
                                               : CorsClass::kRelatedDomainExploitable;
    if (prefix.allow_origin == Tri::kUnknown || suffix.allow_origin == Tri::kUnknown)
      verdict.note = "unrelated-origin tests indeterminate";
    return verdict;
  }
  const bool all_unknown = std::all_of(result.tests.begin(), result.tests.end(),
                                       [](const CorsTest& t) { return t.allow_origin == Tri::kUnknown; });
  if (all_unknown) {
    verdict.verdict = CorsClass::kUnknown;
    verdict.note = "all probes failed";
    return verdict;
  }
  verdict.verdict = CorsClass::kSafe;
  for (const auto& t : result.tests)
    if (t.allow_origin == Tri::kUnknown)
      verdict.note += (verdict.note.empty() ? "indeterminate: " : ", ") +
                      std::string(to_string(t.kind));
  return verdict;
}

std::optional<SecurityContact> parse_security_txt(std::string_view text,
                                                  std::string source_url,
                                                  std::vector<std::string>* warnings) {
  SecurityContact contact;
  contact.source_url = std::move(source_url);
  auto warn = [&](std::string w) { contact.warnings.push_back(std::move(w)); };

  bool in_signature = false;
  bool in_armor_header = false;
  bool saw_expires = false;
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;

    if (line.starts_with("-----BEGIN PGP SIGNED MESSAGE-----")) {
      in_armor_header = true;
      continue;
    }
    if (in_armor_header) {
      if (line.empty()) in_armor_header = false;
      continue;
    }
    if (line.starts_with("-----BEGIN PGP SIGNATURE-----")) in_signature = true;
    if (in_signature) {
      if (line.starts_with("-----END PGP SIGNATURE-----")) in_signature = false;
      continue;
    }
    if (line.empty() || line.front() == '#') continue;
    if (line.starts_with("- ")) line.remove_prefix(2);  // dash-escaped

    auto colon = line.find(':');
    if (colon == std::string_view::npos || colon == 0) {
      warn("line " + std::to_string(line_no) + ": not a field");
      continue;
    }
    std::string field = lower(trim(line.substr(0, colon)));
    std::string value(trim(line.substr(colon + 1)));
    contact.raw_fields.emplace_back(field, value);

    if (field == "contact") {
      if (starts_with_ci(value, "mailto:") || starts_with_ci(value, "https://") ||
          starts_with_ci(value, "tel:"))
        contact.contact_uris.push_back(value);
      else
        warn("line " + std::to_string(line_no) + ": unusable Contact URI " + value);
    } else if (field == "policy") {
      contact.policy_uris.push_back(value);
    } else if (field == "expires") {
      saw_expires = true;
    }
  }
  if (!saw_expires) warn("missing Expires field");
  if (contact.contact_uris.empty()) warn("no usable Contact field");
  if (warnings) warnings->insert(warnings->end(), contact.warnings.begin(), contact.warnings.end());
  if (contact.contact_uris.empty()) return std::nullopt;
  return contact;
}

SecurityTxtResult fetch_security_txt(const Origin& site, const HttpClient& client) {
  SecurityTxtResult result;
  for (const char* path : {"/.well-known/security.txt", "/security.txt"}) {
    Url url{site, path};
    auto outcome = follow(url, client, 5, {}, nullptr);
    const std::string at = url.str();
    if (!outcome.error.empty()) {
      result.notes.push_back(at + ": " + outcome.error);
      continue;
    }
    const HttpResponse& response = outcome.last->response;
    if (response.status != 200) {
      result.notes.push_back(at + ": status " + std::to_string(response.status));
      continue;
    }
    auto type = header_value(response.headers, "content-type");
    if (type && !starts_with_ci(trim(*type), "text/plain")) {
      result.notes.push_back(at + ": content-type " + *type);
      continue;
    }
    std::vector<std::string> warnings;
    auto contact = parse_security_txt(response.body, outcome.final_url.str(), &warnings);
    for (const auto& w : warnings) result.notes.push_back(at + ": " + w);
    if (contact) {
      result.contact = std::move(contact);
      return result;
    }
  }
  return result;
}

}  // namespace relscan
