#include "relscan/csp.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>

#include "relscan/ip.hpp"

namespace relscan {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f';
}

std::string_view strip(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

bool valid_scheme(std::string_view s) {
  if (s.empty() || !std::isalpha(static_cast<unsigned char>(s[0]))) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '+' || c == '-' || c == '.';
  });
}

bool valid_host_chars(std::string_view s) {
  if (s.empty() || s.front() == '.' || s.back() == '.') return false;
  if (s.find("..") != std::string_view::npos) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '-' || c == '.';
  });
}

bool is_base64ish(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '+' || c == '/' || c == '-' || c == '_' || c == '=';
  });
}

// Directives whose value is a source list.
bool is_source_list_directive(std::string_view name) {
  static const std::set<std::string, std::less<>> kNames = {
      "default-src",  "script-src",     "script-src-elem", "script-src-attr",
      "style-src",    "style-src-elem", "style-src-attr",  "object-src",
      "frame-src",    "child-src",      "frame-ancestors", "img-src",
      "connect-src",  "font-src",       "media-src",       "manifest-src",
      "worker-src",   "prefetch-src",   "base-uri",        "form-action",
      "navigate-to"};
  return kNames.contains(name);
}

bool is_known_directive(std::string_view name) {
  static const std::set<std::string, std::less<>> kOther = {
      "sandbox",        "report-uri",  "report-to", "upgrade-insecure-requests",
      "block-all-mixed-content", "plugin-types", "require-trusted-types-for",
      "trusted-types",  "require-sri-for", "referrer", "reflected-xss",
      "disown-opener"};
  return is_source_list_directive(name) || kOther.contains(name);
}

bool scheme_part_match(std::string_view a, std::string_view b) {
  return a == b || (a == "http" && b == "https") ||
         (a == "ws" && (b == "wss" || b == "http" || b == "https")) ||
         (a == "wss" && b == "https");
}

bool has_keyword(const CspDirective& d, std::string_view keyword) {
  return std::any_of(d.sources.begin(), d.sources.end(), [&](const SourceExpression& s) {
    return s.kind == SourceExpression::Kind::kKeyword && s.keyword == keyword;
  });
}

bool has_nonce_or_hash(const CspDirective& d) {
  return std::any_of(d.sources.begin(), d.sources.end(), [](const SourceExpression& s) {
    return s.kind == SourceExpression::Kind::kNonce ||
           s.kind == SourceExpression::Kind::kHash;
  });
}

}  // namespace

std::optional<SourceExpression> SourceExpression::parse(std::string_view token) {
  SourceExpression out;
  out.raw = std::string(token);
  if (token.empty()) return std::nullopt;

  if (token.size() >= 2 && token.front() == '\'' && token.back() == '\'') {
    const std::string inner = std::string(token.substr(1, token.size() - 2));
    const std::string lowered = lower(inner);
    static const std::set<std::string> kKeywords = {
        "self", "none", "unsafe-inline", "unsafe-eval", "strict-dynamic",
        "unsafe-hashes", "report-sample", "wasm-unsafe-eval", "unsafe-allow-redirects"};
    if (kKeywords.contains(lowered)) {
      out.kind = Kind::kKeyword;
      out.keyword = lowered;
      return out;
    }
    if (lowered.starts_with("nonce-") && is_base64ish(inner.substr(6))) {
      out.kind = Kind::kNonce;
      out.value = inner.substr(6);
      return out;
    }
    for (const char* alg : {"sha256-", "sha384-", "sha512-"}) {
      const std::string_view prefix(alg);
      if (lowered.starts_with(prefix) && is_base64ish(inner.substr(prefix.size()))) {
        out.kind = Kind::kHash;
        out.hash_algorithm = std::string(prefix.substr(0, prefix.size() - 1));
        out.value = inner.substr(prefix.size());
        return out;
      }
    }
    return std::nullopt;
  }

  // scheme-source: "https:"
  if (token.back() == ':' && token.find('/') == std::string_view::npos) {
    const std::string scheme = lower(token.substr(0, token.size() - 1));
    if (!valid_scheme(scheme)) return std::nullopt;
    out.kind = Kind::kScheme;
    out.scheme = scheme;
    return out;
  }

  out.kind = Kind::kHost;
  std::string_view rest = token;
  if (const auto sep = rest.find("://"); sep != std::string_view::npos) {
    out.scheme = lower(rest.substr(0, sep));
    if (!valid_scheme(out.scheme)) return std::nullopt;
    rest.remove_prefix(sep + 3);
  }
  const auto path_start = rest.find('/');
  std::string_view authority = rest.substr(0, path_start);
  if (path_start != std::string_view::npos) out.path = std::string(rest.substr(path_start));
  if (out.path.find_first_of(";,") != std::string::npos) return std::nullopt;

  std::string_view host = authority;
  if (const auto colon = authority.rfind(':'); colon != std::string_view::npos) {
    host = authority.substr(0, colon);
    const std::string_view port = authority.substr(colon + 1);
    if (port == "*") {
      out.port_wildcard = true;
    } else {
      unsigned value = 0;
      const auto [end, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
      if (port.empty() || ec != std::errc() || end != port.data() + port.size() ||
          value > 65535) {
        return std::nullopt;
      }
      out.port = static_cast<std::uint16_t>(value);
    }
  }
  if (host == "*") {
    out.host = "*";
    return out;
  }
  if (host.starts_with("*.")) {
    out.host_wildcard = true;
    host.remove_prefix(2);
  }
  if (!valid_host_chars(host)) return std::nullopt;
  out.host = lower(host);
  return out;
}

std::string_view to_string(CspDisposition disposition) {
  return disposition == CspDisposition::kEnforce ? "enforce" : "report-only";
}

const CspDirective* CspPolicy::directive(std::string_view name) const {
  for (const auto& d : directives) {
    if (d.name == name) return &d;
  }
  return nullptr;
}

CspPolicy parse_csp(std::string_view text, CspDisposition disposition) {
  CspPolicy policy;
  policy.raw = std::string(text);
  policy.disposition = disposition;

  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find(';', start), text.size());
    const std::string_view item = strip(text.substr(start, end - start));
    start = end + 1;
    if (item.empty()) continue;

    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < item.size()) {
      while (i < item.size() && is_space(item[i])) ++i;
      const std::size_t j = i;
      while (i < item.size() && !is_space(item[i])) ++i;
      if (i > j) tokens.emplace_back(item.substr(j, i - j));
    }
    CspDirective directive;
    directive.name = lower(tokens.front());
    tokens.erase(tokens.begin());

    if (policy.directive(directive.name) != nullptr) {
      policy.warnings.push_back("duplicate directive '" + directive.name + "' ignored");
      continue;
    }
    if (!is_known_directive(directive.name)) {
      policy.warnings.push_back("unknown directive '" + directive.name + "'");
    }
    if (is_source_list_directive(directive.name)) {
      for (const auto& token : tokens) {
        if (auto source = SourceExpression::parse(token)) {
          directive.sources.push_back(std::move(*source));
        } else {
          policy.warnings.push_back("invalid source expression '" + token + "' in " +
                                    directive.name);
        }
      }
    }
    directive.tokens = std::move(tokens);
    policy.directives.push_back(std::move(directive));
  }
  return policy;
}

std::vector<CspPolicy> parse_csp_header(std::string_view value,
                                        CspDisposition disposition) {
  std::vector<CspPolicy> out;
  std::size_t start = 0;
  while (start <= value.size()) {
    const auto end = std::min(value.find(',', start), value.size());
    const std::string_view item = strip(value.substr(start, end - start));
    if (!item.empty()) out.push_back(parse_csp(item, disposition));
    start = end + 1;
  }
  return out;
}

std::string_view to_string(CspThreat threat) {
  switch (threat) {
    case CspThreat::kScript: return "script";
    case CspThreat::kStyle: return "style";
    case CspThreat::kObject: return "object";
    case CspThreat::kFrame: return "frame";
    case CspThreat::kFramingControl: return "framing_control";
  }
  return "?";
}

Threat to_threat(CspThreat threat) {
  switch (threat) {
    case CspThreat::kScript: return Threat::kCspScript;
    case CspThreat::kStyle: return Threat::kCspStyle;
    case CspThreat::kObject: return Threat::kCspObject;
    case CspThreat::kFrame: return Threat::kCspFrame;
    case CspThreat::kFramingControl: return Threat::kCspFramingControl;
  }
  return Threat::kCspScript;
}

const CspDirective* effective_sources(const CspPolicy& policy, CspThreat threat) {
  auto first = [&](std::initializer_list<std::string_view> names) -> const CspDirective* {
    for (auto name : names) {
      if (const auto* d = policy.directive(name)) return d;
    }
    return nullptr;
  };
  switch (threat) {
    case CspThreat::kScript: return first({"script-src", "default-src"});
    case CspThreat::kStyle: return first({"style-src", "default-src"});
    case CspThreat::kObject: return first({"object-src", "default-src"});
    case CspThreat::kFrame: return first({"frame-src", "child-src", "default-src"});
    case CspThreat::kFramingControl: return first({"frame-ancestors"});
  }
  return nullptr;
}

bool source_matches(const SourceExpression& e, const Origin& target, const Origin& page,
                    std::optional<std::string_view> path) {
  using Kind = SourceExpression::Kind;
  switch (e.kind) {
    case Kind::kNonce:
    case Kind::kHash:
      return false;
    case Kind::kKeyword:
      if (e.keyword != "self") return false;
      if (target == page) return true;
      // 'self' admits the secure upgrade of the page origin.
      return target.host == page.host &&
             ((page.scheme == "http" && target.scheme == "https") ||
              (page.scheme == "ws" && target.scheme == "wss")) &&
             page.port == default_port(page.scheme) &&
             target.port == default_port(target.scheme);
    case Kind::kScheme:
      return scheme_part_match(e.scheme, target.scheme);
    case Kind::kHost:
      break;
  }

  if (target.host.empty()) return false;
  if (e.host == "*" && e.scheme.empty() && !e.port && !e.port_wildcard && e.path.empty()) {
    // The bare "*" expression.
    return target.scheme == "http" || target.scheme == "https" ||
           target.scheme == page.scheme;
  }

  const std::string& scheme = e.scheme.empty() ? page.scheme : e.scheme;
  if (!scheme_part_match(scheme, target.scheme)) return false;

  if (e.host != "*") {
    if (e.host_wildcard) {
      if (!target.host.ends_with("." + e.host)) return false;
    } else if (target.host != e.host) {
      return false;
    }
  }

  if (!e.port_wildcard) {
    const std::uint16_t port = e.port.value_or(default_port(scheme));
    if (target.scheme == scheme) {
      if (target.port != port) return false;
    } else if (port != default_port(scheme) ||
               target.port != default_port(target.scheme)) {
      // Scheme upgrades only carry the default port along.
      return false;
    }
  }

  if (path && !e.path.empty()) {
    if (e.path.back() == '/') {
      if (!path->starts_with(e.path)) return false;
    } else if (*path != e.path) {
      return false;
    }
  }
  return true;
}

bool allows_any_host(const CspDirective* directive, CspThreat threat) {
  if (directive == nullptr) return true;
  if (threat == CspThreat::kScript && has_keyword(*directive, "strict-dynamic")) {
    return false;
  }
  return std::any_of(directive->sources.begin(), directive->sources.end(),
                     [](const SourceExpression& s) {
                       if (s.kind == SourceExpression::Kind::kScheme) {
                         return s.scheme == "http" || s.scheme == "https" ||
                                s.scheme == "ws" || s.scheme == "wss";
                       }
                       return s.kind == SourceExpression::Kind::kHost && s.host == "*";
                     });
}

bool allows_inline(const CspDirective* directive, CspThreat threat) {
  if (threat != CspThreat::kScript && threat != CspThreat::kStyle) return false;
  if (directive == nullptr) return true;
  if (!has_keyword(*directive, "unsafe-inline")) return false;
  if (has_nonce_or_hash(*directive)) return false;
  if (threat == CspThreat::kScript && has_keyword(*directive, "strict-dynamic")) {
    return false;
  }
  return true;
}

std::string_view to_string(CspClass value) {
  switch (value) {
    case CspClass::kUnsafeWeb: return "unsafe_web";
    case CspClass::kSafe: return "safe";
    case CspClass::kPotentiallyExploitable: return "potentially_exploitable";
    case CspClass::kExploitable: return "exploitable";
  }
  return "?";
}

namespace {

// |host| is admitted by every policy under one common scheme.
bool whitelisted_by_all(const std::vector<CspPolicy>& policies, CspThreat threat,
                        const std::string& host, const Origin& page) {
  for (const char* scheme : {"https", "http"}) {
    const Origin target{scheme, host, default_port(scheme)};
    const bool all = std::all_of(policies.begin(), policies.end(), [&](const CspPolicy& p) {
      const CspDirective* d = effective_sources(p, threat);
      if (d == nullptr) return true;
      if (threat == CspThreat::kScript && has_keyword(*d, "strict-dynamic")) return false;
      return std::any_of(d->sources.begin(), d->sources.end(),
                         [&](const SourceExpression& s) {
                           return source_matches(s, target, page, std::nullopt);
                         });
    });
    if (all) return true;
  }
  return false;
}

}  // namespace

CspVerdict classify(const std::vector<CspPolicy>& policies, CspThreat threat,
                    const Origin& page, const PublicSuffixList& psl,
                    const std::vector<TakeoverFinding>& findings) {
  CspVerdict verdict;
  verdict.threat = threat;
  const ThreatContext context =
      ThreatContext::for_threat(to_threat(threat), page.scheme == "https");
  verdict.requirement = required_for(context).str();

  std::vector<const CspPolicy*> enforced;
  for (const auto& p : policies) {
    if (p.disposition == CspDisposition::kEnforce) enforced.push_back(&p);
  }
  if (enforced.empty()) {
    verdict.verdict = CspClass::kUnsafeWeb;
    verdict.reason = "no enforced policy";
    return verdict;
  }
  std::vector<CspPolicy> active;
  for (const auto* p : enforced) active.push_back(*p);

  const bool any_host = std::all_of(active.begin(), active.end(), [&](const CspPolicy& p) {
    return allows_any_host(effective_sources(p, threat), threat);
  });
  const bool any_inline = std::all_of(active.begin(), active.end(), [&](const CspPolicy& p) {
    return allows_inline(effective_sources(p, threat), threat);
  });
  if (any_host || any_inline) {
    verdict.verdict = CspClass::kUnsafeWeb;
    verdict.reason = any_host ? "any host allowed" : "arbitrary inline content allowed";
    return verdict;
  }

  const auto page_name = DomainName::parse(page.host);
  const auto site = page_name ? etld_plus_one(*page_name, psl) : std::nullopt;
  if (!site) {
    verdict.verdict = CspClass::kSafe;
    verdict.reason = "page host has no registrable domain";
    return verdict;
  }
  const DomainName& registrable = site->etld_plus_one;

  // Candidate related hosts, each with the label reported for it.
  std::vector<std::pair<DomainName, std::string>> candidates;
  auto consider = [&](const DomainName& host, const std::string& label) {
    if (host == registrable || host == *page_name) return;
    if (!is_related(host, *page_name, psl)) return;
    candidates.emplace_back(host, label);
  };
  for (const auto& policy : active) {
    const CspDirective* d = effective_sources(policy, threat);
    if (d == nullptr) continue;
    if (threat == CspThreat::kScript && has_keyword(*d, "strict-dynamic")) continue;
    for (const auto& s : d->sources) {
      if (s.kind != SourceExpression::Kind::kHost || s.host == "*") continue;
      if (IpAddress::parse(s.host)) continue;
      const auto base = DomainName::parse(s.host);
      if (!base) continue;
      if (!s.host_wildcard) {
        consider(*base, base->str());
      } else if (base->is_within(registrable)) {
        if (auto witness = DomainName::parse("relscan-witness." + base->str())) {
          consider(*witness, "*." + base->str());
        }
      } else if (registrable.is_subdomain_of(*base)) {
        if (auto witness = DomainName::parse("relscan-witness." + registrable.str())) {
          consider(*witness, "*." + base->str());
        }
      }
    }
  }
  for (const auto& f : findings) {
    if (f.actionable() && grants_related_position(f, *page_name, psl)) {
      consider(f.domain, f.domain.str());
    }
  }

  std::set<std::string> labels;
  for (const auto& [host, label] : candidates) {
    if (whitelisted_by_all(active, threat, host.str(), page) &&
        labels.insert(label).second) {
      verdict.whitelisted.push_back(label);
    }
  }

  for (std::size_t i = 0; i < findings.size(); ++i) {
    const TakeoverFinding& f = findings[i];
    if (!f.actionable() || !grants_related_position(f, *page_name, psl)) continue;
    if (f.domain == registrable || f.domain == *page_name) continue;
    if (!whitelisted_by_all(active, threat, f.domain.str(), page)) continue;
    if (exploitable(f.granted, context)) verdict.findings.push_back(i);
  }

  if (!verdict.findings.empty()) {
    verdict.verdict = CspClass::kExploitable;
    verdict.reason = "whitelisted related domain under attacker control";
  } else if (!verdict.whitelisted.empty()) {
    verdict.verdict = CspClass::kPotentiallyExploitable;
    verdict.reason = "related domains whitelisted by every policy";
  } else {
    verdict.verdict = CspClass::kSafe;
    verdict.reason = "no related domain whitelisted by every policy";
  }
  return verdict;
}

}  // namespace relscan
