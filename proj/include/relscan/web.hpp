#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "relscan/capability.hpp"
#include "relscan/csp.hpp"
#include "relscan/http.hpp"
#include "relscan/psl.hpp"
#include "relscan/takeover.hpp"
#include "relscan/url.hpp"

namespace relscan {

// Character classes seen in a cookie value.
enum ValueClass : std::uint8_t {
  kLower = 1,
  kUpper = 2,
  kDigit = 4,
  kOtherChar = 8,
};

// A cookie as set by a response. The value itself is never kept.
struct ObservedCookie {
  std::string name;
  std::size_t value_length = 0;
  std::uint8_t value_classes = 0;
  std::optional<DomainName> domain_attr;
  std::string path = "/";
  bool secure = false;
  bool http_only = false;
  std::optional<std::string> same_site;
  CookiePrefix prefix = CookiePrefix::kNone;
  bool host_only = true;
  std::string set_by;  // host of the response that set it
  std::vector<std::string> malformed;

  CookieAttributes attributes() const { return {http_only, secure, prefix}; }
};

// Parses one Set-Cookie value received from |request_url|. Returns nullopt
// (with |error|) for cookies a browser would reject.
std::optional<ObservedCookie> parse_set_cookie(std::string_view header,
                                               const Url& request_url,
                                               const PublicSuffixList& psl,
                                               std::string* error = nullptr);

// Set-Cookie with the value replaced by its length, for logs and reports.
std::string redact_set_cookie(std::string_view header);

struct CspHeader {
  CspDisposition disposition = CspDisposition::kEnforce;
  std::string value;
};

struct RedirectHop {
  std::string url;
  int status = 0;
};

struct PageObservation {
  std::string url;
  std::string final_url;
  std::string final_host;
  int status = 0;
  // Empty on success; "redirect-limit", "tls-error", "network-error", ...
  std::string error;
  std::string error_detail;
  std::vector<RedirectHop> hops;
  std::vector<CspHeader> csp_headers;        // final response only
  std::vector<std::string> set_cookie_headers;  // redacted, every hop
  std::vector<ObservedCookie> cookies;          // every hop, per-hop host
  std::vector<std::string> cookie_warnings;
  std::string body;  // at most the client's body cap
  std::string fetched_at;

  bool ok() const { return error.empty(); }
  std::vector<CspPolicy> enforced_policies() const;
  std::vector<CspPolicy> report_only_policies() const;
};

struct FetchOptions {
  int max_redirects = 10;
  // Fixed timestamp for reproducible reports; empty uses the clock.
  std::string fixed_timestamp;
};

PageObservation fetch_page(const Url& url, const HttpClient& client,
                           const PublicSuffixList& psl,
                           const FetchOptions& options = {});

struct SessionHeuristic {
  std::vector<std::string> name_tokens = {"sess", "sid", "auth", "token",
                                          "login", "user", "account"};
  std::vector<std::string> preference_names = {
      "_ga", "_gid", "_gat", "_fbp", "_gcl_au", "__utma", "__utmb", "__utmc",
      "__utmz", "_hjid", "locale", "lang", "language", "theme", "consent",
      "cookieconsent_status", "optanonconsent", "timezone", "tz", "currency",
      "country", "region", "dark_mode", "nid", "ide", "test_cookie"};
  std::size_t min_value_length = 16;
};

bool is_session_cookie(const ObservedCookie& cookie,
                       const SessionHeuristic& heuristic = {});

enum class Risk : std::uint8_t { kSafe, kAtRisk, kImmune };
std::string_view to_string(Risk risk);

struct CookieVerdict {
  Risk confidentiality = Risk::kSafe;
  Risk integrity = Risk::kSafe;
  std::vector<std::size_t> confidentiality_findings;
  std::vector<std::size_t> integrity_findings;
  std::string confidentiality_requirement;
  std::string integrity_requirement;
};

// |page_host| is the host the cookie was observed on.
CookieVerdict classify_cookie(const ObservedCookie& cookie, const DomainName& page_host,
                              const std::vector<TakeoverFinding>& findings,
                              const PublicSuffixList& psl);

enum class CorsTestKind : std::uint8_t {
  kRelatedRandom,        // https://<nonce>.<registrable>
  kPrefixOfRegistrable,  // https://<registrable><nonce>.<nonce>.test
  kSuffixOfRegistrable,  // https://<nonce><registrable>
};
std::string_view to_string(CorsTestKind kind);

struct CorsTest {
  CorsTestKind kind = CorsTestKind::kRelatedRandom;
  std::string origin;
  Tri allow_origin = Tri::kUnknown;  // kUnknown: the request failed
  bool allow_credentials = false;
  std::string detail;
};

struct CorsProbeResult {
  std::string target;
  std::array<CorsTest, 3> tests;
};

std::array<std::string, 3> cors_probe_origins(const SiteKey& registrable,
                                              std::uint64_t seed);

CorsProbeResult probe_cors(const Url& target, const SiteKey& registrable,
                           std::uint64_t seed, const HttpClient& client);

enum class CorsClass : std::uint8_t {
  kSafe,
  kSafeCapabilityGap,
  kRelatedDomainExploitable,
  kWebAttackerVulnerable,
  kUnknown,
};
std::string_view to_string(CorsClass value);

struct CorsVerdict {
  CorsClass verdict = CorsClass::kSafe;
  bool credentialed = false;
  std::vector<std::size_t> findings;
  std::string requirement;
  std::string note;
};

CorsVerdict classify_cors(const CorsProbeResult& result, const DomainName& target_host,
                          const std::vector<TakeoverFinding>& findings,
                          const PublicSuffixList& psl);

struct SecurityContact {
  std::string source_url;
  std::vector<std::string> contact_uris;
  std::vector<std::string> policy_uris;
  std::vector<std::pair<std::string, std::string>> raw_fields;
  std::vector<std::string> warnings;
};

// Parses security.txt text. nullopt when no valid Contact field exists;
// |warnings| collects field-level problems either way.
std::optional<SecurityContact> parse_security_txt(std::string_view text,
                                                  std::string source_url,
                                                  std::vector<std::string>* warnings);

struct SecurityTxtResult {
  std::optional<SecurityContact> contact;
  std::vector<std::string> notes;
};

// Tries /.well-known/security.txt, then /security.txt.
SecurityTxtResult fetch_security_txt(const Origin& site, const HttpClient& client);

}  // namespace relscan
