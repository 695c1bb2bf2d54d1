// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "relscan/capability.hpp"
#include "relscan/csp.hpp"
#include "relscan/http.hpp"
#include "relscan/pipeline.hpp"
#include "relscan/psl.hpp"
#include "relscan/report.hpp"
#include "relscan/web.hpp"
#include "support.hpp"

using namespace relscan;
using namespace relscan::testsupport;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> problems;
  std::string summary;

  void fail(const std::string& why) {
    pass = false;
    if (problems.size() < 8) problems.push_back(why);
  }
  void expect(bool ok, const std::string& why) {
    if (!ok) fail(why);
  }
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::optional<std::string> registrable_of(const std::optional<std::string>& input) {
  if (!input) return std::nullopt;
  auto name = DomainName::parse(*input);
  if (!name) return std::nullopt;
  auto site = etld_plus_one(*name, real_psl());
  if (!site) return std::nullopt;
  return site->etld_plus_one.str();
}

Outcome psl_conformance() {
  Outcome out;
  const auto start = Clock::now();
  const auto vectors = load_psl_vectors(fixture_path("test_psl.txt"));
  std::size_t passed = 0;
  for (const auto& v : vectors) {
    std::optional<std::string> want;
    if (v.expected) want = to_ascii_name(*v.expected);
    const auto got = registrable_of(v.input);
    if (got == want) {
      ++passed;
    } else {
      out.fail("line " + std::to_string(v.line) + ": " + v.input.value_or("null") +
               " -> " + got.value_or("null") + ", expected " + want.value_or("null"));
    }
  }
  const double elapsed = seconds_since(start);
  out.expect(vectors.size() > 50, "too few vectors loaded");
  out.expect(elapsed < 5.0, "runtime " + std::to_string(elapsed) + " s");
  std::ostringstream s;
  s << passed << "/" << vectors.size() << " vectors, " << elapsed << " s";
  out.summary = s.str();
  return out;
}

Outcome capability_oracle() {
  Outcome out;
  std::size_t checks = 0;
  for (unsigned bits = 0; bits < 64; ++bits) {
    const CapabilityOracle oracle(bits);
    const CapabilitySet caps = CapabilitySet::from_bits(static_cast<std::uint8_t>(bits));
    for (const auto& attrs : all_cookie_attributes()) {
      for (Threat t : {Threat::kCookieConfidentiality, Threat::kCookieIntegrity}) {
        const bool want = t == Threat::kCookieConfidentiality
                              ? oracle.cookie_confidentiality(attrs)
                              : oracle.cookie_integrity(attrs);
        const bool got = exploitable(caps, ThreatContext::for_cookie(t, attrs));
        ++checks;
        if (got != want)
          out.fail(caps.str() + " " + std::string(to_string(t)) + " prefix=" +
                   std::string(to_string(attrs.prefix)) + " httponly=" +
                   std::to_string(attrs.http_only) + " secure=" + std::to_string(attrs.secure));
      }
    }
    for (Threat t : kNonCookieThreats) {
      for (bool https : {false, true}) {
        const bool want = oracle.threat(t, https);
        const bool got = exploitable(caps, ThreatContext::for_threat(t, https));
        ++checks;
        if (got != want)
          out.fail(caps.str() + " " + std::string(to_string(t)) + (https ? " https" : " http"));
      }
    }
  }
  out.summary = std::to_string(checks) + " contexts compared";
  return out;
}

const ScanConfig& corpus_config() {
  static const ScanConfig config = load_config(fixture_path("corpus/scan.conf"));
  return config;
}

bool same_finding(const ExpectedFinding& e, const TakeoverFinding& f) {
  return domain_pattern_matches(e.domain, f.domain.str()) &&
         e.vector == to_string(f.vector) && e.ref == f.vector_ref &&
         e.certainty == to_string(f.certainty) && e.disposition == to_string(f.disposition);
}

Outcome algorithm_fixtures() {
  Outcome out;
  const auto expected = load_expected_findings(fixture_path("corpus/expected_findings.txt"));
  const auto start = Clock::now();
  const ScanOutcome scan = run_scan(corpus_config());
  const double elapsed = seconds_since(start);

  std::vector<TakeoverFinding> actual;
  for (const auto& rec : scan.report.findings) actual.push_back(rec.finding);

  std::size_t true_positives = 0;
  std::vector<bool> claimed(expected.findings.size(), false);
  for (const auto& f : actual) {
    bool matched = false;
    for (std::size_t i = 0; i < expected.findings.size(); ++i) {
      if (!claimed[i] && same_finding(expected.findings[i], f)) {
        claimed[i] = matched = true;
        ++true_positives;
        break;
      }
    }
    if (!matched) out.fail("unexpected finding " + f.domain.str() + " " + f.vector_label());
  }
  for (std::size_t i = 0; i < expected.findings.size(); ++i)
    if (!claimed[i]) out.fail("missed " + expected.findings[i].domain + " " + expected.findings[i].vector);
  for (const auto& n : expected.negatives) {
    for (const auto& f : actual)
      if (f.domain.str() == n.domain && to_string(f.vector) == n.vector)
        out.fail("negative reported: " + n.domain + " " + n.vector);
  }

  std::map<std::string, std::pair<int, int>> per_vector;
  bool wildcard_case = false;
  for (const auto& e : expected.findings) {
    ++per_vector[e.vector].first;
    if (e.vector == "discontinued_service" && e.domain.starts_with("*.")) wildcard_case = true;
  }
  for (const auto& n : expected.negatives) ++per_vector[n.vector].second;
  for (const char* v : {"expired_domain", "discontinued_service", "deprovisioned_cloud"}) {
    out.expect(per_vector[v].first >= 2, std::string(v) + ": fewer than 2 positives");
    out.expect(per_vector[v].second >= 2, std::string(v) + ": fewer than 2 negatives");
  }
  out.expect(wildcard_case, "no wildcard-claim case");
  out.expect(elapsed < 30.0, "runtime " + std::to_string(elapsed) + " s");

  const double precision = actual.empty() ? 0.0 : double(true_positives) / actual.size();
  const double recall = expected.findings.empty() ? 0.0 : double(true_positives) / expected.findings.size();
  out.expect(precision == 1.0 && recall == 1.0, "precision/recall below 1.0");
  std::ostringstream s;
  s << "precision " << precision << ", recall " << recall << ", " << actual.size()
    << " findings, " << expected.negatives.size() << " negatives, " << elapsed << " s";
  out.summary = s.str();
  return out;
}

TakeoverFinding fixture_finding(const std::string& domain, CapabilitySet granted) {
  TakeoverFinding f{DomainName(domain)};
  f.vector = VectorKind::kDiscontinuedService;
  f.vector_ref = "fixture";
  f.granted = granted;
  return f;
}

Outcome csp_verdicts() {
  Outcome out;
  const auto policy = parse_csp(
      "script-src foo.com *.bar.com;\nframe-ancestors *.bar.com;\ndefault-src https:");
  const Origin page = *Origin::parse("https://app.bar.com");
  const auto& psl = real_psl();
  auto verdict = [&](CspThreat t, const std::vector<TakeoverFinding>& findings) {
    return classify({policy}, t, page, psl, findings);
  };
  auto check = [&](CspThreat t, const std::vector<TakeoverFinding>& findings, CspClass want,
                   const std::string& label) {
    const auto v = verdict(t, findings);
    if (v.verdict != want)
      out.fail(label + ": " + std::string(to_string(v.verdict)) + ", expected " +
               std::string(to_string(want)));
    return v;
  };

  const auto script = check(CspThreat::kScript, {}, CspClass::kPotentiallyExploitable, "script");
  out.expect(script.whitelisted == std::vector<std::string>{"*.bar.com"},
             "script whitelist is not *.bar.com");
  check(CspThreat::kScript,
        {fixture_finding("vuln.bar.com", close({Capability::kFile, Capability::kJs, Capability::kHttps}))},
        CspClass::kExploitable, "script with {file, js, https}");
  // The any-host rule: default-src https: admits every https host, so object
  // content is open to any web attacker.
  check(CspThreat::kObject, {}, CspClass::kUnsafeWeb, "object");
  const auto framing =
      check(CspThreat::kFramingControl, {}, CspClass::kPotentiallyExploitable, "framing_control");
  out.expect(framing.whitelisted == std::vector<std::string>{"*.bar.com"},
             "framing whitelist is not *.bar.com");
  check(CspThreat::kFramingControl, {fixture_finding("vuln.bar.com", close({Capability::kHtml}))},
        CspClass::kExploitable, "framing_control with {html}");

  const auto pairs = load_csp_pairs(fixture_path("csp_source_pairs.tsv"));
  std::size_t agree = 0;
  for (const auto& p : pairs) {
    const auto expr = SourceExpression::parse(p.expression);
    const auto [target, path] = split_url(p.url);
    const auto page_origin = Origin::parse(p.page);
    const bool got = expr && page_origin && source_matches(*expr, target, *page_origin, path);
    if (got == p.expected) ++agree;
    else out.fail("pair '" + p.expression + "' vs " + p.url + " on " + p.page);
  }
  out.expect(pairs.size() >= 30, "fewer than 30 source-expression pairs");
  out.summary = "policy verdicts checked, " + std::to_string(agree) + "/" +
                std::to_string(pairs.size()) + " source pairs agree";
  return out;
}

// Local HTTP server answering GET / with an origin-validating CORS policy.
class MockServer {
 public:
  MockServer(std::function<bool(const std::string&)> accepts, bool credentials)
      : accepts_(std::move(accepts)), credentials_(credentials) {
    server_.Get(".*", [this](const httplib::Request& req, httplib::Response& res) {
      {
        std::lock_guard<std::mutex> lock(mutex_);
        log_.push_back({req.method, req.path, Clock::now()});
      }
      const std::string origin = req.get_header_value("Origin");
      if (req.path == "/hop") {
        res.status = 302;
        res.set_header("Location", "/");
        return;
      }
      if (!origin.empty() && accepts_(origin)) {
        res.set_header("Access-Control-Allow-Origin", origin);
        if (credentials_) res.set_header("Access-Control-Allow-Credentials", "true");
      }
      res.set_content("<html></html>", "text/html");
    });
    server_.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response&) {
      if (req.method != "GET") {
        std::lock_guard<std::mutex> lock(mutex_);
        log_.push_back({req.method, req.path, Clock::now()});
      }
      return httplib::Server::HandlerResponse::Unhandled;
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockServer() {
    server_.stop();
    thread_.join();
  }
  std::string address() const { return "127.0.0.1:" + std::to_string(port_); }

  struct Entry {
    std::string method;
    std::string path;
    Clock::time_point at;
  };
  std::vector<Entry> log() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return log_;
  }

 private:
  std::function<bool(const std::string&)> accepts_;
  bool credentials_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  mutable std::mutex mutex_;
  std::vector<Entry> log_;
};

std::string origin_host(const std::string& origin) {
  auto parsed = Origin::parse(origin);
  return parsed ? parsed->host : std::string();
}

HttpOptions local_options(const MockServer& server) {
  HttpOptions options;
  options.http_connect = server.address();
  options.timeout = std::chrono::milliseconds(3000);
  return options;
}

Outcome cors_classification() {
  Outcome out;
  const std::string reg = "victim.test";
  const SiteKey site{DomainName(reg)};
  const Url target = *Url::parse("http://www.victim.test/");
  const DomainName host("www.victim.test");
  const std::vector<TakeoverFinding> findings = {
      fixture_finding("old.victim.test", close({Capability::kJs}))};

  struct Validator {
    std::string name;
    std::function<bool(const std::string&)> accepts;
    CorsClass expected;
  };
  const std::vector<Validator> validators = {
      {"exact-related",
       [reg](const std::string& o) {
         const std::string h = origin_host(o);
         return h == reg || h.ends_with("." + reg);
       },
       CorsClass::kRelatedDomainExploitable},
      {"substring",
       [reg](const std::string& o) { return o.find(reg) != std::string::npos; },
       CorsClass::kWebAttackerVulnerable},
      {"suffix",
       [reg](const std::string& o) { return origin_host(o).ends_with(reg); },
       CorsClass::kWebAttackerVulnerable},
  };

  const std::uint64_t seed = 42;
  int cases = 0;
  for (const auto& v : validators) {
    for (bool credentials : {false, true}) {
      MockServer server(v.accepts, credentials);
      NetworkHttpClient client(local_options(server));
      const auto first = probe_cors(target, site, seed, client);
      const auto second = probe_cors(target, site, seed, client);
      const auto verdict = classify_cors(first, host, findings, real_psl());
      const std::string label = v.name + (credentials ? "+credentials" : "");
      ++cases;
      if (verdict.verdict != v.expected)
        out.fail(label + ": " + std::string(to_string(verdict.verdict)));
      if (verdict.credentialed != credentials) out.fail(label + ": credentialed flag wrong");
      for (std::size_t i = 0; i < 3; ++i) {
        if (first.tests[i].origin != second.tests[i].origin ||
            first.tests[i].allow_origin != second.tests[i].allow_origin ||
            first.tests[i].allow_credentials != second.tests[i].allow_credentials)
          out.fail(label + ": probe not deterministic");
      }
      const auto again = classify_cors(second, host, findings, real_psl());
      if (again.verdict != verdict.verdict) out.fail(label + ": verdict not deterministic");
    }
  }
  out.expect(cors_probe_origins(site, seed) == cors_probe_origins(site, seed),
             "origins differ under one seed");
  out.expect(cors_probe_origins(site, seed) != cors_probe_origins(site, seed + 1),
             "origins ignore the seed");
  out.summary = std::to_string(cases) + " mock configurations";
  return out;
}

Outcome cookie_matrix() {
  Outcome out;
  const DomainName page("www.victim.test");
  std::size_t checks = 0;
  std::size_t host_rows = 0;
  for (unsigned grant = 0; grant < 64; ++grant) {
    const CapabilityOracle oracle(grant);
    const std::vector<TakeoverFinding> findings = {
        fixture_finding("vuln.victim.test", CapabilitySet::from_bits(static_cast<std::uint8_t>(grant)))};
    const bool single = grant != 0 && (grant & (grant - 1)) == 0;
    for (const auto& attrs : all_cookie_attributes()) {
      ObservedCookie cookie;
      cookie.name = attrs.prefix == CookiePrefix::kHost     ? "__Host-id"
                    : attrs.prefix == CookiePrefix::kSecure ? "__Secure-id"
                                                            : "id";
      cookie.http_only = attrs.http_only;
      cookie.secure = attrs.secure;
      cookie.prefix = attrs.prefix;
      cookie.domain_attr = DomainName("victim.test");
      cookie.host_only = false;
      cookie.set_by = page.str();
      const auto verdict = classify_cookie(cookie, page, findings, real_psl());

      if (attrs.prefix == CookiePrefix::kHost) {
        ++host_rows;
        if (verdict.integrity != Risk::kImmune)
          out.fail("__Host- integrity not immune for grant " + findings[0].granted.str());
      }
      if (!single) continue;
      ++checks;
      const Risk want_conf = oracle.cookie_confidentiality(attrs) ? Risk::kAtRisk : Risk::kSafe;
      const Risk want_int = attrs.prefix == CookiePrefix::kHost ? Risk::kImmune
                            : oracle.cookie_integrity(attrs)    ? Risk::kAtRisk
                                                                : Risk::kSafe;
      if (verdict.confidentiality != want_conf || verdict.integrity != want_int)
        out.fail(cookie.name + " httponly=" + std::to_string(attrs.http_only) + " secure=" +
                 std::to_string(attrs.secure) + " grant " + findings[0].granted.str());
    }
  }
  out.summary = std::to_string(checks) + " single-grant cells, " + std::to_string(host_rows) +
                " __Host- cells";
  return out;
}

std::string blanked_report(const ScanOutcome& scan) {
  auto json = to_json(scan.report);
  blank_timestamps(json);
  return json.dump(2);
}

Outcome determinism_and_ethics() {
  Outcome out;
  const auto& config = corpus_config();
  ScanHooks hooks;
  hooks.record_requests = true;
  const auto a = run_scan(config, hooks);
  const auto b = run_scan(config, hooks);
  out.expect(blanked_report(a) == blanked_report(b), "reports differ modulo timestamps");

  const double min_gap = (1.0 / config.rate_limit) / 1.1;
  std::size_t requests = 0;
  for (const auto* scan : {&a, &b}) {
    std::map<std::string, std::vector<Clock::time_point>> by_host;
    for (const auto& r : scan->requests) {
      ++requests;
      if (r.method != "GET") out.fail("non-GET request " + r.method + " " + r.url);
      auto url = Url::parse(r.url);
      by_host[url ? url->origin.host : r.url].push_back(r.at);
    }
    for (auto& [host, times] : by_host) {
      std::sort(times.begin(), times.end());
      for (std::size_t i = 1; i < times.size(); ++i) {
        const double gap = std::chrono::duration<double>(times[i] - times[i - 1]).count();
        if (gap < min_gap) out.fail(host + ": gap " + std::to_string(gap) + " s");
      }
    }
  }
  out.expect(requests > 0, "no requests recorded");

  // The same checks from the server's side of a real socket.
  const double rate = 10.0;
  MockServer server([](const std::string&) { return true; }, true);
  NetworkHttpClient network(local_options(server));
  RateLimitedClient limited(network, std::make_shared<RateLimiter>(rate));
  const Url page = *Url::parse("http://www.victim.test/hop");
  fetch_page(page, limited, real_psl());
  probe_cors(page, SiteKey{DomainName("victim.test")}, 1, limited);
  fetch_security_txt(*Origin::parse("http://www.victim.test"), limited);
  const auto log = server.log();
  out.expect(log.size() >= 6, "local server saw too few requests");
  for (std::size_t i = 0; i < log.size(); ++i) {
    if (log[i].method != "GET") out.fail("server saw " + log[i].method);
    if (i > 0) {
      const double gap = std::chrono::duration<double>(log[i].at - log[i - 1].at).count();
      if (gap < (1.0 / rate) / 1.1) out.fail("server-side gap " + std::to_string(gap) + " s");
    }
  }
  out.summary = std::to_string(requests) + " recorded scan requests, " +
                std::to_string(log.size()) + " local server requests";
  return out;
}

Outcome end_to_end() {
  Outcome out;
  const auto start = Clock::now();
  const auto scan = run_scan(corpus_config());
  const double elapsed = seconds_since(start);
  const auto expected =
      nlohmann::json::parse(read_text(fixture_path("corpus/expected_summary.json")));
  const auto actual = nlohmann::json::parse(summarize(scan.report).dump());
  if (actual != expected) {
    for (const auto& d : nlohmann::json::diff(expected, actual))
      out.fail(d["path"].get<std::string>() + " " + d["op"].get<std::string>() +
               (d.contains("value") ? " -> " + d["value"].dump() : ""));
  }
  out.expect(elapsed < 120.0, "runtime " + std::to_string(elapsed) + " s");
  std::ostringstream s;
  s << scan.report.findings.size() << " findings, exit " << scan.exit_code << ", " << elapsed
    << " s";
  out.summary = s.str();
  return out;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {"1 psl-conformance", psl_conformance},
      {"2 capability-oracle", capability_oracle},
      {"3 algorithm-fixtures", algorithm_fixtures},
      {"4 csp-verdicts", csp_verdicts},
      {"5 cors-classification", cors_classification},
      {"6 cookie-matrix", cookie_matrix},
      {"7 determinism-and-ethics", determinism_and_ethics},
      {"8 end-to-end", end_to_end},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", c.name, o.summary.c_str());
    for (const auto& p : o.problems) std::printf("    %s\n", p.c_str());
    if (!o.pass) ++failures;
  }
  std::fflush(stdout);
  return failures == 0 ? 0 : 1;
}
