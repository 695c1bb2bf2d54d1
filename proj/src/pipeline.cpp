#include "relscan/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "hash.hpp"
#include "relscan/system_resolver.hpp"
#include "relscan/zone_resolver.hpp"

namespace relscan {
namespace {

namespace fs = std::filesystem;

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Non-empty, non-comment lines.
std::vector<std::string> read_lines(const std::string& path) {
  std::vector<std::string> out;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

bool parse_bool(const std::string& value, const std::string& where) {
  if (value == "true" || value == "yes" || value == "1") return true;
  if (value == "false" || value == "no" || value == "0") return false;
  throw ConfigError(where + ": expected true or false, got '" + value + "'");
}

std::uint64_t parse_uint(const std::string& value, const std::string& where) {
  if (value.empty() || value.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError(where + ": expected a non-negative integer, got '" + value + "'");
  try {
    return std::stoull(value);
  } catch (const std::exception&) {
    throw ConfigError(where + ": integer out of range");
  }
}

double parse_double(const std::string& value, const std::string& where) {
  try {
    std::size_t used = 0;
    double d = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw ConfigError(where + ": expected a number, got '" + value + "'");
  }
}

std::string now_iso8601() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Runs fn(i) for i in [0, n) on up to |workers| threads. fn must not throw.
template <typename F>
void parallel_for(std::size_t n, std::size_t workers, F&& fn) {
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) fn(i);
  };
  std::vector<std::thread> pool;
  const std::size_t extra = std::min(workers, n) > 0 ? std::min(workers, n) - 1 : 0;
  for (std::size_t k = 0; k < extra; ++k) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
}

class RateLimitedWhois : public WhoisOracle {
 public:
  RateLimitedWhois(const WhoisOracle& inner, std::shared_ptr<RateLimiter> limiter)
      : inner_(inner), limiter_(std::move(limiter)) {}
  OracleReply registered(const DomainName& apex) const override {
    return limiter_->run("whois:" + apex.labels().back(),
                         [&] { return inner_.registered(apex); });
  }

 private:
  const WhoisOracle& inner_;
  std::shared_ptr<RateLimiter> limiter_;
};

class UnconfiguredRegistrar : public RegistrarOracle {
 public:
  OracleReply available(const DomainName&) const override {
    return {Tri::kUnknown, "no registrar_url configured"};
  }
};

struct Inputs {
  PublicSuffixList psl;
  std::string psl_version;
  std::vector<ServiceFingerprint> services;
  std::string services_sha;
  std::vector<CloudProviderRanges> providers;
  LivenessDataset liveness;
  std::set<DomainName> denied;
  std::vector<DomainName> inventory;
  std::size_t inventory_invalid = 0;
  std::vector<Url> web_urls;
  std::size_t web_urls_invalid = 0;
};

template <typename F>
auto loading(const std::string& what, F&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

Inputs load_inputs(const ScanConfig& config) {
  Inputs in;
  const std::string psl_text = read_file(config.psl_path);
  in.psl = loading("psl", [&] { return PublicSuffixList::load(psl_text); });
  in.services = loading("services",
                        [&] { return load_service_db(read_file(config.service_db_path)); });
  in.services_sha = sha256_hex(read_file(config.service_db_path));
  for (const auto& p : config.cloud_ranges_paths)
    in.providers.push_back(loading("cloud_ranges", [&] { return load_cloud_ranges_file(p); }));
  if (config.liveness_path)
    in.liveness = loading("liveness", [&] { return load_liveness_file(*config.liveness_path); });
  if (config.deny_list_path) {
    for (const auto& line : read_lines(*config.deny_list_path)) {
      auto name = DomainName::parse(line);
      if (!name) throw ConfigError("deny_list: invalid domain '" + line + "'");
      in.denied.insert(*name);
    }
  }
  std::set<DomainName> seen;
  for (const auto& line : read_lines(config.subdomain_inventory)) {
    auto name = DomainName::parse(line);
    if (!name || name->is_wildcard()) {
      ++in.inventory_invalid;
      continue;
    }
    if (seen.insert(*name).second) in.inventory.push_back(*name);
  }
  std::sort(in.inventory.begin(), in.inventory.end());
  if (config.web_targets_path) {
    for (const auto& line : read_lines(*config.web_targets_path)) {
      auto url = Url::parse(line);
      if (url) in.web_urls.push_back(*url);
      else ++in.web_urls_invalid;
    }
  }
  return in;
}

struct ApexWork {
  explicit ApexWork(DomainName apex) : record(std::move(apex)) {}

  ApexRecord record;
  std::vector<std::size_t> names;  // indices into the inventory
  std::vector<TakeoverFinding> findings;
  std::vector<TargetRecord> targets;
  std::vector<std::vector<Url>> target_urls;
};

// One row of the web stage.
struct WebJob {
  std::size_t apex;
  std::size_t target;
};

}  // namespace

void ScanConfig::validate() const {
  if (apex_targets.empty()) throw ConfigError("no apex targets configured");
  if (subdomain_inventory.empty()) throw ConfigError("inventory is required");
  if (psl_path.empty()) throw ConfigError("psl is required");
  if (service_db_path.empty()) throw ConfigError("services is required");
  if (!(rate_limit > 0)) throw ConfigError("rate_limit must be positive");
  if (workers == 0) throw ConfigError("workers must be at least 1");
  if (urls_per_target == 0 || urls_per_target > 6)
    throw ConfigError("urls_per_target must be between 1 and 6");
  if (timeout.count() <= 0) throw ConfigError("timeout_ms must be positive");
  if (offline) {
    if (zone_paths.empty()) throw ConfigError("offline scans need zones");
    if (!web_fixture_path) throw ConfigError("offline scans need web_fixture");
    if (!oracles_path) throw ConfigError("offline scans need oracles");
  }
  std::vector<std::string> files = {subdomain_inventory, psl_path, service_db_path};
  files.insert(files.end(), cloud_ranges_paths.begin(), cloud_ranges_paths.end());
  for (const auto* opt : {&liveness_path, &web_targets_path, &deny_list_path})
    if (*opt) files.push_back(**opt);
  if (offline) {
    files.insert(files.end(), zone_paths.begin(), zone_paths.end());
    files.push_back(*web_fixture_path);
    files.push_back(*oracles_path);
  }
  for (const auto& f : files)
    if (!fs::is_regular_file(f)) throw ConfigError("missing input file: " + f);
}

ScanConfig parse_config(std::string_view text, const std::string& base_dir,
                        std::string_view source) {
  ScanConfig config;
  auto path_of = [&](const std::string& value) {
    fs::path p(value);
    return p.is_absolute() ? p.string() : (fs::path(base_dir) / p).lexically_normal().string();
  };

  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = std::string(source) + ":" + std::to_string(line_no);
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    config.echo.emplace_back(key, value);

    if (key == "apex") {
      auto name = DomainName::parse(value);
      if (!name) throw ConfigError(where + ": invalid apex '" + value + "'");
      config.apex_targets.push_back(*name);
    } else if (key == "inventory") {
      config.subdomain_inventory = path_of(value);
    } else if (key == "psl") {
      config.psl_path = path_of(value);
    } else if (key == "services") {
      config.service_db_path = path_of(value);
    } else if (key == "cloud_ranges") {
      config.cloud_ranges_paths.push_back(path_of(value));
    } else if (key == "liveness") {
      config.liveness_path = path_of(value);
    } else if (key == "web_targets") {
      config.web_targets_path = path_of(value);
    } else if (key == "web_targets_per_apex") {
      config.web_targets_per_apex = parse_uint(value, where);
    } else if (key == "urls_per_target") {
      config.urls_per_target = parse_uint(value, where);
    } else if (key == "seed") {
      config.seed = parse_uint(value, where);
    } else if (key == "rate_limit") {
      config.rate_limit = parse_double(value, where);
    } else if (key == "timeout_ms") {
      config.timeout = std::chrono::milliseconds(parse_uint(value, where));
    } else if (key == "workers") {
      config.workers = parse_uint(value, where);
    } else if (key == "deny_list") {
      config.deny_list_path = path_of(value);
    } else if (key == "user_agent") {
      config.user_agent = value;
    } else if (key == "offline") {
      config.offline = parse_bool(value, where);
    } else if (key == "zones") {
      config.zone_paths.push_back(path_of(value));
    } else if (key == "web_fixture") {
      config.web_fixture_path = path_of(value);
    } else if (key == "oracles") {
      config.oracles_path = path_of(value);
    } else if (key == "resolver") {
      config.resolver = value;
    } else if (key == "registrar_url") {
      config.registrar_url = value;
    } else if (key == "http_connect") {
      config.http_connect = value;
    } else if (key == "https_connect") {
      config.https_connect = value;
    } else if (key == "verify_tls") {
      config.verify_tls = parse_bool(value, where);
    } else {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
  return config;
}

ScanConfig load_config(const std::string& path) {
  const std::string text = read_file(path);
  return parse_config(text, fs::path(path).parent_path().string(), path);
}

ScanOutcome run_scan(const ScanConfig& config, const ScanHooks& hooks) {
  config.validate();
  Inputs in = load_inputs(config);

  // Backends. Everything that can fail to load does so before any query.
  std::unique_ptr<Resolver> resolver;
  std::unique_ptr<HttpClient> base_http;
  std::shared_ptr<FixtureOracles> fixture_oracles;
  if (config.offline) {
    auto zones = std::make_unique<ZoneResolver>();
    for (const auto& z : config.zone_paths)
      loading("zones", [&] { zones->add_zone_file(z); return 0; });
    resolver = std::move(zones);
    auto web = loading("web_fixture", [&] {
      return std::make_shared<const FixtureWeb>(FixtureWeb::load_file(*config.web_fixture_path));
    });
    base_http = std::make_unique<FixtureHttpClient>(web);
    fixture_oracles = loading("oracles", [&] { return FixtureOracles::load_file(*config.oracles_path); });
  } else {
    std::string server = config.resolver;
    if (const char* env = std::getenv("RELSCAN_RESOLVER"); env && *env) server = env;
    resolver = std::make_unique<SystemResolver>(server);
    HttpOptions options;
    if (!config.user_agent.empty()) options.user_agent = config.user_agent;
    options.timeout = config.timeout;
    options.verify_tls = config.verify_tls;
    options.http_connect = config.http_connect;
    options.https_connect = config.https_connect;
    base_http = std::make_unique<NetworkHttpClient>(options);
  }

  std::unique_ptr<RecordingClient> recorder;
  const HttpClient* inner = base_http.get();
  if (hooks.record_requests) {
    recorder = std::make_unique<RecordingClient>(*base_http);
    inner = recorder.get();
  }
  auto limiter = std::make_shared<RateLimiter>(config.rate_limit);
  RateLimitedClient http(*inner, limiter);

  std::unique_ptr<WhoisOracle> live_whois;
  std::unique_ptr<WhoisOracle> limited_whois;
  std::unique_ptr<RegistrarOracle> live_registrar;
  std::unique_ptr<PingOracle> live_ping;
  const WhoisOracle* whois = fixture_oracles.get();
  const RegistrarOracle* registrar = fixture_oracles.get();
  const PingOracle* ping = fixture_oracles.get();
  if (!config.offline) {
    live_whois = std::make_unique<NetworkWhoisOracle>(config.timeout);
    limited_whois = std::make_unique<RateLimitedWhois>(*live_whois, limiter);
    whois = limited_whois.get();
    if (config.registrar_url.empty())
      live_registrar = std::make_unique<UnconfiguredRegistrar>();
    else
      live_registrar = std::make_unique<HttpRegistrarOracle>(http, config.registrar_url);
    registrar = live_registrar.get();
    live_ping = std::make_unique<SystemPingOracle>();
    ping = live_ping.get();
  }

  ScanOutcome outcome;
  VulnerabilityReport& report = outcome.report;
  ReportMetadata& meta = report.metadata;
  meta.started_at = now_iso8601();
  meta.psl_sha256 = in.psl.version();
  meta.service_db_sha256 = in.services_sha;
  meta.seed = config.seed;
  meta.offline = config.offline;
  meta.config = config.echo;
  meta.target_selection = config.web_targets_path
                              ? "operator-list"
                              : "inventory-lexicographic (homepage only; substitute for "
                                "popularity-ranked crawl data)";
  meta.notes.push_back(
      "protocol-level fetch: only header-set cookies and header CSP are observed; "
      "meta-tag CSP and script-set cookies are out of scope");
  if (in.inventory_invalid)
    meta.notes.push_back(std::to_string(in.inventory_invalid) +
                         " invalid inventory lines skipped");
  if (in.web_urls_invalid)
    meta.notes.push_back(std::to_string(in.web_urls_invalid) +
                         " invalid web target lines skipped");

  // Apex table, in configured order without duplicates.
  std::vector<ApexWork> apexes;
  {
    std::set<DomainName> seen;
    for (const auto& a : config.apex_targets) {
      if (!seen.insert(a).second) continue;
      ApexWork work(a);
      work.record.opted_out = in.denied.contains(a);
      apexes.push_back(std::move(work));
    }
  }
  std::size_t outside = 0;
  for (std::size_t i = 0; i < in.inventory.size(); ++i) {
    const DomainName& name = in.inventory[i];
    ApexWork* owner = nullptr;
    for (auto& a : apexes)
      if (name.is_within(a.record.apex) &&
          (!owner || a.record.apex.label_count() > owner->record.apex.label_count()))
        owner = &a;
    if (!owner) {
      ++outside;
      continue;
    }
    if (!owner->record.opted_out) owner->names.push_back(i);
  }
  if (outside)
    meta.notes.push_back(std::to_string(outside) +
                         " inventory names outside the configured apexes ignored");

  // Stage 1: chain resolution.
  ChainOptions chain_options;
  chain_options.query.timeout = config.timeout;
  std::vector<std::size_t> to_resolve;
  for (const auto& a : apexes) to_resolve.insert(to_resolve.end(), a.names.begin(), a.names.end());
  std::vector<std::optional<ChainSet>> chain_sets(in.inventory.size());
  std::vector<std::string> chain_errors(in.inventory.size());
  parallel_for(to_resolve.size(), config.workers, [&](std::size_t k) {
    const std::size_t i = to_resolve[k];
    try {
      chain_sets[i] = resolve_chain(in.inventory[i], *resolver, chain_options);
    } catch (const std::exception& e) {
      chain_errors[i] = e.what();
    }
  });

  // Stage 2: the three detectors, one apex per work item.
  CaaPolicy caa;
  caa.resolver = resolver.get();
  caa.query = chain_options.query;
  parallel_for(apexes.size(), config.workers, [&](std::size_t k) {
    ApexWork& a = apexes[k];
    if (a.record.opted_out) {
      a.record.notes.push_back("apex on deny-list; not scanned");
      return;
    }
    a.record.names_scanned = a.names.size();
    std::vector<ResolvingChain> chains;
    for (std::size_t i : a.names) {
      const std::string name = in.inventory[i].str();
      if (!chain_errors[i].empty()) {
        a.record.dns_failures.push_back(name + ": " + chain_errors[i]);
        continue;
      }
      const ChainSet& set = *chain_sets[i];
      if (set.failure) a.record.dns_failures.push_back(name + ": " + *set.failure);
      else if (set.has_truncated()) a.record.dns_failures.push_back(name + ": truncated chain");
      chains.insert(chains.end(), set.chains.begin(), set.chains.end());
    }
    try {
      auto expired = detect_expired_domains(chains, *whois, *registrar, in.psl, caa);
      DiscontinuedOptions options;
      options.chains = chain_options;
      options.nonce_seed = fnv1a(a.record.apex.str(), config.seed ^ 0xcbf29ce484222325ULL);
      auto discontinued =
          detect_discontinued_services(chains, in.services, *resolver, http, caa, options);
      auto cloud = detect_deprovisioned_cloud(chains, in.providers, in.liveness, *ping, caa);
      for (auto* group : {&expired, &discontinued, &cloud})
        for (auto& f : *group) a.findings.push_back(std::move(f));
    } catch (const std::exception& e) {
      a.record.notes.push_back(std::string("detector failure: ") + e.what());
    }
  });

  // Global finding ids, in apex order.
  for (auto& a : apexes) {
    for (auto& f : a.findings) {
      char id[16];
      std::snprintf(id, sizeof id, "F%04zu", report.findings.size() + 1);
      a.record.findings.push_back(report.findings.size());
      report.findings.push_back(FindingRecord{id, a.record.apex, f});
    }
  }

  // Stage 3 targets: related domains of every apex with at least one finding.
  for (auto& a : apexes) {
    if (a.record.opted_out || a.findings.empty()) continue;
    a.record.web_probed = true;
    std::set<DomainName> finding_hosts;
    for (const auto& f : a.findings) finding_hosts.insert(f.domain);
    std::map<DomainName, std::vector<Url>> by_host;
    if (config.web_targets_path) {
      for (const auto& url : in.web_urls) {
        auto host = DomainName::parse(url.origin.host);
        if (!host || !is_related(*host, a.record.apex, in.psl)) continue;
        auto& list = by_host[*host];
        const std::string s = url.str();
        if (std::none_of(list.begin(), list.end(), [&](const Url& u) { return u.str() == s; }))
          list.push_back(url);
      }
    } else {
      std::set<DomainName> hosts;
      if (!in.psl.is_public_suffix(a.record.apex)) hosts.insert(a.record.apex);
      for (std::size_t i : a.names) hosts.insert(in.inventory[i]);
      for (const auto& h : hosts) {
        if (finding_hosts.contains(h)) continue;
        by_host[h].push_back(*Url::parse("https://" + h.str() + "/"));
      }
    }
    std::size_t kept = 0;
    for (auto& [host, urls] : by_host) {
      if (kept == config.web_targets_per_apex) {
        a.record.notes.push_back(std::to_string(by_host.size() - kept) +
                                 " related targets beyond web_targets_per_apex skipped");
        break;
      }
      ++kept;
      TargetRecord target{host, {}, {}};
      if (urls.size() > config.urls_per_target) {
        target.notes.push_back(std::to_string(urls.size()) + " URLs listed; truncated to " +
                               std::to_string(config.urls_per_target));
        urls.resize(config.urls_per_target);
      }
      a.targets.push_back(std::move(target));
      a.target_urls.push_back(urls);
    }
  }

  std::vector<WebJob> jobs;
  for (std::size_t i = 0; i < apexes.size(); ++i)
    for (std::size_t t = 0; t < apexes[i].targets.size(); ++t) jobs.push_back({i, t});

  parallel_for(jobs.size(), config.workers, [&](std::size_t k) {
    ApexWork& a = apexes[jobs[k].apex];
    TargetRecord& target = a.targets[jobs[k].target];
    for (const Url& url : a.target_urls[jobs[k].target]) {
      UrlRecord record;
      record.url = url.str();
      try {
        record.page = fetch_page(url, http, in.psl);
        const PageObservation& page = record.page;
        if (page.ok()) {
          for (const auto& c : page.cookies) {
            auto host = DomainName::parse(c.set_by);
            if (!host) continue;
            record.cookies.push_back(
                {c, is_session_cookie(c), classify_cookie(c, *host, a.findings, in.psl)});
          }
          auto final_url = Url::parse(page.final_url);
          const auto policies = page.enforced_policies();
          record.report_only_policies = page.report_only_policies().size();
          for (CspThreat t : kCspThreats)
            record.csp.push_back(classify(policies, t, final_url->origin, in.psl, a.findings));
          auto final_host = DomainName::parse(final_url->origin.host);
          auto site = final_host ? etld_plus_one(*final_host, in.psl) : std::nullopt;
          if (site) {
            const std::uint64_t seed = fnv1a(final_url->str(), config.seed ^ 0x9e3779b97f4a7c15ULL);
            record.cors_probe = probe_cors(*final_url, *site, seed, http);
            record.cors = classify_cors(*record.cors_probe, *final_host, a.findings, in.psl);
          }
        }
      } catch (const std::exception& e) {
        record.page.url = url.str();
        record.page.error = "probe-failure";
        record.page.error_detail = e.what();
      }
      target.urls.push_back(std::move(record));
    }
  });

  parallel_for(apexes.size(), config.workers, [&](std::size_t k) {
    ApexWork& a = apexes[k];
    if (!a.record.web_probed) return;
    try {
      auto result = fetch_security_txt(Origin{"https", a.record.apex.str(), 443}, http);
      a.record.security_contact = std::move(result.contact);
      a.record.security_notes = std::move(result.notes);
    } catch (const std::exception& e) {
      a.record.security_notes.push_back(std::string("security.txt failure: ") + e.what());
    }
  });

  for (auto& a : apexes) {
    a.record.targets = std::move(a.targets);
    report.apexes.push_back(std::move(a.record));
  }
  meta.finished_at = now_iso8601();
  outcome.exit_code = count_indeterminate(report) > 0 ? 2 : 0;
  if (recorder) outcome.requests = recorder->log();
  return outcome;
}

}  // namespace relscan
