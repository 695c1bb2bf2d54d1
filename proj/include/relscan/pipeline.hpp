#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "relscan/http.hpp"
#include "relscan/report.hpp"

namespace relscan {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Line-oriented "key = value" file; "#" starts a comment. Relative paths are
// taken from the config file's directory. Keys marked (*) may repeat.
//
//   apex = victim.test                 (*) scan targets
//   inventory = names.txt              one subdomain per line
//   psl = public_suffix_list.dat
//   services = services.db
//   cloud_ranges = aws.txt             (*)
//   liveness = open-ports.tsv          optional
//   web_targets = urls.txt             optional; one URL per line
//   web_targets_per_apex = 200
//   seed = 1
//   rate_limit = 5                     requests per second per host
//   timeout_ms = 10000
//   workers = 4
//   deny_list = opt-out.txt            optional; apexes skipped entirely
//   user_agent = ...
//   offline = true
//   zones = victim.test.zone           (*) offline DNS data
//   web_fixture = web.json             offline HTTP data
//   oracles = oracles.txt              offline whois/registrar/ping answers
//   resolver = 127.0.0.1:53            live; RELSCAN_RESOLVER overrides
//   registrar_url = https://.../{domain}   live registrar availability API
//   http_connect = 127.0.0.1:8080      live; send every http request here
//   https_connect = 127.0.0.1:8443
//   verify_tls = true
struct ScanConfig {
  std::vector<DomainName> apex_targets;
  std::string subdomain_inventory;
  std::string psl_path;
  std::string service_db_path;
  std::vector<std::string> cloud_ranges_paths;
  std::optional<std::string> liveness_path;
  std::optional<std::string> web_targets_path;
  std::size_t web_targets_per_apex = 200;
  std::size_t urls_per_target = 6;
  std::uint64_t seed = 0;
  double rate_limit = 5.0;
  std::chrono::milliseconds timeout{10000};
  std::size_t workers = 4;
  std::optional<std::string> deny_list_path;
  std::string user_agent;
  bool offline = false;
  std::vector<std::string> zone_paths;
  std::optional<std::string> web_fixture_path;
  std::optional<std::string> oracles_path;
  std::string resolver;
  std::string registrar_url;
  std::string http_connect;
  std::string https_connect;
  bool verify_tls = true;

  // Original key/value pairs, for the report metadata.
  std::vector<std::pair<std::string, std::string>> echo;

  // Throws ConfigError on inconsistent settings or unreadable inputs.
  void validate() const;
};

ScanConfig parse_config(std::string_view text, const std::string& base_dir,
                        std::string_view source = "<config>");
ScanConfig load_config(const std::string& path);

struct ScanHooks {
  // Log every HTTP request as it leaves the rate limiter.
  bool record_requests = false;
};

struct ScanOutcome {
  VulnerabilityReport report;
  int exit_code = 0;  // 0 complete, 2 complete with indeterminate results
  std::vector<RecordedRequest> requests;
};

// Throws ConfigError before any network activity when inputs do not load.
ScanOutcome run_scan(const ScanConfig& config, const ScanHooks& hooks = {});

}  // namespace relscan
