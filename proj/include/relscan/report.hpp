#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "relscan/csp.hpp"
#include "relscan/takeover.hpp"
#include "relscan/web.hpp"

namespace relscan {

inline constexpr std::string_view kReportSchema = "relscan-report/1";
inline constexpr std::string_view kToolVersion = "1.0.0";

struct FindingRecord {
  std::string id;  // "F0001", ...
  DomainName apex;
  TakeoverFinding finding;
};

struct CookieRecord {
  ObservedCookie cookie;
  bool session = false;
  CookieVerdict verdict;
};

struct UrlRecord {
  std::string url;
  PageObservation page;
  std::vector<CookieRecord> cookies;
  std::vector<CspVerdict> csp;
  std::size_t report_only_policies = 0;
  std::optional<CorsProbeResult> cors_probe;
  std::optional<CorsVerdict> cors;
};

struct TargetRecord {
  DomainName host;
  std::vector<UrlRecord> urls;
  std::vector<std::string> notes;
};

struct ApexRecord {
  explicit ApexRecord(DomainName name) : apex(std::move(name)) {}

  DomainName apex;
  bool opted_out = false;
  std::size_t names_scanned = 0;
  std::vector<std::string> dns_failures;
  // Indices into VulnerabilityReport::findings, in detector order. Verdict
  // finding indices below index this list.
  std::vector<std::size_t> findings;
  bool web_probed = false;
  std::vector<TargetRecord> targets;
  std::optional<SecurityContact> security_contact;
  std::vector<std::string> security_notes;
  std::vector<std::string> notes;
};

struct ReportMetadata {
  std::string psl_sha256;
  std::string service_db_sha256;
  std::uint64_t seed = 0;
  bool offline = false;
  std::string started_at;
  std::string finished_at;
  std::string target_selection;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<std::string> notes;
};

struct VulnerabilityReport {
  ReportMetadata metadata;
  std::vector<FindingRecord> findings;
  std::vector<ApexRecord> apexes;
};

// Counters derived from the detail records.
nlohmann::ordered_json summarize(const VulnerabilityReport& report);
// Records the scan could not settle: deferred or manual-check findings,
// failed page fetches and CORS probes with no answer.
std::size_t count_indeterminate(const VulnerabilityReport& report);

nlohmann::ordered_json to_json(const VulnerabilityReport& report);

enum class ReportFormat { kStructured, kHuman };
std::string emit_report(const VulnerabilityReport& report, ReportFormat format);

// Clears every timestamp field ("*_at") so two reports can be compared.
void blank_timestamps(nlohmann::ordered_json& report);

// "a.b.c = 7" lines for every numeric leaf, in document order.
std::vector<std::pair<std::string, long long>> flatten_counters(
    const nlohmann::ordered_json& summary);

}  // namespace relscan
