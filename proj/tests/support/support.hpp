#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "relscan/capability.hpp"
#include "relscan/psl.hpp"
#include "relscan/url.hpp"

namespace relscan::testsupport {

inline std::string data_path(const std::string& name) {
  return std::string(RELSCAN_DATA_DIR) + "/" + name;
}
inline std::string fixture_path(const std::string& name) {
  return std::string(RELSCAN_FIXTURE_DIR) + "/" + name;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline const PublicSuffixList& real_psl() {
  static const PublicSuffixList psl =
      PublicSuffixList::load_file(data_path("public_suffix_list.dat"));
  return psl;
}

// Independent restatement of the attacker capability rules, written straight
// from the threat descriptions without going through CapabilityRequirement.
// |bits| indexes the six capabilities in kAllCapabilities order.
struct CapabilityOracle {
  bool headers = false, js = false, html = false, content = false, file = false,
       https = false;

  explicit CapabilityOracle(unsigned bits) {
    bool raw[6];
    for (int i = 0; i < 6; ++i) raw[i] = (bits >> i) & 1u;
    for (int i = 0; i < 6; ++i) {
      switch (kAllCapabilities[i]) {
        case Capability::kHeaders: headers = raw[i]; break;
        case Capability::kJs: js = raw[i]; break;
        case Capability::kHtml: html = raw[i]; break;
        case Capability::kContent: content = raw[i]; break;
        case Capability::kFile: file = raw[i]; break;
        case Capability::kHttps: https = raw[i]; break;
      }
    }
    // js can rewrite markup and text; markup covers text.
    html = html || js;
    content = content || html;
  }

  CapabilitySet as_set() const {
    CapabilitySet s;
    if (headers) s = s.with(Capability::kHeaders);
    if (js) s = s.with(Capability::kJs);
    if (html) s = s.with(Capability::kHtml);
    if (content) s = s.with(Capability::kContent);
    if (file) s = s.with(Capability::kFile);
    if (https) s = s.with(Capability::kHttps);
    return s;
  }

  bool cookie_confidentiality(const CookieAttributes& c) const {
    bool read = c.http_only ? headers : (headers || js);
    return read && (!c.secure || https);
  }
  bool cookie_integrity(const CookieAttributes& c) const {
    if (c.prefix == CookiePrefix::kHost) return false;
    bool toss = headers || js;
    return toss && (c.prefix != CookiePrefix::kSecure || https);
  }
  bool threat(Threat t, bool target_https) const {
    switch (t) {
      case Threat::kCspScript:
      case Threat::kCspStyle:
      case Threat::kCspObject: return file && (!target_https || https);
      case Threat::kCspFrame: return html && (!target_https || https);
      case Threat::kCspFramingControl: return html;
      case Threat::kCors:
      case Threat::kPostMessage: return js;
      case Threat::kDomainRelaxation: return js && (!target_https || https);
      default: throw std::logic_error("cookie threat");
    }
  }
};

// All 12 (HttpOnly, Secure, prefix) combinations.
inline std::vector<CookieAttributes> all_cookie_attributes() {
  std::vector<CookieAttributes> out;
  for (bool h : {false, true})
    for (bool s : {false, true})
      for (auto p : {CookiePrefix::kNone, CookiePrefix::kSecure, CookiePrefix::kHost})
        out.push_back({h, s, p});
  return out;
}

struct PslVector {
  std::optional<std::string> input;
  std::optional<std::string> expected;
  int line = 0;
};

// checkPublicSuffix('input', 'expected'); lines from the public-suffix
// project's test file.
inline std::vector<PslVector> load_psl_vectors(const std::string& path) {
  std::vector<PslVector> out;
  std::istringstream in(read_text(path));
  std::string line;
  int n = 0;
  auto arg = [](std::string_view s) -> std::optional<std::string> {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    if (s == "null") return std::nullopt;
    if (s.size() >= 2 && s.front() == '\'' && s.back() == '\'')
      return std::string(s.substr(1, s.size() - 2));
    throw std::runtime_error("bad argument");
  };
  while (std::getline(in, line)) {
    ++n;
    auto open = line.find("checkPublicSuffix(");
    if (open == std::string::npos || line.starts_with("//")) continue;
    auto start = open + 18;
    auto close = line.rfind(");");
    std::string_view args(line.data() + start, close - start);
    auto comma = args.find(',');
    out.push_back({arg(args.substr(0, comma)), arg(args.substr(comma + 1)), n});
  }
  return out;
}

struct CspPair {
  std::string expression;
  std::string page;
  std::string url;
  bool expected = false;
};

inline std::vector<CspPair> load_csp_pairs(const std::string& path) {
  std::vector<CspPair> out;
  std::istringstream in(read_text(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (cols.size() != 4) throw std::runtime_error("bad csp pair line: " + line);
    out.push_back({cols[0], cols[1], cols[2], cols[3] == "1"});
  }
  return out;
}

// Splits "scheme://host[:port]/path" into an origin and its path.
inline std::pair<Origin, std::string> split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  auto path_start = url.find('/', scheme_end + 3);
  std::string origin = url.substr(0, path_start);
  std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);
  auto parsed = Origin::parse(origin);
  if (!parsed) throw std::runtime_error("bad origin " + origin);
  return {*parsed, path};
}

struct ExpectedFinding {
  std::string domain;  // may be "*.<parent>"
  std::string vector;
  std::string ref;
  std::string certainty;
  std::string disposition;
};

struct ExpectedNegative {
  std::string domain;
  std::string vector;
};

struct ExpectedCorpus {
  std::vector<ExpectedFinding> findings;
  std::vector<ExpectedNegative> negatives;
};

inline ExpectedCorpus load_expected_findings(const std::string& path) {
  ExpectedCorpus out;
  std::istringstream in(read_text(path));
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "finding") {
      ExpectedFinding f;
      ls >> f.domain >> f.vector >> f.ref >> f.certainty >> f.disposition;
      if (f.ref == "-") f.ref.clear();
      out.findings.push_back(f);
    } else if (kind == "negative") {
      ExpectedNegative n;
      ls >> n.domain >> n.vector;
      out.negatives.push_back(n);
    }
  }
  return out;
}

// "*.p" matches exactly one extra label below p.
inline bool domain_pattern_matches(const std::string& pattern, const std::string& domain) {
  if (!pattern.starts_with("*.")) return pattern == domain;
  const std::string parent = pattern.substr(1);
  return domain.size() > parent.size() && domain.ends_with(parent) &&
         domain.substr(0, domain.size() - parent.size()).find('.') == std::string::npos;
}

}  // namespace relscan::testsupport
