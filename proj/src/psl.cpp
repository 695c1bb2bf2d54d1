#include "relscan/psl.hpp"

#include <fstream>
#include <sstream>

#include "hash.hpp"

namespace relscan {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

PublicSuffixList PublicSuffixList::load(std::string_view text) {
  PublicSuffixList psl;
  psl.version_ = sha256_hex(text);

  PslSection section = PslSection::kIcann;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    const std::string_view raw_line =
        text.substr(pos, eol == std::string_view::npos ? text.npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;

    std::string_view line = trim(raw_line);
    if (line.empty()) continue;
    if (line.starts_with("//")) {
      if (line.find("===BEGIN PRIVATE DOMAINS===") != line.npos) {
        section = PslSection::kPrivate;
      } else if (line.find("===BEGIN ICANN DOMAINS===") != line.npos) {
        section = PslSection::kIcann;
      }
      continue;
    }
    // Only the first whitespace-delimited token is the rule.
    line = line.substr(0, line.find_first_of(" \t"));

    PslRuleKind kind = PslRuleKind::kNormal;
    std::string_view body = line;
    if (body.starts_with('!')) {
      kind = PslRuleKind::kException;
      body.remove_prefix(1);
    }
    std::string error;
    auto name = DomainName::parse(body, &error);
    if (!name) {
      throw PslLoadError(line_no,
                         "malformed rule '" + std::string(line) + "': " + error);
    }
    if (name->is_wildcard()) {
      if (kind == PslRuleKind::kException) {
        throw PslLoadError(line_no, "exception rule cannot be a wildcard");
      }
      kind = PslRuleKind::kWildcard;
      if (name->label_count() < 2) {
        throw PslLoadError(line_no, "bare '*' rule");
      }
    }

    const PslRule rule{kind, section, line_no};
    auto& table = kind == PslRuleKind::kException ? psl.exceptions_ : psl.rules_;
    if (!table.emplace(name->str(), rule).second) continue;  // duplicate line
    switch (kind) {
      case PslRuleKind::kNormal: ++psl.stats_.normal; break;
      case PslRuleKind::kWildcard: ++psl.stats_.wildcard; break;
      case PslRuleKind::kException: ++psl.stats_.exception; break;
    }
  }

  if (psl.stats_.total() == 0) throw PslLoadError(0, "no rules");

  for (const auto& [name, rule] : psl.exceptions_) {
    const auto dot = name.find('.');
    if (dot == std::string::npos ||
        !psl.rules_.contains("*." + name.substr(dot + 1))) {
      throw PslLoadError(rule.line, "exception rule '!" + name +
                                        "' has no matching wildcard rule");
    }
  }
  return psl;
}

PublicSuffixList PublicSuffixList::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PslLoadError(0, "cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return load(buffer.str());
}

std::size_t PublicSuffixList::public_suffix_length(
    const DomainName& name) const {
  const auto& labels = name.labels();
  const std::size_t n = labels.size();

  // suffixes[i] is the name formed by labels[i..n).
  std::vector<std::string> suffixes(n);
  suffixes[n - 1] = labels[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) {
    suffixes[i] = labels[i] + "." + suffixes[i + 1];
  }

  // An exception rule always prevails; its public suffix drops the leftmost
  // label of the rule.
  for (std::size_t i = 0; i < n; ++i) {
    auto it = exceptions_.find(suffixes[i]);
    if (it != exceptions_.end() && active(it->second)) return n - i - 1;
  }

  // Otherwise the longest matching rule wins; scan longest first.
  for (std::size_t i = 0; i < n; ++i) {
    auto it = rules_.find(suffixes[i]);
    if (it != rules_.end() && active(it->second)) return n - i;
    if (i + 1 < n) {
      auto wild = rules_.find("*." + suffixes[i + 1]);
      if (wild != rules_.end() && active(wild->second)) return n - i;
    }
  }
  return 1;
}

std::optional<SiteKey> etld_plus_one(const DomainName& name,
                                     const PublicSuffixList& psl) {
  const std::size_t suffix_length = psl.public_suffix_length(name);
  if (name.label_count() <= suffix_length) return std::nullopt;
  return SiteKey{name.suffix(suffix_length + 1)};
}

bool is_related(const DomainName& a, const DomainName& b,
                const PublicSuffixList& psl) {
  const auto site_a = etld_plus_one(a, psl);
  if (!site_a) return false;
  const auto site_b = etld_plus_one(b, psl);
  return site_b && *site_a == *site_b;
}

bool wildcard_match(const DomainName& pattern, const DomainName& name,
                    const std::set<DomainName>& explicit_names) {
  if (!pattern.is_wildcard() || pattern.label_count() < 2) return false;
  const DomainName base = pattern.suffix(pattern.label_count() - 1);
  if (!name.is_subdomain_of(base)) return false;
  // An existing name strictly below base that encloses |name|, including an
  // empty non-terminal implied by a deeper owner, blocks synthesis.
  const auto& labels = name.labels();
  for (const auto& owner : explicit_names) {
    const auto& other = owner.labels();
    std::size_t shared = 0;
    while (shared < labels.size() && shared < other.size() &&
           labels[labels.size() - 1 - shared] == other[other.size() - 1 - shared])
      ++shared;
    if (shared > base.label_count()) return false;
  }
  return true;
}

}  // namespace relscan
