#include "relscan/zone_resolver.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "relscan/psl.hpp"

namespace relscan {
namespace {

// Splits a zone-file line into fields, honouring quoted strings and dropping
// ";" comments.
std::vector<std::string> tokenize(std::string_view line) {
  std::vector<std::string> out;
  std::string current;
  bool quoted = false;
  bool have = false;
  for (char c : line) {
    if (quoted) {
      if (c == '"') {
        quoted = false;
      } else {
        current += c;
      }
      continue;
    }
    if (c == ';') break;
    if (c == '"') {
      quoted = true;
      have = true;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (have) out.push_back(std::move(current));
      current.clear();
      have = false;
      continue;
    }
    current += c;
    have = true;
  }
  if (have) out.push_back(std::move(current));
  return out;
}

bool is_number(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), ::isdigit);
}

bool is_class(const std::string& s) {
  std::string upper = s;
  std::transform(upper.begin(), upper.end(), upper.begin(), ::toupper);
  return upper == "IN" || upper == "CH" || upper == "HS";
}

bool is_known_type_token(const std::string& s) {
  static const std::set<std::string> kOther = {
      "SOA", "MX", "TXT", "PTR", "SRV", "DS", "DNSKEY", "RRSIG", "NSEC",
      "SPF", "HINFO", "TLSA", "SSHFP", "NAPTR", "DNAME", "HTTPS", "SVCB"};
  std::string upper = s;
  std::transform(upper.begin(), upper.end(), upper.begin(), ::toupper);
  return parse_record_type(upper).has_value() || kOther.contains(upper);
}

}  // namespace

void ZoneResolver::add_existing(const DomainName& owner,
                                const DomainName& origin) {
  // Owners plus their empty non-terminal ancestors inside the zone.
  std::optional<DomainName> current = owner;
  while (current) {
    existing_.insert(*current);
    if (*current == origin || !current->is_subdomain_of(origin)) break;
    current = current->parent();
  }
}

void ZoneResolver::add_record(const DnsRecord& record) {
  records_[record.name].push_back(record);
  if (record.name.is_wildcard()) wildcard_owners_.insert(record.name);
}

void ZoneResolver::add_zone_text(std::string_view text,
                                 std::string_view default_origin,
                                 std::string_view source) {
  std::optional<DomainName> origin;
  if (!default_origin.empty()) origin = DomainName(default_origin);
  std::uint32_t default_ttl = 3600;
  std::optional<DomainName> previous_owner;

  auto fail = [&](std::size_t line, const std::string& message) {
    throw ZoneParseError(std::string(source) + ":" + std::to_string(line) +
                         ": " + message);
  };

  auto absolute = [&](const std::string& token,
                      std::size_t line) -> DomainName {
    if (token == "@") {
      if (!origin) fail(line, "'@' used without $ORIGIN");
      return *origin;
    }
    std::string error;
    std::optional<DomainName> name;
    if (!token.empty() && token.back() == '.') {
      name = DomainName::parse(token, &error);
    } else {
      if (!origin) fail(line, "relative name '" + token + "' without $ORIGIN");
      name = DomainName::parse(token + "." + origin->str(), &error);
    }
    if (!name) fail(line, "bad name '" + token + "': " + error);
    return *name;
  };

  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::size_t start_line = line_no;
    // Join parenthesised continuation lines.
    std::string logical = raw;
    auto depth = [](const std::string& s) {
      int d = 0;
      bool quoted = false;
      for (char c : s) {
        if (c == '"') quoted = !quoted;
        if (quoted) continue;
        if (c == ';') break;
        if (c == '(') ++d;
        if (c == ')') --d;
      }
      return d;
    };
    int open = depth(logical);
    while (open > 0 && std::getline(in, raw)) {
      ++line_no;
      logical += " " + raw;
      open += depth(raw);
    }
    std::replace(logical.begin(), logical.end(), '(', ' ');
    std::replace(logical.begin(), logical.end(), ')', ' ');

    const bool starts_blank =
        !logical.empty() && std::isspace(static_cast<unsigned char>(logical[0]));
    std::vector<std::string> tokens = tokenize(logical);
    if (tokens.empty()) continue;

    if (tokens[0] == "$ORIGIN") {
      if (tokens.size() < 2) fail(start_line, "$ORIGIN needs a name");
      std::string error;
      origin = DomainName::parse(tokens[1], &error);
      if (!origin) fail(start_line, "bad $ORIGIN: " + error);
      continue;
    }
    if (tokens[0] == "$TTL") {
      if (tokens.size() < 2 || !is_number(tokens[1])) {
        fail(start_line, "$TTL needs a number");
      }
      default_ttl = static_cast<std::uint32_t>(std::stoul(tokens[1]));
      continue;
    }
    if (tokens[0] == "$FAULT") {
      if (tokens.size() < 3) fail(start_line, "$FAULT needs a name and outcome");
      const DomainName name = absolute(tokens[1], start_line);
      std::string kind = tokens[2];
      std::transform(kind.begin(), kind.end(), kind.begin(), ::toupper);
      Rcode rcode = Rcode::kServFail;
      if (kind == "TIMEOUT") {
        rcode = Rcode::kTimeout;
      } else if (kind == "SERVFAIL") {
        rcode = Rcode::kServFail;
      } else if (kind == "REFUSED") {
        rcode = Rcode::kRefused;
      } else {
        fail(start_line, "unknown fault '" + tokens[2] + "'");
      }
      faults_[name] = rcode;
      continue;
    }
    if (tokens[0].starts_with('$')) fail(start_line, "unsupported directive " + tokens[0]);

    std::size_t i = 0;
    DomainName owner = origin.value_or(DomainName("invalid"));
    if (starts_blank) {
      if (!previous_owner) fail(start_line, "record without owner");
      owner = *previous_owner;
    } else {
      owner = absolute(tokens[0], start_line);
      i = 1;
    }
    previous_owner = owner;

    std::uint32_t ttl = default_ttl;
    // TTL and class may appear in either order.
    for (int k = 0; k < 2 && i < tokens.size(); ++k) {
      if (is_number(tokens[i]) && !is_known_type_token(tokens[i])) {
        ttl = static_cast<std::uint32_t>(std::stoul(tokens[i]));
        ++i;
      } else if (is_class(tokens[i])) {
        ++i;
      }
    }
    if (i >= tokens.size()) fail(start_line, "missing record type");
    const std::string type_token = tokens[i++];
    if (!is_known_type_token(type_token)) {
      fail(start_line, "unknown record type '" + type_token + "'");
    }

    if (origin) {
      add_existing(owner, *origin);
    } else {
      existing_.insert(owner);
    }

    const auto type = parse_record_type(type_token);
    if (!type) continue;  // Other types only mark the owner as existing.

    const std::size_t data_count = tokens.size() - i;
    try {
      switch (*type) {
        case RecordType::kA:
        case RecordType::kAAAA: {
          if (data_count != 1) fail(start_line, "address record needs one value");
          auto ip = IpAddress::parse(tokens[i]);
          if (!ip) fail(start_line, "bad address '" + tokens[i] + "'");
          add_record(DnsRecord::make(owner, ttl, *type, *ip));
          break;
        }
        case RecordType::kCNAME:
        case RecordType::kNS: {
          if (data_count != 1) fail(start_line, "name record needs one target");
          add_record(DnsRecord::make(owner, ttl, *type, absolute(tokens[i], start_line)));
          break;
        }
        case RecordType::kCAA: {
          if (data_count != 3 || !is_number(tokens[i])) {
            fail(start_line, "CAA needs flags, tag and value");
          }
          CaaData caa{static_cast<std::uint8_t>(std::stoul(tokens[i])),
                      tokens[i + 1], tokens[i + 2]};
          add_record(DnsRecord::make(owner, ttl, *type, caa));
          break;
        }
      }
    } catch (const std::invalid_argument& e) {
      fail(start_line, e.what());
    }
  }
}

void ZoneResolver::add_zone_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ZoneParseError("cannot open zone file " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  add_zone_text(buffer.str(), "", path);
}

QueryResult ZoneResolver::query(const DomainName& name, RecordType type,
                                const QueryOptions&) const {
  if (auto fault = faults_.find(name); fault != faults_.end()) {
    return QueryResult{fault->second, {}};
  }

  auto select = [&](const std::vector<DnsRecord>& records,
                    const DomainName& owner) {
    QueryResult result;
    for (const auto& record : records) {
      if (record.type != type) continue;
      DnsRecord copy = record;
      copy.name = owner;
      result.answers.push_back(std::move(copy));
    }
    return result;
  };

  if (auto it = records_.find(name); it != records_.end()) {
    return select(it->second, name);
  }
  if (existing_.contains(name)) return QueryResult{};

  // Closest wildcard first.
  for (std::optional<DomainName> ancestor = name.parent(); ancestor;
       ancestor = ancestor->parent()) {
    const auto pattern = DomainName::parse("*." + ancestor->str());
    if (!pattern || !wildcard_owners_.contains(*pattern)) continue;
    if (wildcard_match(*pattern, name, existing_)) {
      return select(records_.at(*pattern), name);
    }
    break;
  }
  return QueryResult{Rcode::kNxDomain, {}};
}

}  // namespace relscan
