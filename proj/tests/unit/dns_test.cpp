#include <gtest/gtest.h>

#include <atomic>
#include <set>

#include "relscan/dns.hpp"
#include "relscan/zone_resolver.hpp"

using namespace relscan;

namespace {

ZoneResolver zone(const char* text) {
  ZoneResolver z;
  z.add_zone_text(text);
  return z;
}

// Counts queries and fails the first |failures| of them with a timeout.
class FlakyResolver : public Resolver {
 public:
  FlakyResolver(const Resolver& inner, int failures) : inner_(inner), failures_(failures) {}
  QueryResult query(const DomainName& name, RecordType type,
                    const QueryOptions& options) const override {
    timeouts_seen_.insert(options.timeout.count());
    if (calls_++ < failures_) return QueryResult{Rcode::kTimeout, {}};
    return inner_.query(name, type, options);
  }
  mutable std::atomic<int> calls_{0};
  mutable std::set<long> timeouts_seen_;

 private:
  const Resolver& inner_;
  int failures_;
};

const char* kChains = R"(
$ORIGIN t.
$TTL 60
a.victim       CNAME  b.cdn
b.cdn          CNAME  c.edge
c.edge         A      192.0.2.10
c.edge         A      192.0.2.9
dangling.victim CNAME gone.lapsed
loop1.victim   CNAME  loop2.victim
loop2.victim   CNAME  loop1.victim
dual.victim    A      192.0.2.1
dual.victim    AAAA   2001:db8::1
dual.victim    NS     ns.provider
ns.provider    A      192.0.2.53
empty.victim   TXT    "nothing"
slow.victim    CNAME  timeout.edge
$FAULT timeout.edge TIMEOUT
)";

}  // namespace

TEST(DnsRecord, MakeValidatesData) {
  EXPECT_THROW(DnsRecord::make(DomainName("a.t"), 1, RecordType::kA, DomainName("b.t")),
               std::invalid_argument);
  EXPECT_THROW(DnsRecord::make(DomainName("a.t"), 1, RecordType::kA, *IpAddress::parse("::1")),
               std::invalid_argument);
  auto r = DnsRecord::make(DomainName("a.t"), 300, RecordType::kCNAME, DomainName("b.t"));
  EXPECT_EQ(r.str(), "a.t. 300 IN CNAME b.t.");
  EXPECT_EQ(parse_record_type("aaaa"), RecordType::kAAAA);
  EXPECT_FALSE(parse_record_type("MX"));
}

TEST(ResolveChain, FollowsAliasesToAddresses) {
  auto z = zone(kChains);
  auto set = resolve_chain(DomainName("a.victim.t"), z);
  ASSERT_FALSE(set.failure);
  ASSERT_EQ(set.chains.size(), 1u);
  const auto& chain = set.chains[0];
  EXPECT_EQ(chain.records.size(), 3u);
  EXPECT_TRUE(chain.linked());
  EXPECT_EQ(chain.initial_type(), RecordType::kCNAME);
  EXPECT_EQ(chain.terminal.kind, ChainTerminal::Kind::kResolved);
  EXPECT_EQ(chain.terminal.addresses.size(), 2u);
  EXPECT_EQ(chain.tail().name.str(), "c.edge.t");
}

TEST(ResolveChain, DanglingAliasIsUnresolvable) {
  auto z = zone(kChains);
  auto set = resolve_chain(DomainName("dangling.victim.t"), z);
  ASSERT_EQ(set.chains.size(), 1u);
  EXPECT_EQ(set.chains[0].terminal.kind, ChainTerminal::Kind::kUnresolvable);
  EXPECT_EQ(set.chains[0].terminal.rcode, Rcode::kNxDomain);
  EXPECT_EQ(set.chains[0].records.size(), 1u);
}

TEST(ResolveChain, LoopsAndLengthAreCut) {
  auto z = zone(kChains);
  auto loop = resolve_chain(DomainName("loop1.victim.t"), z);
  ASSERT_EQ(loop.chains.size(), 1u);
  EXPECT_EQ(loop.chains[0].terminal.kind, ChainTerminal::Kind::kTruncated);
  EXPECT_EQ(loop.chains[0].terminal.reason, "loop");

  ChainOptions short_chains;
  short_chains.max_length = 2;
  auto cut = resolve_chain(DomainName("a.victim.t"), z, short_chains);
  EXPECT_EQ(cut.chains[0].terminal.reason, "max-length");
  EXPECT_LE(cut.chains[0].records.size(), 2u);
}

TEST(ResolveChain, OneChainPerInitialType) {
  auto z = zone(kChains);
  auto set = resolve_chain(DomainName("dual.victim.t"), z);
  std::multiset<RecordType> types;
  for (const auto& c : set.chains) types.insert(c.initial_type());
  EXPECT_EQ(types, (std::multiset<RecordType>{RecordType::kA, RecordType::kAAAA, RecordType::kNS}));
  EXPECT_TRUE(resolve_chain(DomainName("empty.victim.t"), z).chains.empty());
  EXPECT_TRUE(resolve_chain(DomainName("missing.victim.t"), z).chains.empty());
}

TEST(ResolveChain, TimeoutsRetryOnceWithLongerTimeout) {
  auto z = zone(kChains);
  auto slow = resolve_chain(DomainName("slow.victim.t"), z);
  ASSERT_EQ(slow.chains.size(), 1u);
  EXPECT_TRUE(slow.has_truncated());
  EXPECT_EQ(slow.chains[0].terminal.reason, "timeout");

  FlakyResolver flaky(z, 1);
  ChainOptions options;
  auto set = resolve_chain(DomainName("a.victim.t"), flaky, options);
  EXPECT_FALSE(set.failure);
  EXPECT_FALSE(set.has_truncated());
  EXPECT_EQ(set.chains.size(), 1u);
  EXPECT_EQ(flaky.timeouts_seen_.size(), 2u);
  EXPECT_TRUE(flaky.timeouts_seen_.contains(options.query.timeout.count() * 2));
}

TEST(ResolveChain, FailureOfTheNameItself) {
  auto z = zone("$ORIGIN t.\n$FAULT down SERVFAIL\n");
  auto set = resolve_chain(DomainName("down.t"), z);
  ASSERT_TRUE(set.failure);
  EXPECT_EQ(*set.failure, "servfail");
}

TEST(NonceGenerator, DeterministicAndWellFormed) {
  NonceGenerator a(5), b(5), c(6);
  const auto first = a.next();
  EXPECT_EQ(first, b.next());
  EXPECT_NE(first, c.next());
  EXPECT_NE(first, a.next());
  EXPECT_EQ(first.size(), NonceGenerator::kLength);
  EXPECT_TRUE(DomainName::parse(first + ".example"));
}

TEST(ZoneWildcard, DetectsSynthesis) {
  auto z = zone("$ORIGIN t.\n*.wild CNAME x.cdn.t.\nplain A 192.0.2.1\n$FAULT *.down SERVFAIL\n");
  NonceGenerator nonces(1);
  auto yes = detect_zone_wildcard(DomainName("wild.t"), z, nonces);
  EXPECT_EQ(yes.wildcard, Tri::kTrue);
  EXPECT_TRUE(yes.probe_name.is_subdomain_of(DomainName("wild.t")));
  EXPECT_EQ(detect_zone_wildcard(DomainName("plain.t"), z, nonces).wildcard, Tri::kFalse);
}

TEST(Caa, ClosestRecordSetDecides) {
  auto z = zone(R"(
$ORIGIN t.
locked         CAA 0 issue "digicert.com"
open           CAA 0 issue "letsencrypt.org; validationmethods=dns-01"
open           CAA 0 issue "digicert.com"
sub.locked     CAA 0 issue "pki.goog"
crit           CAA 128 tbs "x"
nowild         CAA 0 issuewild "letsencrypt.org"
$FAULT failing SERVFAIL
)");
  const std::set<std::string> cas = {"letsencrypt.org", "pki.goog"};
  auto locked = caa_permits_automated_issuance(DomainName("a.b.locked.t"), z, cas);
  EXPECT_FALSE(locked.permits);
  EXPECT_EQ(locked.relevant_name->str(), "locked.t");
  EXPECT_TRUE(caa_permits_automated_issuance(DomainName("x.sub.locked.t"), z, cas).permits);
  EXPECT_TRUE(caa_permits_automated_issuance(DomainName("open.t"), z, cas).permits);
  EXPECT_FALSE(caa_permits_automated_issuance(DomainName("crit.t"), z, cas).permits);
  // Only issuewild present: no issue property restricts ordinary names.
  EXPECT_TRUE(caa_permits_automated_issuance(DomainName("nowild.t"), z, cas).permits);
  auto none = caa_permits_automated_issuance(DomainName("nothing.t"), z, cas);
  EXPECT_TRUE(none.permits);
  EXPECT_FALSE(none.relevant_name);
  auto failing = caa_permits_automated_issuance(DomainName("x.failing.t"), z, cas);
  EXPECT_TRUE(failing.permits);
  EXPECT_TRUE(failing.indeterminate);
}
