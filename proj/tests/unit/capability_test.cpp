#include <gtest/gtest.h>

#include "relscan/capability.hpp"
#include "support.hpp"

using namespace relscan;
using namespace relscan::testsupport;

TEST(CapabilitySet, ClosureUnderSubsumption) {
  EXPECT_EQ(close({Capability::kJs}),
            (CapabilitySet{Capability::kJs, Capability::kHtml, Capability::kContent}));
  EXPECT_EQ(close({Capability::kHtml}),
            (CapabilitySet{Capability::kHtml, Capability::kContent}));
  EXPECT_EQ(close({Capability::kContent}), CapabilitySet{Capability::kContent});
  EXPECT_TRUE(CapabilitySet::from_bits(CapabilitySet::bit(Capability::kJs))
                  .contains(Capability::kContent));
  EXPECT_EQ(CapabilitySet::all().bits(), 63);
}

TEST(CapabilitySet, WithoutAndUnion) {
  auto all = CapabilitySet::all();
  EXPECT_FALSE(all.without(Capability::kHttps).contains(Capability::kHttps));
  auto a = close({Capability::kHeaders});
  auto b = close({Capability::kFile});
  EXPECT_TRUE(a.subset_of(a | b));
  EXPECT_FALSE((a | b).subset_of(a));
}

TEST(CapabilitySet, Names) {
  for (auto c : kAllCapabilities) EXPECT_EQ(parse_capability(to_string(c)), c);
  EXPECT_FALSE(parse_capability("root"));
  EXPECT_EQ(close({Capability::kJs, Capability::kHttps}).str(), "{js, html, content, https}");
}

TEST(Requirement, CookieConfidentiality) {
  auto httponly_secure = required_for(ThreatContext::for_cookie(
      Threat::kCookieConfidentiality, {true, true, CookiePrefix::kNone}));
  EXPECT_FALSE(httponly_secure.immune);
  EXPECT_TRUE(httponly_secure.requirement.satisfied_by(close({Capability::kHeaders, Capability::kHttps})));
  EXPECT_FALSE(httponly_secure.requirement.satisfied_by(close({Capability::kJs, Capability::kHttps})));
  EXPECT_FALSE(httponly_secure.requirement.satisfied_by(close({Capability::kHeaders})));
}

TEST(Requirement, HostPrefixIsImmune) {
  for (const auto& attrs : all_cookie_attributes()) {
    auto r = required_for(ThreatContext::for_cookie(Threat::kCookieIntegrity, attrs));
    EXPECT_EQ(r.immune, attrs.prefix == CookiePrefix::kHost);
    EXPECT_FALSE(
        required_for(ThreatContext::for_cookie(Threat::kCookieConfidentiality, attrs)).immune);
  }
  EXPECT_EQ(required_for(ThreatContext::for_cookie(Threat::kCookieIntegrity,
                                                   {false, true, CookiePrefix::kHost}))
                .str(),
            "immune");
}

TEST(Requirement, FramingControlIgnoresHttps) {
  for (bool https : {false, true}) {
    EXPECT_TRUE(exploitable(close({Capability::kHtml}),
                            ThreatContext::for_threat(Threat::kCspFramingControl, https)));
  }
  EXPECT_FALSE(exploitable(close({Capability::kHtml}),
                           ThreatContext::for_threat(Threat::kCspFrame, true)));
}

TEST(Requirement, ContextShapeIsChecked) {
  EXPECT_TRUE(ThreatContext::for_threat(Threat::kCors, true).well_formed());
  ThreatContext bad;
  bad.threat = Threat::kCookieIntegrity;
  EXPECT_FALSE(bad.well_formed());
}

// Brute force against the independent oracle, exhaustively.
TEST(Requirement, MatchesOracleExhaustively) {
  for (unsigned bits = 0; bits < 64; ++bits) {
    const CapabilityOracle oracle(bits);
    const auto caps = CapabilitySet::from_bits(static_cast<std::uint8_t>(bits));
    EXPECT_EQ(caps, oracle.as_set());
    for (const auto& attrs : all_cookie_attributes()) {
      EXPECT_EQ(exploitable(caps, ThreatContext::for_cookie(Threat::kCookieConfidentiality, attrs)),
                oracle.cookie_confidentiality(attrs));
      EXPECT_EQ(exploitable(caps, ThreatContext::for_cookie(Threat::kCookieIntegrity, attrs)),
                oracle.cookie_integrity(attrs));
    }
    for (auto t : kNonCookieThreats)
      for (bool https : {false, true})
        EXPECT_EQ(exploitable(caps, ThreatContext::for_threat(t, https)), oracle.threat(t, https))
            << to_string(t) << " " << caps.str();
  }
}

TEST(VectorCaps, DefaultsAndCaa) {
  EXPECT_EQ(vector_default_caps(VectorKind::kExpiredDomain, std::nullopt, true),
            CapabilitySet::all());
  EXPECT_EQ(vector_default_caps(VectorKind::kDeprovisionedCloud, std::nullopt, false),
            CapabilitySet::all().without(Capability::kHttps));
  auto grants = close({Capability::kJs, Capability::kHttps});
  EXPECT_EQ(vector_default_caps(VectorKind::kDiscontinuedService, grants, true), grants);
  EXPECT_EQ(vector_default_caps(VectorKind::kDiscontinuedService, grants, false),
            close({Capability::kJs}));
  EXPECT_THROW(vector_default_caps(VectorKind::kExpiredDomain, grants, true),
               std::invalid_argument);
  EXPECT_THROW(vector_default_caps(VectorKind::kDiscontinuedService, std::nullopt, true),
               std::invalid_argument);
}
