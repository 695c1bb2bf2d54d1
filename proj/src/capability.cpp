#include "relscan/capability.hpp"

#include <stdexcept>

namespace relscan {

std::string_view to_string(Capability capability) {
  switch (capability) {
    case Capability::kHeaders: return "headers";
    case Capability::kJs: return "js";
    case Capability::kHtml: return "html";
    case Capability::kContent: return "content";
    case Capability::kFile: return "file";
    case Capability::kHttps: return "https";
  }
  return "?";
}

std::optional<Capability> parse_capability(std::string_view text) {
  for (Capability c : kAllCapabilities) {
    if (to_string(c) == text) return c;
  }
  return std::nullopt;
}

std::uint8_t CapabilitySet::closure(std::uint8_t bits) {
  if (bits & bit(Capability::kJs)) bits |= bit(Capability::kHtml);
  if (bits & bit(Capability::kHtml)) bits |= bit(Capability::kContent);
  return bits;
}

CapabilitySet::CapabilitySet(std::initializer_list<Capability> members) {
  for (Capability c : members) bits_ |= bit(c);
  bits_ = closure(bits_);
}

CapabilitySet CapabilitySet::from_bits(std::uint8_t bits) {
  CapabilitySet out;
  out.bits_ = closure(bits & 0x3f);
  return out;
}

CapabilitySet CapabilitySet::all() { return from_bits(0x3f); }

CapabilitySet CapabilitySet::with(Capability capability) const {
  return from_bits(bits_ | bit(capability));
}

CapabilitySet CapabilitySet::without(Capability capability) const {
  // Removing a subsumed member keeps the closure well-defined only for
  // capabilities nothing else implies; callers use it for https.
  CapabilitySet out;
  out.bits_ = bits_ & static_cast<std::uint8_t>(~bit(capability));
  out.bits_ = closure(out.bits_);
  return out;
}

CapabilitySet CapabilitySet::operator|(const CapabilitySet& other) const {
  return from_bits(bits_ | other.bits_);
}

std::vector<std::string> CapabilitySet::names() const {
  std::vector<std::string> out;
  for (Capability c : kAllCapabilities) {
    if (contains(c)) out.emplace_back(to_string(c));
  }
  return out;
}

std::string CapabilitySet::str() const {
  std::string out = "{";
  for (const auto& name : names()) {
    if (out.size() > 1) out += ", ";
    out += name;
  }
  return out + "}";
}

CapabilitySet close(std::initializer_list<Capability> members) {
  return CapabilitySet(members);
}

CapabilitySet close(const std::vector<Capability>& members) {
  std::uint8_t bits = 0;
  for (Capability c : members) bits |= CapabilitySet::bit(c);
  return CapabilitySet::from_bits(bits);
}

bool CapabilityRequirement::satisfied_by(const CapabilitySet& caps) const {
  for (const auto& alternative : alternatives) {
    if (alternative.subset_of(caps)) return true;
  }
  return false;
}

std::string CapabilityRequirement::str() const {
  std::string out;
  for (const auto& alternative : alternatives) {
    if (!out.empty()) out += " | ";
    out += alternative.str();
  }
  return out;
}

std::string_view to_string(CookiePrefix prefix) {
  switch (prefix) {
    case CookiePrefix::kNone: return "none";
    case CookiePrefix::kSecure: return "__Secure-";
    case CookiePrefix::kHost: return "__Host-";
  }
  return "?";
}

std::string_view to_string(Threat threat) {
  switch (threat) {
    case Threat::kCookieConfidentiality: return "cookie_confidentiality";
    case Threat::kCookieIntegrity: return "cookie_integrity";
    case Threat::kCspScript: return "csp_script";
    case Threat::kCspStyle: return "csp_style";
    case Threat::kCspObject: return "csp_object";
    case Threat::kCspFrame: return "csp_frame";
    case Threat::kCspFramingControl: return "csp_framing_control";
    case Threat::kCors: return "cors";
    case Threat::kPostMessage: return "postmessage";
    case Threat::kDomainRelaxation: return "domain_relaxation";
  }
  return "?";
}

bool is_cookie_threat(Threat threat) {
  return threat == Threat::kCookieConfidentiality ||
         threat == Threat::kCookieIntegrity;
}

ThreatContext ThreatContext::for_cookie(Threat threat, CookieAttributes attrs) {
  if (!is_cookie_threat(threat)) {
    throw std::invalid_argument("cookie attributes given for a non-cookie threat");
  }
  return ThreatContext{threat, false, attrs};
}

ThreatContext ThreatContext::for_threat(Threat threat, bool target_https) {
  if (is_cookie_threat(threat)) {
    throw std::invalid_argument("cookie threat needs cookie attributes");
  }
  return ThreatContext{threat, target_https, std::nullopt};
}

bool ThreatContext::well_formed() const {
  return cookie.has_value() == is_cookie_threat(threat);
}

namespace {

CapabilityRequirement one(CapabilitySet set) { return {{set}}; }

CapabilityRequirement plus_https(CapabilityRequirement requirement) {
  for (auto& alternative : requirement.alternatives) {
    alternative = alternative.with(Capability::kHttps);
  }
  return requirement;
}

}  // namespace

RequirementResult required_for(const ThreatContext& context) {
  if (!context.well_formed()) {
    throw std::invalid_argument("malformed threat context");
  }
  using C = Capability;
  RequirementResult out;
  switch (context.threat) {
    case Threat::kCookieConfidentiality: {
      const auto& cookie = *context.cookie;
      out.requirement = cookie.http_only
                            ? one({C::kHeaders})
                            : CapabilityRequirement{{{C::kHeaders}, {C::kJs}}};
      if (cookie.secure) out.requirement = plus_https(out.requirement);
      break;
    }
    case Threat::kCookieIntegrity: {
      const auto& cookie = *context.cookie;
      if (cookie.prefix == CookiePrefix::kHost) {
        out.immune = true;
        break;
      }
      out.requirement = CapabilityRequirement{{{C::kHeaders}, {C::kJs}}};
      if (cookie.prefix == CookiePrefix::kSecure) {
        out.requirement = plus_https(out.requirement);
      }
      break;
    }
    case Threat::kCspScript:
    case Threat::kCspStyle:
    case Threat::kCspObject:
      out.requirement = one({C::kFile});
      if (context.target_https) out.requirement = plus_https(out.requirement);
      break;
    case Threat::kCspFrame:
      out.requirement = one({C::kHtml});
      if (context.target_https) out.requirement = plus_https(out.requirement);
      break;
    case Threat::kCspFramingControl:
      out.requirement = one({C::kHtml});
      break;
    case Threat::kCors:
    case Threat::kPostMessage:
      out.requirement = one({C::kJs});
      break;
    case Threat::kDomainRelaxation:
      out.requirement = one({C::kJs});
      if (context.target_https) out.requirement = plus_https(out.requirement);
      break;
  }
  return out;
}

bool exploitable(const CapabilitySet& caps, const ThreatContext& context) {
  const RequirementResult result = required_for(context);
  return !result.immune && result.requirement.satisfied_by(caps);
}

std::string_view to_string(VectorKind kind) {
  switch (kind) {
    case VectorKind::kExpiredDomain: return "expired_domain";
    case VectorKind::kDiscontinuedService: return "discontinued_service";
    case VectorKind::kDeprovisionedCloud: return "deprovisioned_cloud";
  }
  return "?";
}

CapabilitySet vector_default_caps(VectorKind kind,
                                  const std::optional<CapabilitySet>& service_grants,
                                  bool caa_https_ok) {
  if (service_grants.has_value() != (kind == VectorKind::kDiscontinuedService)) {
    throw std::invalid_argument(
        "service grants must be given exactly for discontinued services");
  }
  CapabilitySet caps = kind == VectorKind::kDiscontinuedService
                           ? *service_grants
                           : CapabilitySet::all();
  if (!caa_https_ok) caps = caps.without(Capability::kHttps);
  return caps;
}

}  // namespace relscan
