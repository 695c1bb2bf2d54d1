#include "relscan/domain.hpp"

#include <unicode/uidna.h>

#include <algorithm>
#include <memory>

namespace relscan {
namespace {

struct IdnaCloser {
  void operator()(UIDNA* idna) const { uidna_close(idna); }
};

// UTS #46 objects are immutable once opened and safe to share across threads.
const UIDNA* uts46() {
  static const std::unique_ptr<UIDNA, IdnaCloser> instance = [] {
    UErrorCode status = U_ZERO_ERROR;
    UIDNA* idna = uidna_openUTS46(UIDNA_NONTRANSITIONAL_TO_ASCII, &status);
    if (U_FAILURE(status)) idna = nullptr;
    return std::unique_ptr<UIDNA, IdnaCloser>(idna);
  }();
  return instance.get();
}

bool is_label_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' ||
         c == '_';
}

}  // namespace

std::optional<std::string> to_ascii_name(std::string_view text) {
  if (!text.empty() && text.back() == '.') text.remove_suffix(1);
  const bool ascii = std::all_of(text.begin(), text.end(), [](char c) {
    return static_cast<unsigned char>(c) < 0x80;
  });
  if (ascii) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(), [](char c) {
      return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
    });
    return out;
  }

  const UIDNA* idna = uts46();
  if (idna == nullptr) return std::nullopt;
  std::string out(text.size() * 4 + 64, '\0');
  UErrorCode status = U_ZERO_ERROR;
  UIDNAInfo info = UIDNA_INFO_INITIALIZER;
  const int32_t length = uidna_nameToASCII_UTF8(
      idna, text.data(), static_cast<int32_t>(text.size()), out.data(),
      static_cast<int32_t>(out.size()), &info, &status);
  // Hyphen placement and label length are validated by DomainName itself.
  const uint32_t fatal = info.errors & ~(UIDNA_ERROR_HYPHEN_3_4 |
                                         UIDNA_ERROR_LEADING_HYPHEN |
                                         UIDNA_ERROR_TRAILING_HYPHEN |
                                         UIDNA_ERROR_LABEL_TOO_LONG |
                                         UIDNA_ERROR_DOMAIN_NAME_TOO_LONG |
                                         UIDNA_ERROR_EMPTY_LABEL);
  if (U_FAILURE(status) || fatal != 0) return std::nullopt;
  out.resize(static_cast<std::size_t>(length));
  return out;
}

bool DomainName::build(std::string_view text, DomainName& out,
                       std::string& error) {
  out.raw_ = std::string(text);
  auto ascii = to_ascii_name(text);
  if (!ascii) {
    error = "cannot convert to ASCII form";
    return false;
  }
  if (ascii->empty()) {
    error = "empty name";
    return false;
  }
  if (ascii->size() > kMaxNameLength) {
    error = "name longer than 253 characters";
    return false;
  }

  std::vector<std::string> labels;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = ascii->find('.', start);
    const std::size_t end = dot == std::string::npos ? ascii->size() : dot;
    labels.emplace_back(ascii->substr(start, end - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }

  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::string& label = labels[i];
    if (label.empty()) {
      error = "empty label";
      return false;
    }
    if (label.size() > kMaxLabelLength) {
      error = "label longer than 63 characters";
      return false;
    }
    if (label == "*") {
      if (i != 0) {
        error = "wildcard label only allowed in leftmost position";
        return false;
      }
      continue;
    }
    if (!std::all_of(label.begin(), label.end(), is_label_char)) {
      error = "invalid character in label '" + label + "'";
      return false;
    }
  }

  out.name_ = std::move(*ascii);
  out.labels_ = std::move(labels);
  return true;
}

std::optional<DomainName> DomainName::parse(std::string_view text,
                                            std::string* error) {
  DomainName name;
  std::string message;
  if (!build(text, name, message)) {
    if (error != nullptr) *error = std::move(message);
    return std::nullopt;
  }
  return name;
}

DomainName::DomainName(std::string_view text) {
  std::string message;
  if (!build(text, *this, message)) {
    throw InvalidDomain("invalid domain name '" + std::string(text) +
                        "': " + message);
  }
}

bool DomainName::is_subdomain_of(const DomainName& ancestor) const {
  return name_.size() > ancestor.name_.size() &&
         name_.ends_with(ancestor.name_) &&
         name_[name_.size() - ancestor.name_.size() - 1] == '.';
}

bool DomainName::is_within(const DomainName& ancestor) const {
  return *this == ancestor || is_subdomain_of(ancestor);
}

DomainName DomainName::suffix(std::size_t count) const {
  if (count == 0 || count > labels_.size()) {
    throw std::out_of_range("suffix label count out of range");
  }
  DomainName out;
  out.labels_.assign(labels_.end() - static_cast<std::ptrdiff_t>(count),
                     labels_.end());
  for (const auto& label : out.labels_) {
    if (!out.name_.empty()) out.name_ += '.';
    out.name_ += label;
  }
  out.raw_ = out.name_;
  return out;
}

std::optional<DomainName> DomainName::parent() const {
  if (labels_.size() < 2) return std::nullopt;
  return suffix(labels_.size() - 1);
}

DomainName DomainName::child(std::string_view label) const {
  std::string text(label);
  text += '.';
  text += name_;
  return DomainName(text);
}

}  // namespace relscan
