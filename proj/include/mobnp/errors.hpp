#pragma once

#include <stdexcept>
#include <string>

namespace mobnp {

/// Value outside the support of a transform or density (e.g. logit of 1.0).
class DomainError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

/// Inconsistent shapes, labels or cross-object references.
class StructuralError : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

/// Malformed input file; the message carries file, line and column.
class ParseError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

} // namespace mobnp
