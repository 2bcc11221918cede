#pragma once

#include <stdexcept>
#include <string>

namespace cgl {

// Exit codes of the command-line front end map one-to-one onto these kinds.
enum class ErrorKind {
  Domain,       // parameter outside its mathematical domain
  Config,       // malformed configuration or grid
  Numeric,      // solver failure, divergence, lost separation
  Consistency,  // an internal identity failed (compatibility, contraction)
  Regime        // asymptotic regime of the construction violated
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, std::string reason, const std::string& what)
      : std::runtime_error(what), kind_(kind), reason_(std::move(reason)) {}

  ErrorKind kind() const { return kind_; }
  // Short machine-readable tag, e.g. "empty grid" or "certification failed".
  const std::string& reason() const { return reason_; }

  int exit_code() const {
    switch (kind_) {
      case ErrorKind::Domain:
      case ErrorKind::Config: return 2;
      case ErrorKind::Regime: return 3;
      default: return 1;
    }
  }

private:
  ErrorKind kind_;
  std::string reason_;
};

inline Error domain_error(const std::string& reason, const std::string& what) {
  return Error(ErrorKind::Domain, reason, what);
}
inline Error config_error(const std::string& reason, const std::string& what) {
  return Error(ErrorKind::Config, reason, what);
}
inline Error numeric_error(const std::string& reason, const std::string& what) {
  return Error(ErrorKind::Numeric, reason, what);
}
inline Error consistency_error(const std::string& reason, const std::string& what) {
  return Error(ErrorKind::Consistency, reason, what);
}
inline Error regime_error(const std::string& reason, const std::string& what) {
  return Error(ErrorKind::Regime, reason, what);
}

}  // namespace cgl
