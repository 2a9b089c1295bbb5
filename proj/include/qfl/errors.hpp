#pragma once

#include <stdexcept>
#include <string>

namespace qfl {

// Invalid configuration values (bad degree, lambda < 0, tau outside (0,1), ...).
struct ConfigError : std::invalid_argument {
  explicit ConfigError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Evaluation outside the basis domain.
struct DomainError : std::domain_error {
  explicit DomainError(const std::string& msg) : std::domain_error(msg) {}
};

// Operation called in a state it does not support (wrong loss kind, inactive index, ...).
struct UsageError : std::logic_error {
  explicit UsageError(const std::string& msg) : std::logic_error(msg) {}
};

// Malformed or inconsistent input data; carries a line number when one is known.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg, long line = 0)
      : std::runtime_error(line > 0 ? msg + " (line " + std::to_string(line) + ")" : msg),
        line_number(line) {}
  long line_number;
};

// Conditions that indicate a bug rather than bad input.
struct InternalError : std::runtime_error {
  explicit InternalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace qfl
