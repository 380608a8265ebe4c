#pragma once

#include <stdexcept>
#include <string>

namespace fsv {

// Caller broke a documented precondition (dimension mismatch, bad index, ...).
class contract_error : public std::logic_error {
 public:
  explicit contract_error(const std::string& what) : std::logic_error(what) {}
};

// Input is outside the mathematical domain of the operation.
class domain_error : public std::runtime_error {
 public:
  explicit domain_error(const std::string& what) : std::runtime_error(what) {}
};

// A numerical routine failed (factorization broke down, too many rejected draws).
class numerical_error : public std::runtime_error {
 public:
  explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input file.
class parse_error : public std::runtime_error {
 public:
  explicit parse_error(const std::string& what) : std::runtime_error(what) {}
};

// Inconsistent or invalid run configuration.
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {
inline void require(bool cond, const std::string& what) {
  if (!cond) throw contract_error(what);
}
}  // namespace detail

}  // namespace fsv
