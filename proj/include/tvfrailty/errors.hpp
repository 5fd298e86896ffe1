#pragma once

#include <stdexcept>
#include <string>

namespace tvf {

// Invalid argument or parameter outside the domain of a formula.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A numerical procedure failed to reach its target accuracy.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, double achieved = 0.0)
      : std::runtime_error(what), achieved_(achieved) {}
  double achieved() const noexcept { return achieved_; }

 private:
  double achieved_;
};

// Malformed or inconsistent input data (CSV rows, model files).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tvf
