#pragma once

#include <stdexcept>
#include <string>

namespace ncrel {

// Malformed or inconsistent input data (files, parses, shapes).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid arguments or configuration.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numerical or verification check failed (non-finite values, grad check).
class CheckFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ncrel
