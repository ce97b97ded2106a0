#pragma once

#include <stdexcept>
#include <string>

namespace resnet_lab {

/// Precondition failure: bad dimensions, empty inputs, out-of-range knobs.
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A state, adjoint or parameter became non-finite. `index` is the layer,
/// depth node or flow step where it was detected.
class NumericOverflow : public std::runtime_error {
 public:
  NumericOverflow(const std::string& what, long index)
      : std::runtime_error(what + " " + std::to_string(index)), index_(index) {}
  long index() const noexcept { return index_; }

 private:
  long index_;
};

/// Malformed file content. `row` is 1-based over data rows, 0 for the header.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, long row)
      : std::runtime_error(row > 0 ? "row " + std::to_string(row) + ": " + what : what), row_(row) {}
  long row() const noexcept { return row_; }

 private:
  long row_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const char* msg) {
  if (!cond) throw ContractViolation(msg);
}
inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractViolation(msg);
}

}  // namespace resnet_lab
