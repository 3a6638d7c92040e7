#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mft {

/// Raised when |Psi| falls below the node threshold relative to the largest
/// branch term; the phase is meaningless there.
class NodeError : public std::runtime_error {
 public:
  explicit NodeError(double relative_magnitude)
      : std::runtime_error("wave-function node: relative magnitude " +
                           std::to_string(relative_magnitude)),
        relative_magnitude_(relative_magnitude) {}

  double relative_magnitude() const noexcept { return relative_magnitude_; }

 private:
  double relative_magnitude_;
};

/// Raised when node-triggered step halving is exhausted during integration.
class NodeStall : public std::runtime_error {
 public:
  explicit NodeStall(double last_good_tau)
      : std::runtime_error("integration stalled at a node; last good tau = " +
                           std::to_string(last_good_tau)),
        last_good_tau_(last_good_tau) {}

  double last_good_tau() const noexcept { return last_good_tau_; }

 private:
  double last_good_tau_;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : std::runtime_error(what), line_(line), column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// All branch magnitudes vanished at the requested configuration.
class Unclassifiable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mft
