#pragma once

#include <stdexcept>
#include <string>

namespace ddmna {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Netlist or CSV text that does not follow the grammar.
class ParseError : public Error {
public:
  ParseError(const std::string& what, int line, int column)
      : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
        line_(line), column_(column) {}

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

private:
  int line_;
  int column_;
};

/// Structurally invalid circuit (self loops, floating nodes, duplicates).
class TopologyError : public Error {
public:
  using Error::Error;
};

/// Argument outside the domain of a model or plan.
class DomainError : public Error {
public:
  using Error::Error;
};

/// Singular system or failed nonlinear iteration.
class SolverError : public Error {
public:
  using Error::Error;
};

/// Invalid run or experiment configuration.
class ConfigError : public Error {
public:
  using Error::Error;
};

} // namespace ddmna
