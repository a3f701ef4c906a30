#pragma once

#include <stdexcept>
#include <string>

namespace hdt {

// Base for everything the toolkit throws on purpose.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad configuration or usage: out-of-range parameter, unknown run id,
// contradictory options. Maps to exit code 1 in the CLI.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Bad input data: malformed rows, invariant violations, mixed-image input.
// Maps to exit code 2 in the CLI.
class DataError : public Error {
 public:
  explicit DataError(const std::string& msg) : Error(msg) {}
};

// Malformed document; carries the source name and a 1-based line when known.
class ParseError : public DataError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& msg)
      : DataError(source + ":" + std::to_string(line) + ": " + msg),
        source_(source),
        line_(line) {}
  explicit ParseError(const std::string& msg) : DataError(msg), line_(0) {}

  const std::string& source() const { return source_; }
  std::size_t line() const { return line_; }

 private:
  std::string source_;
  std::size_t line_ = 0;
};

class UnknownLabelError : public DataError {
 public:
  explicit UnknownLabelError(const std::string& label)
      : DataError("unknown label: " + label), label_(label) {}

  const std::string& label() const { return label_; }

 private:
  std::string label_;
};

class CycleError : public DataError {
 public:
  explicit CycleError(const std::string& label)
      : DataError("hierarchy contains a cycle through label: " + label),
        label_(label) {}

  const std::string& label() const { return label_; }

 private:
  std::string label_;
};

}  // namespace hdt
