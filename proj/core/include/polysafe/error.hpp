#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace polysafe {

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A polynomial expression did not conform to the grammar.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t offset)
      : Error(message + " at byte " + std::to_string(offset)),
        detail_(message),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }
  const std::string& detail() const { return detail_; }

 private:
  std::string detail_;
  std::size_t offset_;
};

/// An identifier is not part of the variable universe it was parsed against.
class UnknownIdentifierError : public Error {
 public:
  UnknownIdentifierError(const std::string& token, std::size_t offset,
                         const std::string& context = {})
      : Error((context.empty() ? std::string() : context + ": ") +
              "unknown identifier '" + token + "' at byte " +
              std::to_string(offset)),
        token_(token),
        offset_(offset) {}
  const std::string& token() const { return token_; }
  std::size_t offset() const { return offset_; }

 private:
  std::string token_;
  std::size_t offset_;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class MissingAssignmentError : public Error {
 public:
  using Error::Error;
};

/// Raised while lowering an SOS program to an SDP.
class CompileError : public Error {
 public:
  using Error::Error;
};

/// A solution was requested from a solve that is neither optimal nor feasible.
class StatusError : public Error {
 public:
  using Error::Error;
};

class MisconfigurationError : public Error {
 public:
  using Error::Error;
};

class IncompleteCertificateError : public Error {
 public:
  using Error::Error;
};

class EmptyAdmissibleSetError : public Error {
 public:
  using Error::Error;
};

/// A solver result file could not be read.
class MalformedResultError : public Error {
 public:
  MalformedResultError(const std::string& message, std::size_t line)
      : Error(message + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace polysafe
