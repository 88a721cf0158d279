#pragma once

#include <stdexcept>
#include <string>

namespace tape {

// Base for every error the library raises. exit_code() maps to the CLI
// contract: 2 config/data, 3 transport, 4 numeric abort.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

// Bad configuration, bad input files, violated preconditions.
class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

// Malformed input file. Carries the 1-based line number when known.
class ParseError : public ConfigError {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : ConfigError(file + ":" + std::to_string(line) + ": " + what),
        file_(file),
        line_(line) {}
  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

class ShapeError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class TransportError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

// Non-success HTTP status after retries. body() holds the server response.
class StatusError : public TransportError {
 public:
  StatusError(int status, std::string body)
      : TransportError("HTTP status " + std::to_string(status) + ": " + body),
        status_(status),
        body_(std::move(body)) {}
  int status() const noexcept { return status_; }
  const std::string& body() const noexcept { return body_; }

 private:
  int status_;
  std::string body_;
};

// Response arrived but had no usable content.
class FormatError : public TransportError {
 public:
  using TransportError::TransportError;
};

// NaN/Inf surfaced in a numeric op or a training loss.
class NumericError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

}  // namespace tape
