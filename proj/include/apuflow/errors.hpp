#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace apuflow {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class FieldSizeError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class ResourceError : public Error {
 public:
  using Error::Error;
};

class AssemblyError : public Error {
 public:
  using Error::Error;
};

class SingularPreconditionerError : public Error {
 public:
  using Error::Error;
};

class ComparisonError : public Error {
 public:
  using Error::Error;
};

/// Raised by the Krylov solver when rho or omega collapses.
class BreakdownError : public Error {
 public:
  BreakdownError(const std::string& what, std::size_t iteration)
      : Error(what), iteration_(iteration) {}
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

/// A fault raised inside a kernel body, tagged with the kernel name.
class KernelError : public Error {
 public:
  KernelError(const std::string& kernel, const std::string& what)
      : Error(kernel + ": " + what), kernel_(kernel) {}
  const std::string& kernel() const noexcept { return kernel_; }

 private:
  std::string kernel_;
};

/// Config parse failure with 1-based line number (0 when not line-bound).
class ParseError : public ConfigError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : ConfigError(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace apuflow
