#pragma once

#include <stdexcept>
#include <string>

namespace csfem {

/// Base class for every error thrown by the library.  The CLI maps the
/// concrete subclasses onto process exit codes, so new error kinds should
/// derive from one of the categories below rather than from Error directly.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Bad user input: malformed config files, invalid parameter combinations,
/// unreadable mesh descriptions.  CLI exit code 1.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// An iteration failed to reach its tolerance (Picard, continuation,
/// inverse iteration).  CLI exit code 2.
class ConvergenceError : public Error {
public:
  using Error::Error;
};

/// A structural precondition or a documented invariant was violated:
/// inconsistent mesh connectivity, non-positive data where positive data is
/// required, singular systems that must not be singular.  CLI exit code 3.
class InvariantError : public Error {
public:
  using Error::Error;
};

/// Filesystem trouble: missing files, unwritable output directories,
/// short reads.  CLI exit code 4.
class IoError : public Error {
public:
  using Error::Error;
};

} // namespace csfem
