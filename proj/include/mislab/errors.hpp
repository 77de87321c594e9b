#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mislab {

/// Root of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed function or grid: unsorted breakpoints, mismatched endpoints,
/// negative density values, bad normalization.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Bad argument to an otherwise well-formed call (weights, N, scheme binding).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Enumeration requested beyond its cap.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// A ratio integral diverges: nonzero numerator over a zero denominator.
class InfiniteIntegralError : public Error {
 public:
  InfiniteIntegralError(const std::string& what, std::ptrdiff_t cell)
      : Error(what), cell_(cell) {}
  std::ptrdiff_t cell() const noexcept { return cell_; }

 private:
  std::ptrdiff_t cell_;
};

/// A sampled point has u(x) != 0 but a zero weighting denominator.
class InfiniteWeightError : public Error {
 public:
  using Error::Error;
};

/// Experiment config failed validation. `path` names the offending field.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& path, const std::string& message)
      : Error(path.empty() ? message : path + ": " + message), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace mislab
