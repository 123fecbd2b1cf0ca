#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace sddectl {

/// Hard cap on state/input/noise dimensions. Keeps all small-vector algebra
/// on the stack; raising it only costs stack space.
inline constexpr int kMaxDim = 16;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

/// Read-only view of one stored history sample.
using SampleRef = Eigen::Map<const Eigen::VectorXd>;

/// Base error carrying a stable machine-readable category string. The
/// categories double as CLI error codes and per-path failure labels in
/// Monte Carlo reports.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& message)
      : std::runtime_error(message), category_(std::move(category)) {}

  const std::string& category() const noexcept { return category_; }

 private:
  std::string category_;
};

/// Invalid configuration (bad grid ratio, unknown registry name, ...).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("config", message) {}
};

/// Dimension mismatch or non-finite input where finite data is required.
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& message) : Error("domain", message) {}
};

/// Argument outside its admissible interval (e.g. lookup outside the window).
class RangeError : public Error {
 public:
  explicit RangeError(const std::string& message) : Error("range", message) {}
};

/// Non-finite intermediate or result of a numeric computation.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& message) : Error("numeric", message) {}
};

/// Barrier evaluated outside the safe set (h <= 0).
class SafeSetViolationError : public Error {
 public:
  explicit SafeSetViolationError(const std::string& message)
      : Error("safe_set", message) {}
};

/// Sliding-mode transversality condition violated (||G||^2 below tolerance).
class TransversalityError : public Error {
 public:
  explicit TransversalityError(const std::string& message)
      : Error("transversality", message) {}
};

/// A sampling procedure (e.g. boundary projection) failed to produce a point.
class SamplingError : public Error {
 public:
  explicit SamplingError(const std::string& message) : Error("sampling", message) {}
};

}  // namespace sddectl
