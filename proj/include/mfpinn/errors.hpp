#pragma once

#include <stdexcept>
#include <string>

namespace mfpinn {

// All library failures surface through one hierarchy so the CLI can emit a
// machine-readable category with each nonzero exit.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& message)
      : std::runtime_error(message), category_(std::move(category)) {}

  const std::string& category() const { return category_; }

 private:
  std::string category_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error("config", m) {}
};
struct DimensionError : Error {
  explicit DimensionError(const std::string& m) : Error("dimension", m) {}
};
struct DomainError : Error {
  explicit DomainError(const std::string& m) : Error("domain", m) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& m) : Error("numeric", m) {}
};
struct SamplingError : Error {
  explicit SamplingError(const std::string& m) : Error("sampling", m) {}
};
struct SolverError : Error {
  explicit SolverError(const std::string& m) : Error("solver", m) {}
};
struct MetricError : Error {
  explicit MetricError(const std::string& m) : Error("metric", m) {}
};
struct IoError : Error {
  explicit IoError(const std::string& m) : Error("io", m) {}
};

}  // namespace mfpinn
