#pragma once

#include <stdexcept>
#include <string>

namespace infoevo {

/// Base class for every error raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BudgetExhausted : Error {
  BudgetExhausted() : Error("evaluation budget exhausted") {}
};

struct EmptyLedger : Error {
  EmptyLedger() : Error("ledger is empty") {}
};

struct LedgerTooSmall : Error {
  explicit LedgerTooSmall(const std::string& what) : Error(what) {}
};

struct LengthMismatch : Error {
  LengthMismatch(std::size_t expected, std::size_t got)
      : Error("length mismatch: expected " + std::to_string(expected) + ", got " +
              std::to_string(got)) {}
};

struct AllZeroWeights : Error {
  AllZeroWeights() : Error("all weights are zero") {}
};

struct NegativeWeight : Error {
  explicit NegativeWeight(std::size_t index)
      : Error("weight " + std::to_string(index) + " is negative or not finite") {}
};

struct ZeroTangent : Error {
  ZeroTangent() : Error("tangent vector has zero norm") {}
};

struct GoalOutsideChart : Error {
  GoalOutsideChart() : Error("coordinates lie outside the chart radius") {}
};

struct NoPath : Error {
  NoPath() : Error("no path between start and goal") {}
};

struct GammaExceedsRay : Error {
  GammaExceedsRay(double gamma, double length)
      : Error("step " + std::to_string(gamma) + " exceeds ray length " + std::to_string(length)) {}
};

struct DegenerateLine : Error {
  DegenerateLine() : Error("base and target distributions coincide") {}
};

struct NonFiniteOutput : Error {
  NonFiniteOutput() : Error("program produced a non-finite output") {}
};

struct BadLength : Error {
  explicit BadLength(const std::string& what) : Error(what) {}
};

struct DomainMismatch : Error {
  explicit DomainMismatch(const std::string& what) : Error(what) {}
};

/// Invalid user-supplied configuration; `field` names the offending entry.
struct ConfigError : Error {
  ConfigError(std::string field_name, const std::string& what)
      : Error(field_name + ": " + what), field(std::move(field_name)) {}
  std::string field;
};

}  // namespace infoevo
