#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace htlab {

enum class ErrorCode {
  // lp_core
  DimensionMismatch,
  NumericalFailure,
  TooLarge,
  // network_model
  InvalidTopology,
  InvalidParams,
  NotStochastic,
  InfeasibleTraffic,
  NotHeavyTraffic,
  NonUniqueAllocation,
  // workload
  NoCanonicalConstruction,
  InconsistentWorkload,
  GNotNonnegative,
  Assumption25Violated,
  NotInWorkloadSpace,
  // primitives
  InvalidDistribution,
  NoExogenousArrivals,
  // policy
  InfeasibleAllocation,
  BadRanking,
  // simulator
  NegativeQueue,
  InvalidHorizon,
  // scaling
  GridOutOfRange,
  NotMonotone,
  // cost
  HorizonTooShort,
  InvalidCostConfig,
  // ewf_bound
  NotSupported,
  BoundViolated,
  // cli
  ConfigError,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; `code()` identifies the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace htlab
