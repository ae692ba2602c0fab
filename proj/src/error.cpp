#include "htlab/error.hpp"

namespace htlab {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::InvalidTopology: return "InvalidTopology";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::NotStochastic: return "NotStochastic";
    case ErrorCode::InfeasibleTraffic: return "InfeasibleTraffic";
    case ErrorCode::NotHeavyTraffic: return "NotHeavyTraffic";
    case ErrorCode::NonUniqueAllocation: return "NonUniqueAllocation";
    case ErrorCode::NoCanonicalConstruction: return "NoCanonicalConstruction";
    case ErrorCode::InconsistentWorkload: return "InconsistentWorkload";
    case ErrorCode::GNotNonnegative: return "GNotNonnegative";
    case ErrorCode::Assumption25Violated: return "Assumption25Violated";
    case ErrorCode::NotInWorkloadSpace: return "NotInWorkloadSpace";
    case ErrorCode::InvalidDistribution: return "InvalidDistribution";
    case ErrorCode::NoExogenousArrivals: return "NoExogenousArrivals";
    case ErrorCode::InfeasibleAllocation: return "InfeasibleAllocation";
    case ErrorCode::BadRanking: return "BadRanking";
    case ErrorCode::NegativeQueue: return "NegativeQueue";
    case ErrorCode::InvalidHorizon: return "InvalidHorizon";
    case ErrorCode::GridOutOfRange: return "GridOutOfRange";
    case ErrorCode::NotMonotone: return "NotMonotone";
    case ErrorCode::HorizonTooShort: return "HorizonTooShort";
    case ErrorCode::InvalidCostConfig: return "InvalidCostConfig";
    case ErrorCode::NotSupported: return "NotSupported";
    case ErrorCode::BoundViolated: return "BoundViolated";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace htlab
