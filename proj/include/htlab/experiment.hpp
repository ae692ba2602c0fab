#pragma once

#include "htlab/config.hpp"
#include "htlab/network.hpp"
#include "htlab/policy.hpp"
#include "htlab/primitives.hpp"
#include "htlab/replicate.hpp"
#include "htlab/workload.hpp"

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace htlab {

inline constexpr const char* kVersion = "0.1.0";

/// Network analysed and relabelled, ready to simulate.
struct Model {
  NetworkSpec spec;  // relabelled activity order
  HeavyTrafficData htd;
  std::optional<WorkloadData> workload;
  std::string workload_error;  // why `workload` is empty
};

Model build_model(const ExperimentConfig& c);

std::unique_ptr<Policy> build_policy(const PolicySpec& spec, const Model& m, const CostConfig& cc);

/// Per-mode seed streams derived from the base seed.
std::uint64_t mode_seed(std::uint64_t base_seed, Mode mode, std::size_t index);

struct RunResult {
  int exit_code = 0;
  std::vector<std::string> artifacts;  // file names written, relative to the output directory
};

/// Runs the configured mode, writing CSV/JSON artifacts and manifest.json
/// into `out_dir`. Returns exit code 3 when the lower bound is violated.
RunResult run_experiment(const ExperimentConfig& c, const std::string& out_dir, std::ostream& log,
                         Execution ex = Execution::Parallel);

}  // namespace htlab
