#pragma once

#include "htlab/cost.hpp"
#include "htlab/network.hpp"
#include "htlab/policy.hpp"
#include "htlab/primitives.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace htlab {

enum class Mode { Analyze, Simulate, Cost, Bound, Validate };

Mode parse_mode(const std::string& s);
std::string to_string(Mode m);

/// A named policy; `spec.ranking` is 0-based in memory and 1-based in files.
struct NamedPolicy {
  std::string name;
  PolicySpec spec;
};

struct ExperimentConfig {
  std::string name = "experiment";
  Mode mode = Mode::Analyze;
  NetworkSpec network;  // original activity order
  SigmaConvention sigma_convention = SigmaConvention::Classical;
  std::optional<Matrix> lambda;  // nullopt: automatic
  NamedPolicy policy;
  std::vector<NamedPolicy> compare;  // extra policies for cost and bound modes
  std::vector<double> r_list{10.0};
  std::size_t replications = 100;
  CostConfig cost;
  std::uint64_t base_seed = 1;
  std::string output_dir = "out";
  // simulate
  double sim_horizon = 1.0;
  int grid_points = 1000;
  // bound
  double slack_ses = 3.0;
  std::size_t rbm_paths = 10000;
  std::size_t seed_blocks = 1;
};

/// Parses a config document. Throws ConfigError naming the offending key.
ExperimentConfig parse_config(const nlohmann::json& doc);
/// Reads a file, applies environment overrides and parses it.
ExperimentConfig load_config(const std::string& path, bool apply_env = true);

/// Canonical document for a config; parse_config(to_json(c)) reproduces c.
nlohmann::json to_json(const ExperimentConfig& c);

/// Applies overrides of the form PREFIX + "COST__GAMMA" = "2" to the document:
/// path segments are separated by a double underscore and matched
/// case-insensitively against existing keys (new keys are lower-cased). Values
/// are parsed as JSON when possible and kept as strings otherwise.
void apply_overrides(nlohmann::json& doc, const std::vector<std::pair<std::string, std::string>>& env,
                     const std::string& prefix = "HTLAB_");
/// The HTLAB_ variables of the current process.
std::vector<std::pair<std::string, std::string>> environment_overrides(const std::string& prefix = "HTLAB_");

/// 64-bit FNV-1a of a byte string, as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace htlab
