#pragma once

#include "htlab/network.hpp"
#include "htlab/policy.hpp"
#include "htlab/primitives.hpp"
#include "htlab/replicate.hpp"
#include "htlab/scaling.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace htlab {

struct CostConfig {
  double gamma = 1.0;
  Vector h;                     // I, > 0
  Vector p;                     // K + J - B, >= 0; empty means zero
  double horizon_scaled = 16.0;
  double tail_tol = -1.0;       // <= 0 selects 1e-4 times the cost
};

void validate(const CostConfig& cc, int num_buffers, int control_dim);

/// Discounted cost of one path split into its two terms.
struct PathCost {
  double holding = 0.0;
  double idleness = 0.0;
  double truncation_bound = 0.0;
  double total() const { return holding + idleness; }
};

/// Exact integration of piecewise-constant holding rates and
/// piecewise-linear control against e^{-gamma t}, plus a tail bound from a
/// linear envelope fitted to the path.
class DiscountedCostAccumulator {
 public:
  explicit DiscountedCostAccumulator(double gamma);

  /// Adds [t1, t2) on which h·Q_hat equals `holding_rate` and p·U_hat grows
  /// at `control_slope` per unit time.
  void segment(double t1, double t2, double holding_rate, double control_slope);
  /// Closes the path at horizon H.
  PathCost finish(double horizon);

 private:
  struct Hull {
    std::vector<double> t, f;
    void add(double x, double y);
    double max_minus_slope(double b) const;
  };

  double gamma_;
  double holding_ = 0.0;
  double idleness_ = 0.0;
  double control_ = 0.0;  // p·U_hat at the current time
  double f0_ = 0.0;       // integral of h·Q_hat
  double f1_ = 0.0;       // integral of t h·Q_hat
  Hull holding_hull_;
  Hull control_hull_;
};

/// Cost of a scaled trajectory over [0, horizon].
PathCost pathwise_cost(const ScaledTrajectory& st, const CostConfig& cc);
/// Same, enforcing the truncation bound: throws HorizonTooShort if it
/// exceeds the tail tolerance.
PathCost pathwise_cost_checked(const ScaledTrajectory& st, const CostConfig& cc);

/// Observer that accumulates the cost while a simulation runs.
class CostObserver final : public SimObserver {
 public:
  CostObserver(const NetworkTopology& t, int num_basic, double r, const CostConfig& cc);
  void on_epoch(const SimState& s, std::span<const EventTag> fired) override;
  void on_finish(const SimState& s, double horizon, bool deadlocked) override;
  const PathCost& result() const { return result_; }

 private:
  void close_segment(double s_end);

  const NetworkTopology* topo_;
  int num_basic_;
  double r_;
  double r2_;
  Vector h_;
  Vector p_;
  DiscountedCostAccumulator acc_;
  double last_time_ = 0.0;  // unscaled
  double holding_rate_ = 0.0;
  double control_slope_ = 0.0;
  PathCost result_;
};

struct CostEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t replications = 0;
  double truncation_bound = 0.0;  // mean over replications
  double holding_term = 0.0;
  double idleness_term = 0.0;
};

/// Replication seed k of a run: independent of everything else.
std::uint64_t replication_seed(std::uint64_t base_seed, std::size_t k);

/// Discounted cost of one replication, streamed without storing the path.
PathCost replication_cost(const NetworkSpec& spec, const HeavyTrafficData& htd, const Policy& policy, double r,
                          const CostConfig& cc, std::uint64_t seed);

/// Monte Carlo estimate of the discounted cost at scale r. `spec` must be in
/// the activity order of `htd`. Throws HorizonTooShort when the mean
/// truncation bound exceeds the tail tolerance.
CostEstimate monte_carlo_cost(const NetworkSpec& spec, const HeavyTrafficData& htd, const Policy& policy, double r,
                              const CostConfig& cc, std::size_t reps, std::uint64_t base_seed,
                              Execution ex = Execution::Parallel);

struct CostRow {
  double r = 0.0;
  std::string policy;
  CostEstimate estimate;
};

/// Columns r, policy, reps, mean, se, holding_term, idleness_term, truncation_bound.
void write_cost_csv(const std::vector<CostRow>& rows, std::ostream& os);

}  // namespace htlab
