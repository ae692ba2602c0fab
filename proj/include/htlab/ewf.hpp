#pragma once

#include "htlab/cost.hpp"
#include "htlab/network.hpp"
#include "htlab/replicate.hpp"
#include "htlab/workload.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace htlab {

/// Continuous piecewise-linear function on [0, inf) with f(0) = 0.
/// slopes[k] applies on [knots[k], knots[k+1]); knots[0] = 0.
struct PiecewiseLinear {
  std::vector<double> knots{0.0};
  std::vector<double> slopes{0.0};

  static PiecewiseLinear linear(double slope);
  double operator()(double w) const;
  /// Value at knots[k].
  double value_at_knot(std::size_t k) const;
  bool nondecreasing() const;
  bool convex() const;
  PiecewiseLinear scaled(double c) const;
};

/// One-dimensional workload data.
struct Ewf1D {
  double drift = 0.0;     // Lambda theta
  double variance = 0.0;  // Lambda Sigma Lambda'
  PiecewiseLinear hhat;
  double push_cost = 0.0;
  double gamma = 1.0;
};

void validate(const Ewf1D& e);

/// Builds the one-dimensional data from the network analysis. Throws
/// NotSupported unless L = 1 with Lambda >= 0.
Ewf1D make_ewf_1d(const HeavyTrafficData& htd, const WorkloadData& wd, const CostConfig& cc);

/// Value of the discounted cost under minimal reflection at 0, from the
/// piecewise ODE gamma V = hhat + mu V' + sigma^2 V'' / 2 with V'(0) = -push_cost.
double ewf_value_1d(const Ewf1D& e, double w);

struct RbmPath {
  std::vector<double> t;
  std::vector<double> W;
  std::vector<double> L;
  std::vector<std::uint8_t> touched;  // step ending at k reached 0
};

struct RbmSample {
  double cost = 0.0;
  double holding = 0.0;
  double push = 0.0;
};

/// One reflected Brownian path from w on a grid of step dt up to T. The
/// running minimum within each step is drawn from the Brownian bridge, so
/// grid values of (W, L) have the exact joint law. Returns the discounted
/// cost with the trapezoid rule for the holding term.
RbmSample rbm_simulate(double w, double mu, double sigma2, double gamma, const PiecewiseLinear& hhat, double p,
                       double T, double dt, std::uint64_t seed, RbmPath* path = nullptr);

/// Horizon with e^{-gamma T} < 1e-6 and step 1e-3 sigma^2 / gamma.
double rbm_default_horizon(double gamma);
double rbm_default_step(double sigma2, double gamma);

struct RbmEstimate {
  double mean = 0.0;
  double se = 0.0;
  std::size_t paths = 0;
  double dt = 0.0;
  double mean_half_step = 0.0;  // same paths count at dt / 2
  double se_half_step = 0.0;
  double richardson = 0.0;      // 2 m(dt/2) - m(dt)
};

/// Monte Carlo value at w with the Richardson companion run at dt / 2.
RbmEstimate rbm_monte_carlo(const Ewf1D& e, double w, std::size_t paths, std::uint64_t seed, double dt = 0.0,
                            Execution ex = Execution::Parallel);

struct BoundRow {
  double r = 0.0;
  double mean = 0.0;
  double se = 0.0;
  double gap = 0.0;  // mean - bound
  bool ok = true;    // mean + slack se >= bound
};

struct BoundReport {
  double w = 0.0;
  double bound = 0.0;
  double slack_ses = 3.0;
  std::vector<BoundRow> per_r;
  bool gaps_shrink = false;  // gap at the largest r <= gap at the smallest r
  bool ok = true;
};

struct KeyedEstimate {
  double r = 0.0;
  CostEstimate estimate;
};

/// Compares estimates against the bound without throwing.
BoundReport evaluate_lower_bound(const std::vector<KeyedEstimate>& estimates, double w, double bound,
                                 double slack_ses = 3.0);
/// Same, throwing BoundViolated on a significant violation.
BoundReport verify_lower_bound(const std::vector<KeyedEstimate>& estimates, double w, double bound,
                               double slack_ses = 3.0);

/// JSON {w, bound, per_r: [{r, mean, se, gap}], trend}.
void write_bound_json(const BoundReport& rep, std::ostream& os);

}  // namespace htlab
