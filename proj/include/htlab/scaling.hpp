#pragma once

#include "htlab/network.hpp"
#include "htlab/primitives.hpp"
#include "htlab/simulator.hpp"
#include "htlab/workload.hpp"

#include <iosfwd>
#include <optional>
#include <vector>

namespace htlab {

/// Structural data needed to centre and combine scaled processes.
struct ScalingContext {
  Vector x_star;  // J
  Matrix R;       // I x J
  Matrix K;       // (K + J - B) x J
  Matrix net;     // C - P'
  Vector theta1;  // I
  Vector theta2;  // J
  int num_basic = 0;
  std::optional<Matrix> Lambda;  // L x I
  std::optional<Matrix> G;       // L x (K + J - B)
};

ScalingContext make_scaling_context(const HeavyTrafficData& htd, const WorkloadData* wd = nullptr);

/// Every fluid and diffusion process at one scaled time t (unscaled s = r^2 t).
struct ScaledPoint {
  double t = 0.0;
  // fluid, divided by r^2
  Vector Q_bar, I_bar, T_bar, E_bar, S_bar;
  Matrix Phi_bar;  // I x J
  // diffusion, divided by r
  Vector E_hat;     // (E - alpha^r s) / r
  Vector S_hat;     // (S(T) - beta^r T) / r, i.e. S_hat composed with T_bar
  Matrix Phi_hat;   // (Phi^j - p^j S_j) / r, composed with S_bar and T_bar
  Vector Q_hat;
  Vector Y_hat;     // (x* s - T) / r
  Vector U_hat;     // idleness and nonbasic allocations over r
  Vector X_hat;     // free process
  Vector W_hat;     // Lambda Q_hat, empty without Lambda
  Vector drift;     // theta1 t - (C - P') diag(theta2) T_bar
};

/// Scaled view of a trajectory. Processes are evaluated exactly from the
/// piecewise structure of the event log.
class ScaledTrajectory {
 public:
  ScaledTrajectory(const Trajectory& traj, ScalingContext ctx, std::vector<double> grid);

  double r() const { return traj_->r; }
  double horizon() const { return traj_->horizon_scaled; }
  const Trajectory& trajectory() const { return *traj_; }
  const ScalingContext& context() const { return ctx_; }
  const std::vector<double>& grid() const { return grid_; }
  const std::vector<ScaledPoint>& points() const { return points_; }
  /// Initial condition q^r / r.
  Vector q_hat0() const;

  /// Evaluates every process at scaled time t in [0, horizon].
  ScaledPoint at(double t) const;

  /// max |Q_hat - (q_hat + X_hat + drift + R Y_hat)| over the grid.
  double identity_queue_residual() const;
  /// max |U_hat - K Y_hat| over the grid.
  double identity_control_residual() const;
  /// max |W_hat - (Lambda q_hat + Lambda X_hat + Lambda drift + G U_hat)| over the grid.
  double identity_workload_residual() const;

 private:
  const Trajectory* traj_;
  ScalingContext ctx_;
  std::vector<double> grid_;
  std::vector<ScaledPoint> points_;
};

/// Scaled event times merged with a uniform grid of `uniform_points` points on [0, H].
std::vector<double> default_grid(const Trajectory& traj, int uniform_points = 1000);

/// Scales a trajectory on `grid` (default_grid when empty). Throws
/// GridOutOfRange for points outside [0, H].
ScaledTrajectory scale(const Trajectory& traj, const ScalingContext& ctx, std::vector<double> grid = {});

/// (E_i + 1, S_j + 1) at scaled time t.
Vector event_counts(const Trajectory& traj, double t);

/// sup over scaled t <= t_max of |Q_bar(t)| (Euclidean).
double sup_fluid_queue(const Trajectory& traj, double t_max);

/// tau(t) = t + sum_m U_hat_m(t) as a piecewise-linear map with its exact inverse.
class TimeTransform {
 public:
  /// Builds tau from U sampled at knots where U is linear in between.
  static TimeTransform from_knots(std::vector<double> times, const std::vector<Vector>& controls);

  double tau(double t) const;
  double tau_inv(double y) const;
  double horizon() const { return times_.back(); }
  double transformed_horizon() const { return taus_.back(); }
  const std::vector<double>& knot_times() const { return times_; }
  const std::vector<double>& knot_taus() const { return taus_; }
  /// U at knot k.
  const Vector& control_at_knot(std::size_t k) const { return controls_[k]; }
  /// U composed with tau_inv.
  Vector control_transformed(double y) const;

 private:
  std::vector<double> times_;
  std::vector<double> taus_;
  std::vector<Vector> controls_;
};

/// Time transformation of a scaled trajectory, with knots at every event
/// time. Throws NotMonotone if U_hat decreases by more than 1e-9.
TimeTransform time_transform(const ScaledTrajectory& st);

struct TransformedPoint {
  double y = 0.0;
  double t = 0.0;  // tau_inv(y)
  Vector W, X, U;
};

/// W, X and U on the transformed clock.
TransformedPoint transformed_at(const ScaledTrajectory& st, const TimeTransform& tt, double y);

/// Checks at every knot: |tau_inv(tau(t)) - t|, and the worst excess of
/// tau_inv and U composed with tau_inv increments over transformed-time increments.
struct TransformCheck {
  double max_roundtrip_error = 0.0;
  double max_lipschitz_excess = 0.0;  // <= 0 means both maps are 1-Lipschitz
  bool strictly_increasing = true;
};

TransformCheck check_time_transform(const TimeTransform& tt);

struct MartingaleSeries {
  std::string name;
  std::int64_t steps = 0;
  double mean_increment = 0.0;
  double se_increment = 0.0;
  double final_value = 0.0;
  double quadratic_variation = 0.0;
  double predicted_qv = 0.0;
};

struct MartingaleReport {
  std::vector<MartingaleSeries> arrival;  // xi per exogenous buffer
  std::vector<MartingaleSeries> service;  // eta per activity
  std::vector<MartingaleSeries> routing;  // zeta per buffer, summed over activities
};

/// Centred sums of the first `arrivals[i]` interarrival, `services[j]`
/// service and routing variates, with their empirical quadratic variations
/// and predicted values.
MartingaleReport martingale_diagnostics(const PrimitiveStreams& streams, const std::vector<std::int64_t>& arrivals,
                                        const std::vector<std::int64_t>& services);

/// Columns t, then Q_hat, W_hat, X_hat, Y_hat, U_hat, E_hat, S_hat components.
void write_scaled_csv(const ScaledTrajectory& st, std::ostream& os);

}  // namespace htlab
