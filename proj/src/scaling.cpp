#include "htlab/scaling.hpp"

#include "htlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace htlab {

namespace {

constexpr double kMonotoneTol = 1e-9;

double max_abs(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

}  // namespace

ScalingContext make_scaling_context(const HeavyTrafficData& htd, const WorkloadData* wd) {
  ScalingContext c;
  c.x_star = htd.x_star;
  c.R = htd.R;
  c.K = htd.K;
  c.net = htd.net_routing();
  c.theta1 = htd.params.theta1;
  c.theta2 = htd.params.theta2;
  c.num_basic = htd.num_basic;
  if (wd != nullptr) {
    c.Lambda = wd->Lambda;
    c.G = wd->G;
  }
  return c;
}

ScaledTrajectory::ScaledTrajectory(const Trajectory& traj, ScalingContext ctx, std::vector<double> grid)
    : traj_(&traj), ctx_(std::move(ctx)), grid_(std::move(grid)) {
  const double tol = 1e-12 * std::max(1.0, traj.horizon_scaled);
  for (double t : grid_) {
    if (!(t >= -tol && t <= traj.horizon_scaled + tol)) {
      fail(ErrorCode::GridOutOfRange, "grid point " + std::to_string(t) + " outside [0, " +
                                          std::to_string(traj.horizon_scaled) + "]");
    }
  }
  points_.reserve(grid_.size());
  for (double t : grid_) points_.push_back(at(t));
}

Vector ScaledTrajectory::q_hat0() const {
  Vector q(static_cast<Eigen::Index>(traj_->q_initial.size()));
  for (std::size_t i = 0; i < traj_->q_initial.size(); ++i) {
    q[static_cast<Eigen::Index>(i)] = static_cast<double>(traj_->q_initial[i]) / traj_->r;
  }
  return q;
}

ScaledPoint ScaledTrajectory::at(double t) const {
  const Trajectory& tr = *traj_;
  const NetworkTopology& top = tr.topology;
  const int I = top.num_buffers;
  const int J = top.num_activities;
  const int Ks = top.num_servers;
  const double r = tr.r;
  const double r2 = r * r;
  t = std::clamp(t, 0.0, tr.horizon_scaled);
  const double s = r2 * t;
  const EventRecord& rec = tr.records[tr.record_at(s)];
  const double ds = std::max(0.0, s - rec.time);

  ScaledPoint p;
  p.t = t;
  Vector Q(I), E(I), T(J), S(J), Icum(Ks);
  Matrix Phi(I, J);
  for (int i = 0; i < I; ++i) {
    Q[i] = static_cast<double>(rec.queue[static_cast<std::size_t>(i)]);
    E[i] = static_cast<double>(rec.arrivals[static_cast<std::size_t>(i)]);
    for (int j = 0; j < J; ++j) {
      Phi(i, j) = static_cast<double>(rec.routed[static_cast<std::size_t>(i * J + j)]);
    }
  }
  for (int k = 0; k < Ks; ++k) Icum[k] = rec.idle_time[static_cast<std::size_t>(k)] + ds;
  for (int j = 0; j < J; ++j) {
    const bool on = rec.allocation[static_cast<std::size_t>(j)] != 0;
    T[j] = rec.busy_time[static_cast<std::size_t>(j)] + (on ? ds : 0.0);
    if (on) Icum[top.server_of(j)] -= ds;
    S[j] = static_cast<double>(rec.completions[static_cast<std::size_t>(j)]);
  }

  p.Q_bar = Q / r2;
  p.I_bar = Icum / r2;
  p.T_bar = T / r2;
  p.E_bar = E / r2;
  p.S_bar = S / r2;
  p.Phi_bar = Phi / r2;

  Vector alpha(I), beta(J);
  for (int i = 0; i < I; ++i) alpha[i] = tr.arrival_rate[static_cast<std::size_t>(i)];
  for (int j = 0; j < J; ++j) beta[j] = tr.service_rate[static_cast<std::size_t>(j)];

  p.E_hat = (E - alpha * s) / r;
  p.S_hat = (S - beta.cwiseProduct(T)) / r;
  p.Phi_hat = (Phi - top.P * S.asDiagonal()) / r;
  p.Q_hat = Q / r;
  p.Y_hat = (ctx_.x_star * s - T) / r;
  const int B = ctx_.num_basic;
  p.U_hat.resize(Ks + J - B);
  p.U_hat.head(Ks) = Icum / r;
  p.U_hat.tail(J - B) = T.tail(J - B) / r;
  p.X_hat = p.E_hat - ctx_.net * p.S_hat + p.Phi_hat.rowwise().sum();
  p.drift = ctx_.theta1 * t - ctx_.net * ctx_.theta2.cwiseProduct(p.T_bar);
  if (ctx_.Lambda) p.W_hat = *ctx_.Lambda * p.Q_hat;
  return p;
}

double ScaledTrajectory::identity_queue_residual() const {
  const Vector q0 = q_hat0();
  double worst = 0.0;
  for (const auto& p : points_) {
    worst = std::max(worst, max_abs(p.Q_hat - (q0 + p.X_hat + p.drift + ctx_.R * p.Y_hat)));
  }
  return worst;
}

double ScaledTrajectory::identity_control_residual() const {
  double worst = 0.0;
  for (const auto& p : points_) worst = std::max(worst, max_abs(p.U_hat - ctx_.K * p.Y_hat));
  return worst;
}

double ScaledTrajectory::identity_workload_residual() const {
  if (!ctx_.Lambda || !ctx_.G) fail(ErrorCode::InvalidParams, "workload identity needs Lambda and G");
  const Matrix& L = *ctx_.Lambda;
  const Vector q0 = q_hat0();
  double worst = 0.0;
  for (const auto& p : points_) {
    const Vector rhs = L * q0 + L * p.X_hat + L * p.drift + *ctx_.G * p.U_hat;
    worst = std::max(worst, max_abs(p.W_hat - rhs));
  }
  return worst;
}

std::vector<double> default_grid(const Trajectory& traj, int uniform_points) {
  std::vector<double> g;
  const double H = traj.horizon_scaled;
  const double r2 = traj.r * traj.r;
  g.reserve(traj.records.size() + static_cast<std::size_t>(uniform_points));
  for (const auto& rec : traj.records) g.push_back(std::min(H, rec.time / r2));
  if (uniform_points >= 2) {
    for (int k = 0; k < uniform_points; ++k) g.push_back(H * k / (uniform_points - 1));
  }
  g.push_back(H);
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

ScaledTrajectory scale(const Trajectory& traj, const ScalingContext& ctx, std::vector<double> grid) {
  if (grid.empty()) grid = default_grid(traj);
  return ScaledTrajectory(traj, ctx, std::move(grid));
}

Vector event_counts(const Trajectory& traj, double t) {
  const int I = traj.num_buffers();
  const int J = traj.num_activities();
  const EventRecord& rec = traj.records[traj.record_at(traj.r * traj.r * t)];
  Vector v(I + J);
  for (int i = 0; i < I; ++i) v[i] = static_cast<double>(rec.arrivals[static_cast<std::size_t>(i)] + 1);
  for (int j = 0; j < J; ++j) v[I + j] = static_cast<double>(rec.completions[static_cast<std::size_t>(j)] + 1);
  return v;
}

double sup_fluid_queue(const Trajectory& traj, double t_max) {
  const double r2 = traj.r * traj.r;
  const double s_max = r2 * t_max;
  double worst = 0.0;
  for (const auto& rec : traj.records) {
    if (rec.time > s_max) break;
    double sq = 0.0;
    for (auto q : rec.queue) sq += static_cast<double>(q) * static_cast<double>(q);
    worst = std::max(worst, std::sqrt(sq) / r2);
  }
  return worst;
}

TimeTransform TimeTransform::from_knots(std::vector<double> times, const std::vector<Vector>& controls) {
  if (times.empty() || times.size() != controls.size()) {
    fail(ErrorCode::DimensionMismatch, "time transform needs one control value per knot");
  }
  TimeTransform tt;
  tt.times_ = std::move(times);
  tt.controls_ = controls;
  tt.taus_.resize(tt.times_.size());
  for (std::size_t k = 0; k < tt.times_.size(); ++k) {
    if (k > 0) {
      if (!(tt.times_[k] > tt.times_[k - 1])) fail(ErrorCode::NotMonotone, "knot times must increase");
      const Vector d = controls[k] - controls[k - 1];
      if (d.size() > 0 && d.minCoeff() < -kMonotoneTol) {
        fail(ErrorCode::NotMonotone, "control decreases between t = " + std::to_string(tt.times_[k - 1]) +
                                         " and " + std::to_string(tt.times_[k]));
      }
    }
    tt.taus_[k] = tt.times_[k] + controls[k].sum();
  }
  return tt;
}

double TimeTransform::tau(double t) const {
  if (t <= times_.front()) return taus_.front() + (t - times_.front());
  if (t >= times_.back()) return taus_.back() + (t - times_.back());
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - times_.begin()) - 1;
  const double w = (t - times_[k]) / (times_[k + 1] - times_[k]);
  return taus_[k] + w * (taus_[k + 1] - taus_[k]);
}

double TimeTransform::tau_inv(double y) const {
  if (y <= taus_.front()) return times_.front() + (y - taus_.front());
  if (y >= taus_.back()) return times_.back() + (y - taus_.back());
  const auto it = std::upper_bound(taus_.begin(), taus_.end(), y);
  const std::size_t k = static_cast<std::size_t>(it - taus_.begin()) - 1;
  const double w = (y - taus_[k]) / (taus_[k + 1] - taus_[k]);
  return times_[k] + w * (times_[k + 1] - times_[k]);
}

Vector TimeTransform::control_transformed(double y) const {
  const double t = tau_inv(y);
  if (t <= times_.front()) return controls_.front();
  if (t >= times_.back()) return controls_.back();
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - times_.begin()) - 1;
  const double w = (t - times_[k]) / (times_[k + 1] - times_[k]);
  return controls_[k] + w * (controls_[k + 1] - controls_[k]);
}

TimeTransform time_transform(const ScaledTrajectory& st) {
  const Trajectory& tr = st.trajectory();
  const double r2 = tr.r * tr.r;
  const double H = tr.horizon_scaled;
  std::vector<double> times;
  times.reserve(tr.records.size() + 1);
  for (const auto& rec : tr.records) {
    const double t = rec.time / r2;
    if (t < H && (times.empty() || t > times.back())) times.push_back(t);
  }
  if (times.empty() || H > times.back()) times.push_back(H);
  std::vector<Vector> controls;
  controls.reserve(times.size());
  for (double t : times) controls.push_back(st.at(t).U_hat);
  return TimeTransform::from_knots(std::move(times), controls);
}

TransformedPoint transformed_at(const ScaledTrajectory& st, const TimeTransform& tt, double y) {
  TransformedPoint p;
  p.y = y;
  p.t = tt.tau_inv(y);
  const ScaledPoint sp = st.at(p.t);
  p.W = sp.W_hat;
  p.X = sp.X_hat;
  p.U = sp.U_hat;
  return p;
}

TransformCheck check_time_transform(const TimeTransform& tt) {
  TransformCheck c;
  const auto& ts = tt.knot_times();
  const auto& ys = tt.knot_taus();
  for (std::size_t k = 0; k < ts.size(); ++k) {
    c.max_roundtrip_error = std::max(c.max_roundtrip_error, std::abs(tt.tau_inv(tt.tau(ts[k])) - ts[k]));
    if (k == 0) continue;
    const double dy = ys[k] - ys[k - 1];
    if (!(dy > 0.0)) c.strictly_increasing = false;
    const double dt = tt.tau_inv(ys[k]) - tt.tau_inv(ys[k - 1]);
    c.max_lipschitz_excess = std::max(c.max_lipschitz_excess, dt - dy);
    const Vector du = tt.control_transformed(ys[k]) - tt.control_transformed(ys[k - 1]);
    if (du.size() > 0) c.max_lipschitz_excess = std::max(c.max_lipschitz_excess, du.cwiseAbs().maxCoeff() - dy);
  }
  return c;
}

namespace {

struct SeriesAccumulator {
  std::int64_t n = 0;
  double sum = 0.0;
  double sum_sq = 0.0;

  void add(double x) {
    ++n;
    sum += x;
    sum_sq += x * x;
  }

  MartingaleSeries finish(std::string name, double predicted) const {
    MartingaleSeries s;
    s.name = std::move(name);
    s.steps = n;
    s.final_value = sum;
    s.quadratic_variation = sum_sq;
    s.predicted_qv = predicted;
    if (n > 0) s.mean_increment = sum / static_cast<double>(n);
    if (n > 1) {
      const double var = (sum_sq - sum * sum / static_cast<double>(n)) / static_cast<double>(n - 1);
      s.se_increment = std::sqrt(std::max(0.0, var) / static_cast<double>(n));
    }
    return s;
  }
};

}  // namespace

MartingaleReport martingale_diagnostics(const PrimitiveStreams& streams, const std::vector<std::int64_t>& arrivals,
                                        const std::vector<std::int64_t>& services) {
  const double r = streams.r();
  const double r2 = r * r;
  MartingaleReport rep;
  for (int i = 0; i < streams.num_exogenous(); ++i) {
    const std::int64_t m = i < static_cast<int>(arrivals.size()) ? arrivals[static_cast<std::size_t>(i)] : 0;
    const double a = streams.arrival_rate(i);
    SeriesAccumulator acc;
    for (std::int64_t n = 1; n <= m; ++n) acc.add((1.0 - a * streams.interarrival(i, n)) / r);
    const double as = a * streams.arrival_sd(i);
    rep.arrival.push_back(acc.finish("xi_" + std::to_string(i + 1), static_cast<double>(m) * as * as / r2));
  }
  const int I = streams.num_buffers();
  const int J = streams.num_activities();
  std::vector<SeriesAccumulator> routed(static_cast<std::size_t>(I));
  std::vector<double> routed_pred(static_cast<std::size_t>(I), 0.0);
  for (int j = 0; j < J; ++j) {
    const std::int64_t m = j < static_cast<int>(services.size()) ? services[static_cast<std::size_t>(j)] : 0;
    const double b = streams.service_rate(j);
    SeriesAccumulator acc;
    for (std::int64_t n = 1; n <= m; ++n) {
      acc.add((1.0 - b * streams.service(j, n)) / r);
      const RoutingDraw d = streams.routing(j, n);
      for (int i = 0; i < I; ++i) {
        const double phi = d.buffer == i ? 1.0 : 0.0;
        routed[static_cast<std::size_t>(i)].add((phi - streams.routing_probability(i, j)) / r);
      }
    }
    const double bs = b * streams.service_sd(j);
    rep.service.push_back(acc.finish("eta_" + std::to_string(j + 1), static_cast<double>(m) * bs * bs / r2));
    for (int i = 0; i < I; ++i) {
      const double p = streams.routing_probability(i, j);
      routed_pred[static_cast<std::size_t>(i)] += static_cast<double>(m) * p * (1.0 - p) / r2;
    }
  }
  for (int i = 0; i < I; ++i) {
    rep.routing.push_back(
        routed[static_cast<std::size_t>(i)].finish("zeta_" + std::to_string(i + 1), routed_pred[static_cast<std::size_t>(i)]));
  }
  return rep;
}

void write_scaled_csv(const ScaledTrajectory& st, std::ostream& os) {
  if (st.points().empty()) return;
  const ScaledPoint& first = st.points().front();
  os << "t";
  auto header = [&](const char* name, Eigen::Index n) {
    for (Eigen::Index k = 0; k < n; ++k) os << ',' << name << '_' << k + 1;
  };
  header("Q_hat", first.Q_hat.size());
  header("W_hat", first.W_hat.size());
  header("X_hat", first.X_hat.size());
  header("Y_hat", first.Y_hat.size());
  header("U_hat", first.U_hat.size());
  header("E_hat", first.E_hat.size());
  header("S_hat", first.S_hat.size());
  os << '\n';
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << ',' << buf;
  };
  for (const auto& p : st.points()) {
    std::snprintf(buf, sizeof buf, "%.17g", p.t);
    os << buf;
    for (const Vector* v : {&p.Q_hat, &p.W_hat, &p.X_hat, &p.Y_hat, &p.U_hat, &p.E_hat, &p.S_hat}) {
      for (Eigen::Index k = 0; k < v->size(); ++k) put((*v)[k]);
    }
    os << '\n';
  }
}

}  // namespace htlab
