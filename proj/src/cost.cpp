#include "htlab/cost.hpp"

#include "htlab/error.hpp"
#include "htlab/rng.hpp"
#include "htlab/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace htlab {

namespace {

constexpr std::uint64_t kReplicationTag = 0x7265706cULL;

double default_tail_tol(double cost) { return 1e-4 * std::max(std::abs(cost), 1e-12); }

double tail_tol(const CostConfig& cc, double cost) { return cc.tail_tol > 0.0 ? cc.tail_tol : default_tail_tol(cost); }

// Slope of p·U_hat in scaled time under allocation a: r times the idle
// indicators and the nonbasic activity levels.
double control_slope(const NetworkTopology& t, int num_basic, const Vector& p, const Allocation& a, double r) {
  if (p.size() == 0) return 0.0;
  double slope = 0.0;
  const int K = t.num_servers;
  std::vector<std::uint8_t> busy(static_cast<std::size_t>(K), 0);
  for (int j = 0; j < t.num_activities; ++j) {
    if (a[static_cast<std::size_t>(j)] != 0) busy[static_cast<std::size_t>(t.server_of(j))] = 1;
  }
  for (int k = 0; k < K; ++k) {
    if (busy[static_cast<std::size_t>(k)] == 0) slope += p[k];
  }
  for (int j = num_basic; j < t.num_activities; ++j) {
    if (a[static_cast<std::size_t>(j)] != 0) slope += p[K + j - num_basic];
  }
  return r * slope;
}

}  // namespace

void validate(const CostConfig& cc, int num_buffers, int control_dim) {
  if (!(cc.gamma > 0.0) || !std::isfinite(cc.gamma)) fail(ErrorCode::InvalidCostConfig, "gamma must be > 0");
  if (cc.h.size() != num_buffers) fail(ErrorCode::InvalidCostConfig, "h needs one entry per buffer");
  if (!(cc.h.array() > 0.0).all()) fail(ErrorCode::InvalidCostConfig, "h must be strictly positive");
  if (cc.p.size() != 0) {
    if (cc.p.size() != control_dim) fail(ErrorCode::InvalidCostConfig, "p needs K + J - B entries");
    if (!(cc.p.array() >= 0.0).all()) fail(ErrorCode::InvalidCostConfig, "p must be >= 0");
  }
  if (!(cc.horizon_scaled > 0.0) || !std::isfinite(cc.horizon_scaled)) {
    fail(ErrorCode::InvalidCostConfig, "horizon must be finite and > 0");
  }
}

void DiscountedCostAccumulator::Hull::add(double x, double y) {
  // Upper hull of points with increasing x.
  while (t.size() >= 2) {
    const std::size_t n = t.size();
    const double cross = (t[n - 1] - t[n - 2]) * (y - f[n - 2]) - (f[n - 1] - f[n - 2]) * (x - t[n - 2]);
    if (cross < 0.0) break;
    t.pop_back();
    f.pop_back();
  }
  if (!t.empty() && x == t.back()) {
    if (y <= f.back()) return;
    t.pop_back();
    f.pop_back();
  }
  t.push_back(x);
  f.push_back(y);
}

double DiscountedCostAccumulator::Hull::max_minus_slope(double b) const {
  double best = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) best = std::max(best, f[k] - b * t[k]);
  return best;
}

DiscountedCostAccumulator::DiscountedCostAccumulator(double gamma) : gamma_(gamma) {
  if (!(gamma > 0.0)) fail(ErrorCode::InvalidCostConfig, "gamma must be > 0");
  control_hull_.add(0.0, 0.0);
}

void DiscountedCostAccumulator::segment(double t1, double t2, double holding_rate, double control_slope) {
  if (!(t2 > t1)) return;
  // e^{-g t1} - e^{-g t2} without cancellation.
  const double w = std::exp(-gamma_ * t1) * -std::expm1(-gamma_ * (t2 - t1)) / gamma_;
  holding_ += holding_rate * w;
  idleness_ += control_slope * w;
  f0_ += holding_rate * (t2 - t1);
  f1_ += holding_rate * 0.5 * (t2 * t2 - t1 * t1);
  holding_hull_.add(t1, holding_rate);
  control_ += control_slope * (t2 - t1);
  control_hull_.add(t2, control_);
}

PathCost DiscountedCostAccumulator::finish(double horizon) {
  PathCost c;
  c.holding = holding_;
  c.idleness = idleness_;
  const double H = horizon;
  const double g = gamma_;
  // Least-squares slope of h·Q_hat on [0, H], clipped at 0.
  const double s0 = H;
  const double s1 = 0.5 * H * H;
  const double s2 = H * H * H / 3.0;
  const double den = s0 * s2 - s1 * s1;
  const double b = den > 0.0 ? std::max(0.0, (s0 * f1_ - s1 * f0_) / den) : 0.0;
  const double a = holding_hull_.max_minus_slope(b);
  const double bc = H > 0.0 ? control_ / H : 0.0;
  const double ac = control_hull_.max_minus_slope(bc);
  const double decay = std::exp(-g * H);
  c.truncation_bound = decay * ((a + b * H) / g + b / (g * g) + ac + bc / g);
  return c;
}

PathCost pathwise_cost(const ScaledTrajectory& st, const CostConfig& cc) {
  const Trajectory& tr = st.trajectory();
  const NetworkTopology& t = tr.topology;
  const int B = st.context().num_basic;
  validate(cc, t.num_buffers, t.num_servers + t.num_activities - B);
  const double r = tr.r;
  const double r2 = r * r;
  const double H = tr.horizon_scaled;
  DiscountedCostAccumulator acc(cc.gamma);
  for (std::size_t l = 0; l < tr.records.size(); ++l) {
    const EventRecord& rec = tr.records[l];
    const double t1 = std::min(H, rec.time / r2);
    const double t2 = l + 1 < tr.records.size() ? std::min(H, tr.records[l + 1].time / r2) : H;
    double hq = 0.0;
    for (int i = 0; i < t.num_buffers; ++i) hq += cc.h[i] * static_cast<double>(rec.queue[static_cast<std::size_t>(i)]);
    acc.segment(t1, t2, hq / r, control_slope(t, B, cc.p, rec.allocation, r));
  }
  return acc.finish(H);
}

PathCost pathwise_cost_checked(const ScaledTrajectory& st, const CostConfig& cc) {
  const PathCost c = pathwise_cost(st, cc);
  if (c.truncation_bound > tail_tol(cc, c.total())) {
    fail(ErrorCode::HorizonTooShort, "truncation bound " + std::to_string(c.truncation_bound) +
                                         " exceeds tail tolerance; increase the horizon");
  }
  return c;
}

CostObserver::CostObserver(const NetworkTopology& t, int num_basic, double r, const CostConfig& cc)
    : topo_(&t), num_basic_(num_basic), r_(r), r2_(r * r), h_(cc.h), p_(cc.p), acc_(cc.gamma) {}

void CostObserver::close_segment(double s_end) {
  acc_.segment(last_time_ / r2_, s_end / r2_, holding_rate_, control_slope_);
}

void CostObserver::on_epoch(const SimState& s, std::span<const EventTag> /*fired*/) {
  close_segment(s.clock);
  last_time_ = s.clock;
  double hq = 0.0;
  for (int i = 0; i < topo_->num_buffers; ++i) hq += h_[i] * static_cast<double>(s.queue[static_cast<std::size_t>(i)]);
  holding_rate_ = hq / r_;
  control_slope_ = control_slope(*topo_, num_basic_, p_, s.allocation, r_);
}

void CostObserver::on_finish(const SimState& /*s*/, double horizon, bool /*deadlocked*/) {
  close_segment(horizon);
  last_time_ = horizon;
  result_ = acc_.finish(horizon / r2_);
}

std::uint64_t replication_seed(std::uint64_t base_seed, std::size_t k) {
  return rng::derive_key(base_seed, kReplicationTag, static_cast<std::uint64_t>(k));
}

PathCost replication_cost(const NetworkSpec& spec, const HeavyTrafficData& htd, const Policy& policy, double r,
                          const CostConfig& cc, std::uint64_t seed) {
  const PrimitiveStreams streams(spec, r, seed);
  CostObserver obs(htd.topology, htd.num_basic, r, cc);
  SimOptions opt;
  opt.check_invariants = false;
  run_simulation(htd.topology, streams, policy, initial_queue(spec.q0, r), cc.horizon_scaled, obs, opt);
  return obs.result();
}

CostEstimate monte_carlo_cost(const NetworkSpec& spec, const HeavyTrafficData& htd, const Policy& policy, double r,
                              const CostConfig& cc, std::size_t reps, std::uint64_t base_seed, Execution ex) {
  if (reps < 2) fail(ErrorCode::InvalidParams, "need at least 2 replications");
  validate(cc, htd.topology.num_buffers, htd.control_dim());
  const auto paths = replicate<PathCost>(
      reps, [&](std::size_t k) { return replication_cost(spec, htd, policy, r, cc, replication_seed(base_seed, k)); },
      ex);
  std::vector<double> total(reps), holding(reps), idleness(reps), tail(reps);
  for (std::size_t k = 0; k < reps; ++k) {
    total[k] = paths[k].total();
    holding[k] = paths[k].holding;
    idleness[k] = paths[k].idleness;
    tail[k] = paths[k].truncation_bound;
  }
  const SampleStats st = sample_stats(total);
  CostEstimate est;
  est.mean = st.mean;
  est.std_error = st.se;
  est.replications = reps;
  est.holding_term = pairwise_sum(holding) / static_cast<double>(reps);
  est.idleness_term = pairwise_sum(idleness) / static_cast<double>(reps);
  est.truncation_bound = pairwise_sum(tail) / static_cast<double>(reps);
  if (est.truncation_bound > tail_tol(cc, est.mean)) {
    fail(ErrorCode::HorizonTooShort, "mean truncation bound " + std::to_string(est.truncation_bound) +
                                         " exceeds tail tolerance at r = " + std::to_string(r));
  }
  return est;
}

void write_cost_csv(const std::vector<CostRow>& rows, std::ostream& os) {
  os << "r,policy,reps,mean,se,holding_term,idleness_term,truncation_bound\n";
  char buf[256];
  for (const auto& row : rows) {
    const CostEstimate& e = row.estimate;
    std::snprintf(buf, sizeof buf, "%.17g,%s,%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", row.r, row.policy.c_str(),
                  e.replications, e.mean, e.std_error, e.holding_term, e.idleness_term, e.truncation_bound);
    os << buf;
  }
}

}  // namespace htlab
