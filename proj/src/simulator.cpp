#include "htlab/simulator.hpp"

#include "htlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

namespace htlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTieTol = 1e-12;
constexpr double kIdentityTol = 1e-9;

std::size_t idx(int k) { return static_cast<std::size_t>(k); }

struct Recorder final : SimObserver {
  Trajectory* traj;

  explicit Recorder(Trajectory* t) : traj(t) {}

  void on_epoch(const SimState& s, std::span<const EventTag> fired) override {
    EventRecord rec;
    rec.time = s.clock;
    rec.events.assign(fired.begin(), fired.end());
    rec.queue = s.queue;
    rec.busy_time = s.busy_time;
    rec.idle_time = s.idle_time;
    rec.arrivals = s.arrivals;
    rec.completions = s.completions;
    rec.routed = s.routed;
    rec.u_residual.resize(s.arrival_due.size());
    for (std::size_t i = 0; i < s.arrival_due.size(); ++i) rec.u_residual[i] = s.u_residual(static_cast<int>(i));
    rec.v_residual.resize(s.service_left.size());
    for (std::size_t j = 0; j < s.service_left.size(); ++j) rec.v_residual[j] = s.v_residual(static_cast<int>(j));
    rec.allocation = s.allocation;
    traj->records.push_back(std::move(rec));
  }
};

void fill_history_record(const SimState& s, const Allocation& prev, HistoryRecord& rec) {
  rec.time = s.clock;
  rec.u_residual.resize(s.arrival_due.size());
  for (std::size_t i = 0; i < s.arrival_due.size(); ++i) rec.u_residual[i] = s.u_residual(static_cast<int>(i));
  rec.v_residual.resize(s.service_left.size());
  for (std::size_t j = 0; j < s.service_left.size(); ++j) rec.v_residual[j] = s.v_residual(static_cast<int>(j));
  rec.queue = s.queue;
  rec.prev_allocation = prev;
}

void check_state(const SimState& s, const NetworkTopology& t, const std::vector<std::int64_t>& q_initial) {
  const int I = t.num_buffers;
  const int J = t.num_activities;
  for (int i = 0; i < I; ++i) {
    std::int64_t direct = q_initial[idx(i)] + s.arrivals[idx(i)];
    for (int j = 0; j < J; ++j) {
      if (t.C(i, j) != 0.0) direct -= s.completions[idx(j)];
      direct += s.routed_count(i, j);
    }
    if (s.queue[idx(i)] < 0) {
      fail(ErrorCode::NegativeQueue, "buffer " + std::to_string(i + 1) + " went negative at t = " +
                                         std::to_string(s.clock));
    }
    if (direct != s.queue[idx(i)]) {
      fail(ErrorCode::NumericalFailure, "queue reconstruction mismatch at buffer " + std::to_string(i + 1));
    }
  }
  const double scale = std::max(1.0, s.clock);
  for (int j = 0; j < J; ++j) {
    if (s.busy_time[idx(j)] > s.clock + kIdentityTol * scale) {
      fail(ErrorCode::NumericalFailure, "busy time exceeds elapsed time for activity " + std::to_string(j + 1));
    }
  }
  for (int k = 0; k < t.num_servers; ++k) {
    double used = 0.0;
    for (int j = 0; j < J; ++j) {
      if (t.A(k, j) != 0.0) used += s.busy_time[idx(j)];
    }
    if (std::abs(s.idle_time[idx(k)] - (s.clock - used)) > kIdentityTol * scale) {
      fail(ErrorCode::NumericalFailure, "idleness identity broken at server " + std::to_string(k + 1));
    }
  }
}

}  // namespace

std::string to_string(EventKind k) {
  switch (k) {
    case EventKind::Start: return "start";
    case EventKind::Arrival: return "arrival";
    case EventKind::Completion: return "completion";
  }
  return "unknown";
}

double SimState::v_residual(int j) const {
  return allocation[idx(j)] != 0 ? service_due[idx(j)] - clock : service_left[idx(j)];
}

bool NextEvent::deadlock() const { return !std::isfinite(time); }

SimState initial_state(const NetworkTopology& t, const PrimitiveStreams& streams,
                       const std::vector<std::int64_t>& q_initial) {
  const int I = t.num_buffers;
  const int J = t.num_activities;
  if (static_cast<int>(q_initial.size()) != I) fail(ErrorCode::DimensionMismatch, "initial queue length");
  for (auto q : q_initial) {
    if (q < 0) fail(ErrorCode::InvalidParams, "initial queue must be >= 0");
  }
  SimState s;
  s.queue = q_initial;
  s.busy_time.assign(idx(J), 0.0);
  s.idle_time.assign(idx(t.num_servers), 0.0);
  s.arrivals.assign(idx(I), 0);
  s.completions.assign(idx(J), 0);
  s.routed.assign(idx(I) * idx(J), 0);
  s.allocation.assign(idx(J), 0);
  s.arrival_due.assign(idx(I), kInf);
  for (int i = 0; i < streams.num_exogenous(); ++i) s.arrival_due[idx(i)] = streams.interarrival(i, 1);
  s.service_left.resize(idx(J));
  for (int j = 0; j < J; ++j) s.service_left[idx(j)] = streams.service(j, 1);
  s.service_due.assign(idx(J), kInf);
  return s;
}

std::vector<std::int64_t> initial_queue(const Vector& q0, double r) {
  std::vector<std::int64_t> q(static_cast<std::size_t>(q0.size()));
  for (Eigen::Index i = 0; i < q0.size(); ++i) q[static_cast<std::size_t>(i)] = std::llround(r * q0[i]);
  return q;
}

void next_event(const SimState& s, NextEvent& out) {
  out.fired.clear();
  double t_min = kInf;
  for (double due : s.arrival_due) t_min = std::min(t_min, due);
  for (std::size_t j = 0; j < s.allocation.size(); ++j) {
    if (s.allocation[j] != 0) t_min = std::min(t_min, s.service_due[j]);
  }
  out.time = t_min;
  if (!std::isfinite(t_min)) {
    out.dt = kInf;
    return;
  }
  out.dt = t_min - s.clock;
  const double cut = t_min + kTieTol * std::max(1.0, std::abs(t_min));
  for (std::size_t i = 0; i < s.arrival_due.size(); ++i) {
    if (s.arrival_due[i] <= cut) out.fired.push_back({EventKind::Arrival, static_cast<int>(i)});
  }
  for (std::size_t j = 0; j < s.allocation.size(); ++j) {
    if (s.allocation[j] != 0 && s.service_due[j] <= cut) {
      out.fired.push_back({EventKind::Completion, static_cast<int>(j)});
    }
  }
}

NextEvent next_event(const SimState& s) {
  NextEvent ev;
  next_event(s, ev);
  return ev;
}

void apply_event(SimState& s, const NextEvent& ev, const NetworkTopology& t, const PrimitiveStreams& streams) {
  if (ev.deadlock()) fail(ErrorCode::InvalidHorizon, "no event can occur");
  const double dt = ev.time - s.clock;
  const int J = t.num_activities;
  for (int k = 0; k < t.num_servers; ++k) s.idle_time[idx(k)] += dt;
  for (int j = 0; j < J; ++j) {
    if (s.allocation[idx(j)] != 0) {
      s.busy_time[idx(j)] += dt;
      s.idle_time[idx(t.server_of(j))] -= dt;
    }
  }
  s.clock = ev.time;
  for (const EventTag& e : ev.fired) {
    if (e.kind == EventKind::Arrival) {
      const auto i = idx(e.index);
      ++s.arrivals[i];
      ++s.queue[i];
      s.arrival_due[i] += streams.interarrival(e.index, s.arrivals[i] + 1);
    }
  }
  for (const EventTag& e : ev.fired) {
    if (e.kind != EventKind::Completion) continue;
    const int j = e.index;
    const auto n = ++s.completions[idx(j)];
    const int from = t.buffer_of(j);
    if (--s.queue[idx(from)] < 0) {
      fail(ErrorCode::NegativeQueue, "completion of activity " + std::to_string(j + 1) + " from an empty buffer");
    }
    const RoutingDraw d = streams.routing(j, n);
    if (!d.exits()) {
      ++s.queue[idx(d.buffer)];
      ++s.routed[idx(d.buffer) * idx(J) + idx(j)];
    }
    s.service_due[idx(j)] = s.clock + streams.service(j, n + 1);
  }
}

void switch_allocation(SimState& s, const Allocation& a) {
  for (std::size_t j = 0; j < a.size(); ++j) {
    const bool was = s.allocation[j] != 0;
    const bool now = a[j] != 0;
    if (was && !now) {
      s.service_left[j] = std::max(0.0, s.service_due[j] - s.clock);
      s.service_due[j] = kInf;
    } else if (!was && now) {
      s.service_due[j] = s.clock + s.service_left[j];
    }
    s.allocation[j] = a[j];
  }
}

std::vector<std::int64_t> reconstruct_queue(const SimState& s, const NetworkTopology& t,
                                            const std::vector<std::int64_t>& q_initial) {
  std::vector<std::int64_t> q(idx(t.num_buffers));
  for (int i = 0; i < t.num_buffers; ++i) {
    std::int64_t v = q_initial[idx(i)] + s.arrivals[idx(i)];
    for (int j = 0; j < t.num_activities; ++j) {
      v -= static_cast<std::int64_t>(t.C(i, j)) * s.completions[idx(j)];
      v += s.routed_count(i, j);
    }
    q[idx(i)] = v;
  }
  return q;
}

SimSummary run_simulation(const NetworkTopology& t, const PrimitiveStreams& streams, const Policy& policy,
                          const std::vector<std::int64_t>& q_initial, double horizon_scaled, SimObserver& obs,
                          const SimOptions& opt) {
  if (!(horizon_scaled >= 0.0) || !std::isfinite(horizon_scaled)) {
    fail(ErrorCode::InvalidHorizon, "horizon must be finite and >= 0");
  }
  SimSummary sum;
  sum.horizon = streams.r() * streams.r() * horizon_scaled;
  SimState s = initial_state(t, streams, q_initial);
  History hist(t.num_buffers, t.num_activities, policy.needs_full_history());
  HistoryRecord rec;
  Allocation prev(idx(t.num_activities), 0);
  Allocation next;
  NextEvent ev;

  auto decide = [&] {
    fill_history_record(s, prev, rec);
    hist.push(rec);
    policy.decide(hist, next);
    if (auto bad = allocation_violation(t, s.queue, next)) {
      fail(ErrorCode::InfeasibleAllocation, policy.name() + " at t = " + std::to_string(s.clock) + ": " + *bad);
    }
    switch_allocation(s, next);
    if (opt.check_invariants) check_state(s, t, q_initial);
    ++sum.epochs;
  };

  decide();
  obs.on_epoch(s, {});
  for (;;) {
    next_event(s, ev);
    if (ev.deadlock()) {
      sum.deadlocked = true;
      break;
    }
    if (ev.time > sum.horizon) break;
    prev = s.allocation;
    apply_event(s, ev, t, streams);
    decide();
    obs.on_epoch(s, ev.fired);
  }
  obs.on_finish(s, sum.horizon, sum.deadlocked);
  return sum;
}

std::size_t Trajectory::record_at(double s) const {
  const auto it = std::upper_bound(records.begin(), records.end(), s,
                                   [](double v, const EventRecord& rec) { return v < rec.time; });
  if (it == records.begin()) return 0;
  return static_cast<std::size_t>(it - records.begin()) - 1;
}

Trajectory simulate(const NetworkTopology& t, const PrimitiveStreams& streams, const Policy& policy,
                    const std::vector<std::int64_t>& q_initial, double horizon_scaled, const SimOptions& opt) {
  Trajectory traj;
  traj.topology = t;
  traj.r = streams.r();
  traj.horizon_scaled = horizon_scaled;
  traj.q_initial = q_initial;
  for (int i = 0; i < t.num_buffers; ++i) traj.arrival_rate.push_back(streams.arrival_rate(i));
  for (int j = 0; j < t.num_activities; ++j) traj.service_rate.push_back(streams.service_rate(j));
  Recorder rec(&traj);
  const SimSummary sum = run_simulation(t, streams, policy, q_initial, horizon_scaled, rec, opt);
  traj.horizon = sum.horizon;
  traj.deadlocked = sum.deadlocked;
  return traj;
}

void write_event_log_csv(const Trajectory& traj, std::ostream& os) {
  const int I = traj.num_buffers();
  const int J = traj.num_activities();
  const int K = traj.topology.num_servers;
  os << "ell,time,kind,index";
  for (int i = 0; i < I; ++i) os << ",Q_" << i + 1;
  for (int j = 0; j < J; ++j) os << ",T_" << j + 1;
  for (int k = 0; k < K; ++k) os << ",I_" << k + 1;
  os << '\n';
  char buf[32];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  };
  for (std::size_t l = 0; l < traj.records.size(); ++l) {
    const EventRecord& r = traj.records[l];
    std::string kinds;
    std::string indices;
    if (r.events.empty()) {
      kinds = "start";
      indices = "0";
    }
    for (std::size_t e = 0; e < r.events.size(); ++e) {
      if (e > 0) {
        kinds += ';';
        indices += ';';
      }
      kinds += to_string(r.events[e].kind);
      indices += std::to_string(r.events[e].index + 1);
    }
    os << l << ',' << num(r.time) << ',' << kinds << ',' << indices;
    for (auto q : r.queue) os << ',' << q;
    for (double v : r.busy_time) os << ',' << num(v);
    for (double v : r.idle_time) os << ',' << num(v);
    os << '\n';
  }
}

}  // namespace htlab
