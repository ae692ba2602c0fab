#pragma once

#include "htlab/policy.hpp"
#include "htlab/primitives.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace htlab {

enum class EventKind : std::uint8_t { Start, Arrival, Completion };

std::string to_string(EventKind k);

struct EventTag {
  EventKind kind = EventKind::Start;
  int index = 0;  // buffer for arrivals, activity for completions

  bool operator==(const EventTag&) const = default;
};

/// Network state at an event epoch. Arrival clocks are kept as absolute due
/// times; service clocks as due times while active and as frozen residuals
/// otherwise.
struct SimState {
  double clock = 0.0;
  std::vector<std::int64_t> queue;  // I
  std::vector<double> busy_time;    // T, J
  std::vector<double> idle_time;    // I_cum, K
  std::vector<std::int64_t> arrivals;     // E, I
  std::vector<std::int64_t> completions;  // S, J
  std::vector<std::int64_t> routed;       // Phi, I x J row-major
  Allocation allocation;                  // in force from `clock` on

  std::vector<double> arrival_due;   // I, +inf without arrivals
  std::vector<double> service_left;  // J, residual while inactive
  std::vector<double> service_due;   // J, absolute while active

  double u_residual(int i) const { return arrival_due[static_cast<std::size_t>(i)] - clock; }
  double v_residual(int j) const;
  std::int64_t routed_count(int i, int j) const {
    return routed[static_cast<std::size_t>(i) * completions.size() + static_cast<std::size_t>(j)];
  }
};

/// Fresh state at time 0 with initial queues and clocks u(1), v(1).
SimState initial_state(const NetworkTopology& t, const PrimitiveStreams& streams,
                       const std::vector<std::int64_t>& q_initial);

/// q^r = round(r q0).
std::vector<std::int64_t> initial_queue(const Vector& q0, double r);

struct NextEvent {
  double time = 0.0;  // absolute epoch time, +inf on deadlock
  double dt = 0.0;
  std::vector<EventTag> fired;  // arrivals by buffer, then completions by activity
  bool deadlock() const;
};

/// Time to the next event and every clock attaining it (relative tie
/// tolerance 1e-12) under the current allocation.
NextEvent next_event(const SimState& s);
/// Same, reusing `out`.
void next_event(const SimState& s, NextEvent& out);

/// Advances all clocks by `ev.dt` and processes the batch in `ev.fired`.
/// The allocation is left unchanged; the caller decides the next one.
void apply_event(SimState& s, const NextEvent& ev, const NetworkTopology& t, const PrimitiveStreams& streams);

/// Installs a new allocation, freezing and resuming service clocks.
void switch_allocation(SimState& s, const Allocation& a);

/// Direct evaluation q + E - C S + Phi of the queue vector.
std::vector<std::int64_t> reconstruct_queue(const SimState& s, const NetworkTopology& t,
                                            const std::vector<std::int64_t>& q_initial);

/// Receives the state after every decision. `fired` is empty for the initial
/// epoch.
class SimObserver {
 public:
  virtual ~SimObserver() = default;
  virtual void on_epoch(const SimState& s, std::span<const EventTag> fired) = 0;
  /// Called once with the horizon (unscaled) after the last epoch.
  virtual void on_finish(const SimState& /*s*/, double /*horizon*/, bool /*deadlocked*/) {}
};

struct SimOptions {
  /// Check queue reconstruction, idleness identity and clock sanity at every epoch.
  bool check_invariants = true;
};

struct SimSummary {
  std::size_t epochs = 0;
  bool deadlocked = false;
  double horizon = 0.0;  // unscaled
};

/// Runs the network until r^2 * horizon_scaled, calling the observer at each
/// epoch. Events exactly at the horizon are processed.
SimSummary run_simulation(const NetworkTopology& t, const PrimitiveStreams& streams, const Policy& policy,
                          const std::vector<std::int64_t>& q_initial, double horizon_scaled, SimObserver& obs,
                          const SimOptions& opt = {});

struct EventRecord {
  double time = 0.0;
  std::vector<EventTag> events;
  std::vector<std::int64_t> queue;
  std::vector<double> busy_time;
  std::vector<double> idle_time;
  std::vector<std::int64_t> arrivals;
  std::vector<std::int64_t> completions;
  std::vector<std::int64_t> routed;
  std::vector<double> u_residual;
  std::vector<double> v_residual;
  Allocation allocation;  // on [time, next record)

  bool operator==(const EventRecord&) const = default;
};

/// Complete event log of one run.
struct Trajectory {
  NetworkTopology topology;
  double r = 1.0;
  double horizon_scaled = 0.0;
  double horizon = 0.0;  // r^2 horizon_scaled
  std::vector<double> arrival_rate;  // alpha^r, I
  std::vector<double> service_rate;  // beta^r, J
  std::vector<std::int64_t> q_initial;
  std::vector<EventRecord> records;
  bool deadlocked = false;

  int num_buffers() const { return topology.num_buffers; }
  int num_activities() const { return topology.num_activities; }
  /// Index of the last record with time <= s.
  std::size_t record_at(double s) const;
};

Trajectory simulate(const NetworkTopology& t, const PrimitiveStreams& streams, const Policy& policy,
                    const std::vector<std::int64_t>& q_initial, double horizon_scaled, const SimOptions& opt = {});

/// Columns ell, time, kind, index, Q_1..Q_I, T_1..T_J, I_1..I_K. Batched
/// events share one row with kinds and 1-based indices joined by ';'.
void write_event_log_csv(const Trajectory& traj, std::ostream& os);

}  // namespace htlab
