#include "doctest.h"

#include "fixtures.hpp"
#include "htlab/error.hpp"
#include "htlab/simulator.hpp"

#include <limits>
#include <sstream>

using namespace htlab;
using namespace htlab::testing;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

SimState one_buffer_state(double u, double v, std::uint8_t active) {
  SimState s;
  s.queue = {1};
  s.busy_time = {0.0};
  s.idle_time = {0.0};
  s.arrivals = {0};
  s.completions = {0};
  s.routed = {0};
  s.allocation = {0};
  s.arrival_due = {u};
  s.service_left = {v};
  s.service_due = {kInf};
  switch_allocation(s, {active});
  return s;
}

// interarrival 1, service 0.5, no drift, one job at the start
NetworkSpec n1_deterministic() { return n1_spec(det(1.0), det(0.5), 0.0, 1.0); }

NetworkSpec tandem() {
  NetworkSpec s;
  auto& t = s.topology;
  t.num_buffers = 2;
  t.num_servers = 2;
  t.num_activities = 2;
  t.num_exogenous = 1;
  t.C = Matrix::Identity(2, 2);
  t.A = Matrix::Identity(2, 2);
  t.P = Matrix{{0, 0}, {1, 0}};
  s.interarrival = {det(10.0)};
  s.service = {det(1.0), det(1.0)};
  s.theta1 = vec({0.0, 0.0});
  s.theta2 = vec({0.0, 0.0});
  s.q0 = vec({0.0, 0.0});
  return s;
}

// Buffer 1 on server 1 or 2, buffer 2 on server 2 only.
NetworkSpec crossed() {
  NetworkSpec s;
  auto& t = s.topology;
  t.num_buffers = 2;
  t.num_servers = 2;
  t.num_activities = 3;
  t.num_exogenous = 2;
  t.C = Matrix{{1, 1, 0}, {0, 0, 1}};
  t.A = Matrix{{1, 0, 0}, {0, 1, 1}};
  t.P = Matrix::Zero(2, 3);
  t.P(1, 0) = 0.3;  // some jobs finished at server 1 come back as class 2
  s.interarrival = {expo(1.0), expo(1.0 / 0.7)};
  s.service = {expo(1.0), expo(1.0), expo(1.0)};
  s.theta1 = vec({-1.0, -1.0});
  s.theta2 = vec({0.0, 0.0, 0.0});
  s.q0 = vec({1.0, 1.0});
  return s;
}

// Direct evaluation of the queue from the counts in a record.
std::vector<std::int64_t> direct_queue(const Trajectory& tr, const EventRecord& r) {
  const auto& t = tr.topology;
  std::vector<std::int64_t> q(tr.q_initial);
  for (int i = 0; i < t.num_buffers; ++i) {
    q[i] += r.arrivals[i];
    for (int j = 0; j < t.num_activities; ++j) {
      if (t.C(i, j) == 1.0) q[i] -= r.completions[j];
      q[i] += r.routed[i * t.num_activities + j];
    }
  }
  return q;
}

void check_trajectory(const Trajectory& tr, const Vector& x_star, int num_basic) {
  const auto& t = tr.topology;
  for (std::size_t l = 0; l < tr.records.size(); ++l) {
    const auto& r = tr.records[l];
    CHECK(direct_queue(tr, r) == r.queue);
    for (auto q : r.queue) CHECK(q >= 0);
    for (int k = 0; k < t.num_servers; ++k) {
      double used = 0.0;
      for (int j = 0; j < t.num_activities; ++j) used += t.A(k, j) * r.busy_time[j];
      CHECK(std::abs(r.idle_time[k] - (r.time - used)) <= 1e-9 * std::max(1.0, r.time));
    }
    CHECK_FALSE(allocation_violation(t, r.queue, r.allocation).has_value());
    if (l == 0) continue;
    const auto& p = tr.records[l - 1];
    const double dt = r.time - p.time;
    CHECK(dt >= 0.0);
    for (int j = 0; j < t.num_activities; ++j) {
      const double dT = r.busy_time[j] - p.busy_time[j];
      CHECK(dT >= 0.0);
      CHECK(dT <= dt + 1e-9 * std::max(1.0, r.time));
      // U = K Y: idleness and nonbasic busy time never decrease
      if (j >= num_basic) CHECK(dT - x_star[j] * dt >= -1e-9);
    }
    for (int k = 0; k < t.num_servers; ++k) CHECK(r.idle_time[k] >= p.idle_time[k] - 1e-9);
    for (int i = 0; i < t.num_buffers; ++i) CHECK(r.arrivals[i] >= p.arrivals[i]);
  }
}

}  // namespace

TEST_CASE("next event examples") {
  auto s = one_buffer_state(0.5, 0.2, 1);
  auto ev = next_event(s);
  CHECK(ev.dt == doctest::Approx(0.2));
  CHECK(ev.fired == std::vector<EventTag>{{EventKind::Completion, 0}});

  s = one_buffer_state(0.5, 0.2, 0);
  ev = next_event(s);
  CHECK(ev.dt == doctest::Approx(0.5));
  CHECK(ev.fired == std::vector<EventTag>{{EventKind::Arrival, 0}});

  s = one_buffer_state(0.3, 0.3, 1);
  ev = next_event(s);
  CHECK(ev.dt == doctest::Approx(0.3));
  CHECK(ev.fired == std::vector<EventTag>{{EventKind::Arrival, 0}, {EventKind::Completion, 0}});

  s = one_buffer_state(kInf, 0.3, 0);
  CHECK(next_event(s).deadlock());
}

TEST_CASE("apply event examples") {
  const auto spec = n1_deterministic();
  const PrimitiveStreams st(spec, 1.0, 1);
  const auto& t = spec.topology;

  SimState s = initial_state(t, st, {0});
  auto ev = next_event(s);
  REQUIRE(ev.fired.size() == 1);
  apply_event(s, ev, t, st);
  CHECK(s.queue == std::vector<std::int64_t>{1});
  CHECK(s.arrivals == std::vector<std::int64_t>{1});
  CHECK(s.u_residual(0) == 1.0);
  CHECK(s.idle_time[0] == 1.0);

  switch_allocation(s, {1});
  ev = next_event(s);
  CHECK(ev.dt == 0.5);
  apply_event(s, ev, t, st);
  CHECK(s.queue == std::vector<std::int64_t>{0});
  CHECK(s.completions == std::vector<std::int64_t>{1});
  CHECK(s.busy_time[0] == 0.5);
  CHECK(s.routed == std::vector<std::int64_t>{0});
}

TEST_CASE("completion routed to the next buffer") {
  const auto spec = tandem();
  const PrimitiveStreams st(spec, 1.0, 1);
  const auto& t = spec.topology;
  SimState s = initial_state(t, st, {1, 0});
  switch_allocation(s, {1, 0});
  const auto ev = next_event(s);
  CHECK(ev.fired == std::vector<EventTag>{{EventKind::Completion, 0}});
  apply_event(s, ev, t, st);
  CHECK(s.queue == std::vector<std::int64_t>{0, 1});
  CHECK(s.routed_count(1, 0) == 1);
  CHECK(reconstruct_queue(s, t, {1, 0}) == s.queue);
}

TEST_CASE("preempted service resumes where it stopped") {
  SimState s = one_buffer_state(5.0, 1.0, 1);
  s.clock = 0.4;
  switch_allocation(s, {0});
  CHECK(s.v_residual(0) == doctest::Approx(0.6));
  s.clock = 2.0;
  CHECK(s.v_residual(0) == doctest::Approx(0.6));
  switch_allocation(s, {1});
  CHECK(s.service_due[0] == doctest::Approx(2.6));
}

TEST_CASE("hand-traced single-buffer run") {
  const auto spec = n1_deterministic();
  const PrimitiveStreams st(spec, 1.0, 1);
  const auto policy = make_static_priority(spec.topology, {0});
  const auto tr = simulate(spec.topology, st, *policy, {1}, 2.5);
  REQUIRE(tr.records.size() == 6);
  const std::vector<double> times{0.0, 0.5, 1.0, 1.5, 2.0, 2.5};
  const std::vector<std::int64_t> queues{1, 0, 1, 0, 1, 0};
  const std::vector<double> busy{0.0, 0.5, 0.5, 1.0, 1.0, 1.5};
  for (std::size_t l = 0; l < 6; ++l) {
    CAPTURE(l);
    CHECK(tr.records[l].time == times[l]);
    CHECK(tr.records[l].queue[0] == queues[l]);
    CHECK(tr.records[l].busy_time[0] == busy[l]);
    CHECK(tr.records[l].idle_time[0] == times[l] - busy[l]);
  }
  CHECK(tr.records[0].events.empty());
  CHECK(tr.records[1].events == std::vector<EventTag>{{EventKind::Completion, 0}});
  CHECK(tr.records[2].events == std::vector<EventTag>{{EventKind::Arrival, 0}});
  CHECK(tr.records[5].completions[0] == 3);
  CHECK(tr.records[4].arrivals[0] == 2);
  CHECK(tr.record_at(1.2) == 2);
  CHECK(tr.record_at(2.5) == 5);

  std::ostringstream os;
  write_event_log_csv(tr, os);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "ell,time,kind,index,Q_1,T_1,I_1");
  std::getline(in, line);
  CHECK(line == "0,0,start,0,1,0,0");
  std::getline(in, line);
  CHECK(line == "1,0.5,completion,1,0,0.5,0");
  std::getline(in, line);
  CHECK(line == "2,1,arrival,1,1,0.5,0.5");
}

TEST_CASE("simultaneous events share one record") {
  // interarrival 1, service 1, one job: completions and arrivals coincide
  const auto spec = n1_spec(det(1.0), det(1.0), 0.0, 1.0);
  const PrimitiveStreams st(spec, 1.0, 1);
  const auto policy = make_static_priority(spec.topology, {0});
  const auto tr = simulate(spec.topology, st, *policy, {1}, 3.0);
  REQUIRE(tr.records.size() == 4);
  CHECK(tr.records[1].events == std::vector<EventTag>{{EventKind::Arrival, 0}, {EventKind::Completion, 0}});
  CHECK(tr.records[3].queue[0] == 1);
  CHECK(tr.records[3].idle_time[0] == 0.0);

  std::ostringstream os;
  write_event_log_csv(tr, os);
  CHECK(os.str().find("1,1,arrival;completion,1;1,1,1,0") != std::string::npos);
}

TEST_CASE("zero horizon keeps only the initial record") {
  const auto spec = n2_spec();
  const PrimitiveStreams st(spec, 10.0, 3);
  const auto policy = make_static_priority(spec.topology, {1, 0});
  const auto tr = simulate(spec.topology, st, *policy, initial_queue(spec.q0, 10.0), 0.0);
  REQUIRE(tr.records.size() == 1);
  CHECK(tr.records[0].queue == std::vector<std::int64_t>{10, 10});
  CHECK(tr.records[0].allocation == Allocation{0, 1});
}

TEST_CASE("bad inputs") {
  const auto spec = n2_spec();
  const PrimitiveStreams st(spec, 10.0, 3);
  const auto policy = make_static_priority(spec.topology, {1, 0});
  try {
    simulate(spec.topology, st, *policy, {1, 1}, -1.0);
    FAIL("expected InvalidHorizon");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidHorizon);
  }
  CHECK_THROWS_AS(simulate(spec.topology, st, *policy, {1}, 1.0), Error);
  CHECK(initial_queue(vec({1.0, 0.26}), 10.0) == std::vector<std::int64_t>{10, 3});
}

namespace {

struct BadPolicy final : Policy {
  std::string name() const override { return "bad"; }
  void decide(const History&, Allocation& out) const override { out.assign(2, 1); }
};

}  // namespace

TEST_CASE("infeasible allocations abort the run") {
  const auto spec = n2_spec();
  const PrimitiveStreams st(spec, 10.0, 3);
  try {
    simulate(spec.topology, st, BadPolicy{}, {1, 1}, 1.0);
    FAIL("expected InfeasibleAllocation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InfeasibleAllocation);
  }
}

TEST_CASE("replay is bit-identical") {
  const auto spec = n2_spec();
  const auto policy = make_static_priority(spec.topology, {1, 0});
  const PrimitiveStreams a(spec, 10.0, 12345);
  const PrimitiveStreams b(spec, 10.0, 12345);
  const auto q0 = initial_queue(spec.q0, 10.0);
  const auto ta = simulate(spec.topology, a, *policy, q0, 1.0);
  const auto tb = simulate(spec.topology, b, *policy, q0, 1.0);
  CHECK(ta.records.size() > 100);
  CHECK(ta.records == tb.records);
  std::ostringstream oa, ob;
  write_event_log_csv(ta, oa);
  write_event_log_csv(tb, ob);
  CHECK(oa.str() == ob.str());
}

TEST_CASE("state equations hold along random paths") {
  const auto n2 = n2_spec();
  const auto n2_policy = make_static_priority(n2.topology, {1, 0});
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const PrimitiveStreams st(n2, 10.0, seed);
    const auto tr = simulate(n2.topology, st, *n2_policy, initial_queue(n2.q0, 10.0), 0.5);
    check_trajectory(tr, vec({0.5, 0.5}), 2);
  }

  const auto cx = crossed();
  const auto htd = heavy_traffic_analysis(cx.topology, limit_params(cx));
  const auto rel = relabeled(cx, htd.permutation);
  REQUIRE(htd.num_basic == 2);
  const auto policies = {make_random_feasible(rel.topology, 4, 0.1), make_static_priority(rel.topology, {0, 1})};
  for (const auto& p : policies) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const PrimitiveStreams st(rel, 5.0, seed);
      const auto tr = simulate(rel.topology, st, *p, initial_queue(rel.q0, 5.0), 1.0);
      CHECK(tr.records.back().routed[1 * 3 + 0] > 0);
      check_trajectory(tr, htd.x_star, htd.num_basic);
    }
  }
}
