#include "doctest.h"

#include "fixtures.hpp"
#include "htlab/cost.hpp"
#include "htlab/error.hpp"
#include "htlab/scaling.hpp"

#include <cmath>
#include <functional>
#include <sstream>

using namespace htlab;
using namespace htlab::testing;

namespace {

double simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
               double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = f(0.5 * (a + m)), rm = f(0.5 * (m + b));
  const double left = (m - a) / 6.0 * (fa + 4.0 * lm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * rm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol) return left + right + (left + right - whole) / 15.0;
  return simpson(f, a, m, fa, lm, fm, left, 0.5 * tol, depth - 1) +
         simpson(f, m, b, fm, rm, fb, right, 0.5 * tol, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
  if (!(b > a)) return 0.0;
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  return simpson(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 40);
}

struct N2Fixture {
  NetworkSpec spec = n2_spec();
  HeavyTrafficData htd = heavy_traffic_analysis(spec.topology, limit_params(spec));
  ScalingContext ctx = make_scaling_context(htd);

  CostConfig config(double gamma = 1.0, double H = 4.0) const {
    CostConfig cc;
    cc.gamma = gamma;
    cc.h = n2_h();
    cc.p = vec({0.5});
    cc.horizon_scaled = H;
    return cc;
  }
};

}  // namespace

TEST_CASE("closed-form accumulator examples") {
  DiscountedCostAccumulator flat(2.0);
  flat.segment(0.0, 40.0, 3.0, 0.0);
  const auto c1 = flat.finish(40.0);
  CHECK(c1.holding == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(c1.idleness == 0.0);
  CHECK(c1.holding + c1.truncation_bound >= 1.5 - 1e-15);

  DiscountedCostAccumulator linear(0.5);
  linear.segment(0.0, 80.0, 0.0, 2.0);
  const auto c2 = linear.finish(80.0);
  CHECK(c2.idleness == doctest::Approx(4.0).epsilon(1e-12));

  DiscountedCostAccumulator two(1.0);
  two.segment(0.0, 1.0, 1.0, 0.0);
  two.segment(1.0, 16.0, 0.0, 0.0);
  const auto c3 = two.finish(16.0);
  CHECK(c3.holding == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-15));
  CHECK(c3.truncation_bound >= 0.0);
}

TEST_CASE("truncation bound covers the tail of a linear path") {
  // h·Q = 1 + t: the tail beyond H is e^{-H}(1 + H + 1) for gamma = 1
  DiscountedCostAccumulator acc(1.0);
  const double H = 10.0;
  const int n = 1000;
  for (int k = 0; k < n; ++k) {
    const double t1 = H * k / n, t2 = H * (k + 1) / n;
    acc.segment(t1, t2, 1.0 + t2, 0.0);
  }
  const auto c = acc.finish(H);
  const double tail = std::exp(-H) * (2.0 + H);
  CHECK(c.truncation_bound >= tail);
  CHECK(c.truncation_bound <= 2.0 * tail);
}

TEST_CASE("cost is additive over a split segment") {
  DiscountedCostAccumulator whole(1.3), split(1.3);
  whole.segment(0.2, 2.7, 1.7, 0.4);
  split.segment(0.2, 1.1, 1.7, 0.4);
  split.segment(1.1, 2.7, 1.7, 0.4);
  const auto a = whole.finish(2.7), b = split.finish(2.7);
  CHECK(a.holding == doctest::Approx(b.holding).epsilon(1e-14));
  CHECK(a.idleness == doctest::Approx(b.idleness).epsilon(1e-14));
}

TEST_CASE("pathwise cost against numerical quadrature") {
  const N2Fixture f;
  const auto policy = make_random_feasible(f.spec.topology, 5, 0.3);
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const PrimitiveStreams st(f.spec, 5.0, seed);
    const auto tr = simulate(f.spec.topology, st, *policy, initial_queue(f.spec.q0, 5.0), 4.0);
    const auto cc = f.config();
    const auto c = pathwise_cost(scale(tr, f.ctx, {0.0, 4.0}), cc);

    double holding = 0.0, idleness = 0.0;
    const double r2 = 25.0;
    for (std::size_t l = 0; l < tr.records.size(); ++l) {
      const auto& rec = tr.records[l];
      const double t1 = rec.time / r2;
      const double t2 = l + 1 < tr.records.size() ? tr.records[l + 1].time / r2 : 4.0;
      const double hq = (1.0 * rec.queue[0] + 3.0 * rec.queue[1]) / 5.0;
      const bool idle = rec.allocation[0] == 0 && rec.allocation[1] == 0;
      holding += integrate([&](double t) { return std::exp(-t) * hq; }, t1, t2, 1e-15);
      if (idle) idleness += integrate([&](double t) { return std::exp(-t) * 0.5 * 5.0; }, t1, t2, 1e-15);
    }
    CHECK(std::abs(c.holding - holding) <= 1e-10);
    CHECK(std::abs(c.idleness - idleness) <= 1e-10);
    CHECK(c.idleness > 0.0);
  }
}

TEST_CASE("streaming and stored costs agree") {
  const N2Fixture f;
  const auto policy = make_random_feasible(f.spec.topology, 2, 0.2);
  const auto cc = f.config(1.0, 3.0);
  const PrimitiveStreams st(f.spec, 6.0, 77);
  const auto tr = simulate(f.spec.topology, st, *policy, initial_queue(f.spec.q0, 6.0), 3.0);
  const auto stored = pathwise_cost(scale(tr, f.ctx, {0.0}), cc);
  const auto streamed = replication_cost(f.spec, f.htd, *policy, 6.0, cc, 77);
  CHECK(streamed.holding == doctest::Approx(stored.holding).epsilon(1e-12));
  CHECK(streamed.idleness == doctest::Approx(stored.idleness).epsilon(1e-12));
  CHECK(streamed.truncation_bound == doctest::Approx(stored.truncation_bound).epsilon(1e-9));
}

TEST_CASE("cost is monotone in h, p and gamma on a fixed path") {
  const N2Fixture f;
  const auto policy = make_random_feasible(f.spec.topology, 9, 0.2);
  const PrimitiveStreams st(f.spec, 5.0, 4);
  const auto tr = simulate(f.spec.topology, st, *policy, initial_queue(f.spec.q0, 5.0), 4.0);
  const auto sc = scale(tr, f.ctx, {0.0});
  const auto base = f.config();
  const auto c0 = pathwise_cost(sc, base);

  auto more_h = base;
  more_h.h[1] += 1.0;
  CHECK(pathwise_cost(sc, more_h).total() >= c0.total());
  auto more_p = base;
  more_p.p[0] += 1.0;
  CHECK(pathwise_cost(sc, more_p).total() >= c0.total());
  auto steeper = base;
  steeper.gamma = 2.0;
  CHECK(pathwise_cost(sc, steeper).total() <= c0.total());
}

TEST_CASE("cost configuration checks") {
  CostConfig cc;
  cc.h = vec({1.0, 0.0});
  CHECK_THROWS_AS(validate(cc, 2, 1), Error);
  cc.h = vec({1.0, 1.0});
  cc.gamma = 0.0;
  CHECK_THROWS_AS(validate(cc, 2, 1), Error);
  cc.gamma = 1.0;
  cc.p = vec({-1.0});
  CHECK_THROWS_AS(validate(cc, 2, 1), Error);
  cc.p = vec({1.0, 1.0});
  CHECK_THROWS_AS(validate(cc, 2, 1), Error);
  cc.p = Vector();
  CHECK_NOTHROW(validate(cc, 2, 1));
}

TEST_CASE("short horizons are rejected") {
  const N2Fixture f;
  const auto policy = make_static_priority(f.spec.topology, {1, 0});
  const PrimitiveStreams st(f.spec, 5.0, 1);
  const auto tr = simulate(f.spec.topology, st, *policy, initial_queue(f.spec.q0, 5.0), 0.5);
  auto cc = f.config(1.0, 0.5);
  try {
    pathwise_cost_checked(scale(tr, f.ctx, {0.0}), cc);
    FAIL("expected HorizonTooShort");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::HorizonTooShort);
  }
  try {
    monte_carlo_cost(f.spec, f.htd, *policy, 5.0, cc, 4, 1);
    FAIL("expected HorizonTooShort");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::HorizonTooShort);
  }
  CHECK_THROWS_AS(monte_carlo_cost(f.spec, f.htd, *policy, 5.0, f.config(), 1, 1), Error);
}

TEST_CASE("deterministic network has zero standard error") {
  const auto spec = n1_spec(det(1.0), det(1.0), 0.0, 1.0);
  // the limit analysis requires sigma_v > 0, so take it from the exponential twin
  const auto twin = n1_spec();
  const auto htd = heavy_traffic_analysis(twin.topology, limit_params(twin));
  const auto policy = make_static_priority(htd.topology, {0});
  CostConfig cc;
  cc.h = vec({1.0});
  const auto est = monte_carlo_cost(spec, htd, *policy, 10.0, cc, 8, 3);
  CHECK(est.std_error == 0.0);
  const auto one = replication_cost(spec, htd, *policy, 10.0, cc, 12345);
  CHECK(est.mean == one.total());
  CHECK(est.mean == doctest::Approx(1.0 - std::exp(-16.0)).epsilon(1e-12));
}

TEST_CASE("Monte Carlo self-consistency on one buffer") {
  const auto spec = n1_spec();
  const auto htd = heavy_traffic_analysis(spec.topology, limit_params(spec));
  const auto policy = make_static_priority(htd.topology, {0});
  CostConfig cc;
  cc.h = vec({1.0});
  const auto a = monte_carlo_cost(spec, htd, *policy, 10.0, cc, 200, 101);
  const auto b = monte_carlo_cost(spec, htd, *policy, 10.0, cc, 200, 202);
  const double pooled = std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
  CHECK(std::abs(a.mean - b.mean) <= 4.0 * pooled);
  CHECK(a.holding_term == doctest::Approx(a.mean));
  CHECK(a.truncation_bound >= 0.0);

  const auto big = monte_carlo_cost(spec, htd, *policy, 10.0, cc, 400, 101);
  const double ratio = big.std_error / a.std_error;
  CHECK(std::abs(ratio - 1.0 / std::sqrt(2.0)) <= 0.3 / std::sqrt(2.0));

  // serial and parallel paths give the same numbers
  const auto serial = monte_carlo_cost(spec, htd, *policy, 10.0, cc, 200, 101, Execution::Serial);
  CHECK(serial.mean == a.mean);
  CHECK(serial.std_error == a.std_error);
}

TEST_CASE("replication seeds are distinct") {
  CHECK(replication_seed(1, 0) != replication_seed(1, 1));
  CHECK(replication_seed(1, 0) != replication_seed(2, 0));
  CHECK(replication_seed(5, 3) == replication_seed(5, 3));
}

TEST_CASE("cost csv") {
  std::vector<CostRow> rows{{10.0, "cmu", {2.5, 0.1, 400, 1e-6, 2.5, 0.0}}};
  std::ostringstream os;
  write_cost_csv(rows, os);
  CHECK(os.str() ==
        "r,policy,reps,mean,se,holding_term,idleness_term,truncation_bound\n"
        "10,cmu,400,2.5,0.10000000000000001,2.5,0,9.9999999999999995e-07\n");
}
