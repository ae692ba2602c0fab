#include "doctest.h"

#include "fixtures.hpp"
#include "htlab/error.hpp"
#include "htlab/primitives.hpp"

#include <cmath>
#include <vector>

using namespace htlab;
using namespace htlab::testing;

namespace {

struct Moments {
  double mean = 0.0;
  double var = 0.0;
};

template <typename F>
Moments moments(int n, F&& draw) {
  double s = 0.0, s2 = 0.0;
  for (int k = 1; k <= n; ++k) {
    const double x = draw(k);
    s += x;
    s2 += x * x;
  }
  const double m = s / n;
  return {m, (s2 - n * m * m) / (n - 1)};
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const auto n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ma += a[k];
    mb += b[k];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    sab += (a[k] - ma) * (b[k] - mb);
    saa += (a[k] - ma) * (a[k] - ma);
    sbb += (b[k] - mb) * (b[k] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

NetworkSpec single(DistributionSpec d) {
  // theta = 0 so the r-th laws equal the limit laws
  return n1_spec(d, d, 0.0);
}

}  // namespace

TEST_CASE("deterministic variates") {
  const PrimitiveStreams s(single(det(2.0)), 10.0, 1);
  for (std::int64_t n : {1, 2, 1000}) {
    CHECK(s.interarrival(0, n) == 2.0);
    CHECK(s.service(0, n) == 2.0);
  }
}

TEST_CASE("exponential sample mean") {
  const PrimitiveStreams s(single(expo(1.0)), 10.0, 42);
  const auto m = moments(100000, [&](int k) { return s.interarrival(0, k); });
  CHECK(m.mean == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("replay is exact") {
  const PrimitiveStreams a(n2_spec(), 20.0, 99);
  const PrimitiveStreams b(n2_spec(), 20.0, 99);
  for (std::int64_t n = 1; n < 50; ++n) {
    CHECK(a.interarrival(1, n) == b.interarrival(1, n));
    CHECK(a.service(0, n) == b.service(0, n));
    CHECK(a.interarrival(1, n) == a.interarrival(1, n));
  }
  const PrimitiveStreams c(n2_spec(), 20.0, 100);
  CHECK(a.interarrival(0, 1) != c.interarrival(0, 1));
}

TEST_CASE("rates are perturbed by theta / r") {
  const PrimitiveStreams s(n2_spec(), 10.0, 1);
  CHECK(s.arrival_rate(0) == doctest::Approx(1.0 - 0.05));
  CHECK(s.arrival_rate(1) == doctest::Approx(0.5 - 0.025));
  CHECK(s.service_rate(0) == 2.0);
  CHECK(s.arrival_sd(0) == doctest::Approx(1.0 / 0.95));
}

TEST_CASE("routing draws") {
  auto spec = n2_spec();
  spec.topology.P = Matrix{{0.0, 0.5}, {1.0, 0.25}};
  const PrimitiveStreams s(spec, 1.0, 5);
  for (std::int64_t n = 1; n <= 100; ++n) {
    CHECK(s.routing(0, n).buffer == 1);
  }
  auto exits = n2_spec();
  const PrimitiveStreams e(exits, 1.0, 5);
  CHECK(e.routing(0, 7).exits());
  CHECK(e.routing(0, 7).one_hot(2).isApprox(vec({1.0, 0.0, 0.0})));

  std::vector<int> freq(3, 0);
  const int N = 100000;
  for (int n = 1; n <= N; ++n) ++freq[static_cast<std::size_t>(s.routing(1, n).buffer + 1)];
  CHECK(std::abs(freq[0] / double(N) - 0.25) <= 0.01);
  CHECK(std::abs(freq[1] / double(N) - 0.5) <= 0.01);
  CHECK(std::abs(freq[2] / double(N) - 0.25) <= 0.01);
}

TEST_CASE("renewal counting") {
  const std::vector<double> sums{0.5, 1.2, 3.0};
  CHECK(renewal_count(sums, 1.2) == 2);
  CHECK(renewal_count(sums, 0.4) == 0);
  CHECK(renewal_count(sums, 5.0) == 3);
  for (std::size_t m = 0; m < sums.size(); ++m) {
    CHECK(renewal_count(sums, sums[m]) == static_cast<std::int64_t>(m + 1));
  }
  // renewal identity on a random path
  const PrimitiveStreams s(single(expo(1.0)), 1.0, 3);
  std::vector<double> xi;
  double acc = 0.0;
  for (int n = 1; n <= 500; ++n) xi.push_back(acc += s.interarrival(0, n));
  for (std::size_t m = 0; m < xi.size(); ++m) {
    CHECK(renewal_count(xi, xi[m]) == static_cast<std::int64_t>(m + 1));
  }
}

TEST_CASE("missing arrival stream") {
  auto spec = n2_spec();
  spec.topology.num_exogenous = 1;
  spec.interarrival.pop_back();
  spec.theta1[1] = 0.0;
  const PrimitiveStreams s(spec, 1.0, 1);
  try {
    s.interarrival(1, 1);
    FAIL("expected NoExogenousArrivals");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoExogenousArrivals);
  }
  CHECK(s.arrival_rate(1) == 0.0);
}

TEST_CASE("variance and positivity of every family") {
  const std::vector<DistributionSpec> laws{expo(1.5), {Family::Uniform, 2.0, 0.5}, {Family::Gamma, 1.0, 0.7},
                                           {Family::Gamma, 2.0, 3.0}};
  for (const auto& d : laws) {
    CAPTURE(to_string(d.family));
    const PrimitiveStreams s(single(d), 4.0, 17);
    double lo = 1e300;
    const auto m = moments(100000, [&](int k) {
      const double x = s.service(0, k);
      lo = std::min(lo, x);
      return x;
    });
    CHECK(lo > 0.0);
    CHECK(m.mean == doctest::Approx(d.mean).epsilon(0.03));
    CHECK(m.var == doctest::Approx(d.sd * d.sd).epsilon(0.05));
  }
}

TEST_CASE("streams are uncorrelated") {
  const PrimitiveStreams s(n2_spec(), 10.0, 2024);
  const PrimitiveStreams t(n2_spec(), 10.0, 2025);
  const int N = 10000;
  std::vector<double> a0, a1, s0, s1, t0, lag;
  for (int n = 1; n <= N; ++n) {
    a0.push_back(s.interarrival(0, n));
    a1.push_back(s.interarrival(1, n));
    s0.push_back(s.service(0, n));
    s1.push_back(s.service(1, n));
    t0.push_back(t.interarrival(0, n));
    lag.push_back(s.interarrival(0, n + 1));
  }
  for (const auto* other : {&a1, &s0, &s1, &t0, &lag}) {
    CHECK(std::abs(correlation(a0, *other)) <= 0.03);
  }
  CHECK(std::abs(correlation(s0, s1)) <= 0.03);
}

TEST_CASE("distribution validation") {
  CHECK_THROWS_AS(validate(DistributionSpec{Family::Exponential, 1.0, 2.0}), Error);
  CHECK_THROWS_AS(validate(DistributionSpec{Family::Deterministic, 1.0, 0.1}), Error);
  CHECK_THROWS_AS(validate(DistributionSpec{Family::Uniform, 1.0, 1.0}), Error);
  CHECK_THROWS_AS(validate(DistributionSpec{Family::Gamma, -1.0, 1.0}), Error);
  CHECK_NOTHROW(validate(DistributionSpec{Family::Uniform, 1.0, 0.5}));
  CHECK(parse_family("gamma") == Family::Gamma);
  CHECK_THROWS_AS(parse_family("pareto"), Error);

  const auto d = with_mean(DistributionSpec{Family::Gamma, 2.0, 1.0}, 4.0);
  CHECK(d.sd == doctest::Approx(2.0));
}
