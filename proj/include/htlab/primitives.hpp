#pragma once

#include "htlab/network.hpp"
#include "htlab/rng.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace htlab {

enum class Family { Exponential, Deterministic, Uniform, Gamma };

Family parse_family(const std::string& s);
std::string to_string(Family f);

/// Law of one interarrival or service sequence, given by mean and standard
/// deviation. Exponential requires sd == mean, deterministic sd == 0.
struct DistributionSpec {
  Family family = Family::Exponential;
  double mean = 1.0;
  double sd = 1.0;
};

void validate(const DistributionSpec& d);

/// Same family and coefficient of variation, new mean.
DistributionSpec with_mean(const DistributionSpec& d, double mean);

/// One strictly positive variate.
double sample(const DistributionSpec& d, rng::CounterEngine& eng);

/// Full description of a network family: structure, primitive laws and the
/// O(1/r) rate perturbations. Limit rates are alpha_i = 1/mean, beta_j = 1/mean.
struct NetworkSpec {
  NetworkTopology topology;
  std::vector<DistributionSpec> interarrival;  // one per exogenous buffer
  std::vector<DistributionSpec> service;       // one per activity
  Vector theta1;
  Vector theta2;
  Vector q0;
};

void validate(const NetworkSpec& spec);
LimitParams limit_params(const NetworkSpec& spec);
/// Reorders activity-indexed data; `permutation[k]` is the source activity of slot k.
NetworkSpec relabeled(const NetworkSpec& spec, const std::vector<int>& permutation);

enum class StreamKind : std::uint64_t { Arrival = 1, Service = 2, Routing = 3 };

/// Where the n-th job completed by an activity goes.
struct RoutingDraw {
  int buffer = -1;  // 0-based buffer, or -1 for exit
  bool exits() const { return buffer < 0; }
  /// (I + 1)-vector with slot 0 for exit and slot i + 1 for buffer i.
  Vector one_hot(int num_buffers) const;
};

/// Interarrival, service and routing randomness of the r-th network. Each
/// variate is addressed by (base_seed, kind, index, n) and computed on
/// demand, so streams are independent and replay exactly.
class PrimitiveStreams {
 public:
  PrimitiveStreams(const NetworkSpec& spec, double r, std::uint64_t base_seed);

  /// u_i(n), n >= 1. Throws NoExogenousArrivals for buffers without arrivals.
  double interarrival(int i, std::int64_t n) const;
  /// v_j(n), n >= 1.
  double service(int j, std::int64_t n) const;
  /// phi^j(n), n >= 1.
  RoutingDraw routing(int j, std::int64_t n) const;

  double r() const { return r_; }
  std::uint64_t base_seed() const { return seed_; }
  int num_buffers() const { return num_buffers_; }
  int num_exogenous() const { return static_cast<int>(arrival_.size()); }
  int num_activities() const { return static_cast<int>(service_.size()); }

  /// alpha^r = alpha + theta1 / r (0 for non-exogenous buffers).
  double arrival_rate(int i) const;
  /// beta^r = beta + theta2 / r.
  double service_rate(int j) const;
  double arrival_sd(int i) const;
  double service_sd(int j) const;
  /// p_i^j.
  double routing_probability(int i, int j) const { return routing_(i, j); }

 private:
  int num_buffers_;
  double r_;
  std::uint64_t seed_;
  std::vector<DistributionSpec> arrival_;
  std::vector<DistributionSpec> service_;
  std::vector<double> arrival_rate_;
  std::vector<double> service_rate_;
  Matrix routing_;
};

/// max { m >= 0 : partial_sums[m - 1] <= t } with an implicit zero at m = 0.
std::int64_t renewal_count(std::span<const double> partial_sums, double t);

}  // namespace htlab
