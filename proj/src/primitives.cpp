#include "htlab/primitives.hpp"

#include "htlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace htlab {

Family parse_family(const std::string& s) {
  if (s == "exponential") return Family::Exponential;
  if (s == "deterministic") return Family::Deterministic;
  if (s == "uniform") return Family::Uniform;
  if (s == "gamma") return Family::Gamma;
  fail(ErrorCode::InvalidDistribution, "unknown distribution family '" + s + "'");
}

std::string to_string(Family f) {
  switch (f) {
    case Family::Exponential: return "exponential";
    case Family::Deterministic: return "deterministic";
    case Family::Uniform: return "uniform";
    case Family::Gamma: return "gamma";
  }
  return "unknown";
}

void validate(const DistributionSpec& d) {
  if (!(d.mean > 0.0) || !std::isfinite(d.mean)) fail(ErrorCode::InvalidDistribution, "mean must be finite and > 0");
  if (!(d.sd >= 0.0) || !std::isfinite(d.sd)) fail(ErrorCode::InvalidDistribution, "sd must be finite and >= 0");
  switch (d.family) {
    case Family::Exponential:
      if (std::abs(d.sd - d.mean) > 1e-12 * d.mean) {
        fail(ErrorCode::InvalidDistribution, "exponential law needs sd == mean");
      }
      break;
    case Family::Deterministic:
      if (d.sd != 0.0) fail(ErrorCode::InvalidDistribution, "deterministic law needs sd == 0");
      break;
    case Family::Uniform:
      if (!(d.mean - std::sqrt(3.0) * d.sd > 0.0)) {
        fail(ErrorCode::InvalidDistribution, "uniform law must have support bounded away from 0");
      }
      break;
    case Family::Gamma:
      if (!(d.sd > 0.0)) fail(ErrorCode::InvalidDistribution, "gamma law needs sd > 0");
      break;
  }
}

DistributionSpec with_mean(const DistributionSpec& d, double mean) {
  DistributionSpec out = d;
  out.sd = d.sd * (mean / d.mean);
  out.mean = mean;
  if (out.family == Family::Exponential) out.sd = mean;
  return out;
}

double sample(const DistributionSpec& d, rng::CounterEngine& eng) {
  switch (d.family) {
    case Family::Deterministic:
      return d.mean;
    case Family::Exponential:
      return -d.mean * std::log(rng::open_uniform(eng));
    case Family::Uniform: {
      const double half = std::sqrt(3.0) * d.sd;
      return d.mean - half + 2.0 * half * rng::open_uniform(eng);
    }
    case Family::Gamma: {
      const double shape = (d.mean * d.mean) / (d.sd * d.sd);
      const double scale = (d.sd * d.sd) / d.mean;
      std::gamma_distribution<double> dist(shape, scale);
      double x = 0.0;
      do {
        x = dist(eng);
      } while (!(x > 0.0));
      return x;
    }
  }
  return d.mean;
}

Vector RoutingDraw::one_hot(int num_buffers) const {
  Vector v = Vector::Zero(num_buffers + 1);
  v[buffer + 1] = 1.0;
  return v;
}

void validate(const NetworkSpec& spec) {
  const auto rep = validate_topology(spec.topology);
  if (!rep.ok) fail(ErrorCode::InvalidTopology, rep.violations.front());
  const auto& t = spec.topology;
  if (static_cast<int>(spec.interarrival.size()) != t.num_exogenous) {
    fail(ErrorCode::InvalidParams, "need one interarrival law per exogenous buffer");
  }
  if (static_cast<int>(spec.service.size()) != t.num_activities) {
    fail(ErrorCode::InvalidParams, "need one service law per activity");
  }
  for (const auto& d : spec.interarrival) validate(d);
  for (const auto& d : spec.service) validate(d);
  if (spec.theta1.size() != t.num_buffers || spec.q0.size() != t.num_buffers) {
    fail(ErrorCode::InvalidParams, "theta1 and q0 need one entry per buffer");
  }
  if (spec.theta2.size() != t.num_activities) fail(ErrorCode::InvalidParams, "theta2 needs one entry per activity");
  for (int i = t.num_exogenous; i < t.num_buffers; ++i) {
    if (spec.theta1[i] != 0.0) fail(ErrorCode::InvalidParams, "theta1 must be 0 for buffers without arrivals");
  }
  if (spec.q0.size() > 0 && spec.q0.minCoeff() < 0.0) fail(ErrorCode::InvalidParams, "q0 must be >= 0");
}

LimitParams limit_params(const NetworkSpec& spec) {
  const auto& t = spec.topology;
  LimitParams p;
  p.alpha = Vector::Zero(t.num_buffers);
  p.sigma_u = Vector::Zero(t.num_buffers);
  for (int i = 0; i < t.num_exogenous; ++i) {
    p.alpha[i] = 1.0 / spec.interarrival[static_cast<std::size_t>(i)].mean;
    p.sigma_u[i] = spec.interarrival[static_cast<std::size_t>(i)].sd;
  }
  p.beta = Vector(t.num_activities);
  p.sigma_v = Vector(t.num_activities);
  for (int j = 0; j < t.num_activities; ++j) {
    p.beta[j] = 1.0 / spec.service[static_cast<std::size_t>(j)].mean;
    p.sigma_v[j] = spec.service[static_cast<std::size_t>(j)].sd;
  }
  p.theta1 = spec.theta1;
  p.theta2 = spec.theta2;
  p.q0 = spec.q0;
  return p;
}

NetworkSpec relabeled(const NetworkSpec& spec, const std::vector<int>& permutation) {
  NetworkSpec out = spec;
  const int J = spec.topology.num_activities;
  if (static_cast<int>(permutation.size()) != J) fail(ErrorCode::DimensionMismatch, "permutation length");
  for (int k = 0; k < J; ++k) {
    const int j = permutation[static_cast<std::size_t>(k)];
    out.topology.C.col(k) = spec.topology.C.col(j);
    out.topology.A.col(k) = spec.topology.A.col(j);
    out.topology.P.col(k) = spec.topology.P.col(j);
    out.service[static_cast<std::size_t>(k)] = spec.service[static_cast<std::size_t>(j)];
    out.theta2[k] = spec.theta2[j];
  }
  return out;
}

PrimitiveStreams::PrimitiveStreams(const NetworkSpec& spec, double r, std::uint64_t base_seed)
    : num_buffers_(spec.topology.num_buffers), r_(r), seed_(base_seed), routing_(spec.topology.P) {
  if (!(r > 0.0)) fail(ErrorCode::InvalidParams, "scaling parameter r must be > 0");
  for (std::size_t i = 0; i < spec.interarrival.size(); ++i) {
    const double rate = 1.0 / spec.interarrival[i].mean + spec.theta1[static_cast<Eigen::Index>(i)] / r;
    if (!(rate > 0.0)) {
      std::ostringstream os;
      os << "arrival rate of buffer " << i + 1 << " is not positive at r = " << r;
      fail(ErrorCode::InvalidParams, os.str());
    }
    arrival_.push_back(with_mean(spec.interarrival[i], 1.0 / rate));
    arrival_rate_.push_back(rate);
  }
  for (std::size_t j = 0; j < spec.service.size(); ++j) {
    const double rate = 1.0 / spec.service[j].mean + spec.theta2[static_cast<Eigen::Index>(j)] / r;
    if (!(rate > 0.0)) {
      std::ostringstream os;
      os << "service rate of activity " << j + 1 << " is not positive at r = " << r;
      fail(ErrorCode::InvalidParams, os.str());
    }
    service_.push_back(with_mean(spec.service[j], 1.0 / rate));
    service_rate_.push_back(rate);
  }
}

double PrimitiveStreams::interarrival(int i, std::int64_t n) const {
  if (i < 0 || i >= num_exogenous()) {
    fail(ErrorCode::NoExogenousArrivals, "buffer " + std::to_string(i + 1) + " has no exogenous arrivals");
  }
  rng::CounterEngine eng(rng::derive_key(seed_, static_cast<std::uint64_t>(StreamKind::Arrival),
                                         static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(n)));
  return sample(arrival_[static_cast<std::size_t>(i)], eng);
}

double PrimitiveStreams::service(int j, std::int64_t n) const {
  rng::CounterEngine eng(rng::derive_key(seed_, static_cast<std::uint64_t>(StreamKind::Service),
                                         static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(n)));
  return sample(service_[static_cast<std::size_t>(j)], eng);
}

RoutingDraw PrimitiveStreams::routing(int j, std::int64_t n) const {
  const double exit_p = 1.0 - routing_.col(j).sum();
  if (exit_p >= 1.0) return {};
  rng::CounterEngine eng(rng::derive_key(seed_, static_cast<std::uint64_t>(StreamKind::Routing),
                                         static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(n)));
  const double u = rng::open_uniform(eng);
  double acc = exit_p;
  if (u < acc) return {};
  int last_positive = -1;
  for (int i = 0; i < num_buffers_; ++i) {
    const double p = routing_(i, j);
    if (p <= 0.0) continue;
    last_positive = i;
    acc += p;
    if (u < acc) return {i};
  }
  return {last_positive};
}

double PrimitiveStreams::arrival_rate(int i) const {
  return i < num_exogenous() ? arrival_rate_[static_cast<std::size_t>(i)] : 0.0;
}
double PrimitiveStreams::service_rate(int j) const { return service_rate_[static_cast<std::size_t>(j)]; }
double PrimitiveStreams::arrival_sd(int i) const {
  return i < num_exogenous() ? arrival_[static_cast<std::size_t>(i)].sd : 0.0;
}
double PrimitiveStreams::service_sd(int j) const { return service_[static_cast<std::size_t>(j)].sd; }

std::int64_t renewal_count(std::span<const double> partial_sums, double t) {
  const auto it = std::upper_bound(partial_sums.begin(), partial_sums.end(), t);
  return static_cast<std::int64_t>(it - partial_sums.begin());
}

}  // namespace htlab
