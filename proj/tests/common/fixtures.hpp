#pragma once

// Small networks shared by the unit and acceptance tests.

#include "htlab/network.hpp"
#include "htlab/primitives.hpp"

#include <vector>

namespace htlab::testing {

inline DistributionSpec expo(double mean) { return {Family::Exponential, mean, mean}; }
inline DistributionSpec det(double mean) { return {Family::Deterministic, mean, 0.0}; }

/// One buffer, one server, one activity, jobs leave after service.
inline NetworkTopology n1_topology() {
  NetworkTopology t;
  t.num_buffers = t.num_servers = t.num_activities = t.num_exogenous = 1;
  t.C = Matrix::Ones(1, 1);
  t.A = Matrix::Ones(1, 1);
  t.P = Matrix::Zero(1, 1);
  return t;
}

/// Two buffers sharing one server, no rerouting.
inline NetworkTopology n2_topology() {
  NetworkTopology t;
  t.num_buffers = 2;
  t.num_servers = 1;
  t.num_activities = 2;
  t.num_exogenous = 2;
  t.C = Matrix::Identity(2, 2);
  t.A = Matrix::Ones(1, 2);
  t.P = Matrix::Zero(2, 2);
  return t;
}

inline NetworkSpec n1_spec(DistributionSpec arrival = expo(1.0), DistributionSpec service = expo(1.0),
                           double theta1 = -1.0, double q0 = 1.0) {
  NetworkSpec s;
  s.topology = n1_topology();
  s.interarrival = {arrival};
  s.service = {service};
  s.theta1 = Vector::Constant(1, theta1);
  s.theta2 = Vector::Zero(1);
  s.q0 = Vector::Constant(1, q0);
  return s;
}

/// alpha = (1, 1/2), beta = (2, 1), all exponential.
inline NetworkSpec n2_spec() {
  NetworkSpec s;
  s.topology = n2_topology();
  s.interarrival = {expo(1.0), expo(2.0)};
  s.service = {expo(0.5), expo(1.0)};
  s.theta1 = Vector(2);
  s.theta1 << -0.5, -0.25;
  s.theta2 = Vector::Zero(2);
  s.q0 = Vector::Ones(2);
  return s;
}

inline Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index k = 0;
  for (double x : xs) v[k++] = x;
  return v;
}

inline Vector n2_h() { return vec({1.0, 3.0}); }

}  // namespace htlab::testing
