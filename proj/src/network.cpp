#include "htlab/network.hpp"

#include "htlab/error.hpp"
#include "htlab/lp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace htlab {

namespace {

constexpr double kStochasticTol = 1e-12;
constexpr double kHeavyTrafficTol = 1e-9;

int column_one(const Matrix& m, int j) {
  for (int r = 0; r < m.rows(); ++r) {
    if (m(r, j) == 1.0) return r;
  }
  return -1;
}

}  // namespace

double NetworkTopology::exit_probability(int j) const { return 1.0 - P.col(j).sum(); }
int NetworkTopology::buffer_of(int j) const { return column_one(C, j); }
int NetworkTopology::server_of(int j) const { return column_one(A, j); }

IndexList NetworkTopology::activities_of_buffer(int i) const {
  IndexList out;
  for (int j = 0; j < num_activities; ++j) {
    if (C(i, j) == 1.0) out.push_back(j);
  }
  return out;
}

ValidationReport validate_topology(const NetworkTopology& t) {
  ValidationReport rep;
  auto bad = [&](const std::string& msg) {
    rep.ok = false;
    rep.violations.push_back(msg);
  };
  const int I = t.num_buffers, K = t.num_servers, J = t.num_activities;
  if (I < 1 || K < 1 || J < 1) {
    bad("network needs at least one buffer, server and activity");
    return rep;
  }
  if (t.C.rows() != I || t.C.cols() != J) bad("C must be I x J");
  if (t.A.rows() != K || t.A.cols() != J) bad("A must be K x J");
  if (t.P.rows() != I || t.P.cols() != J) bad("routing must be I x J");
  if (t.num_exogenous < 1 || t.num_exogenous > I) bad("number of exogenous buffers must lie in [1, I]");
  if (!rep.ok) return rep;

  auto check_01 = [&](const Matrix& m, const char* name) {
    for (int r = 0; r < m.rows(); ++r) {
      for (int c = 0; c < m.cols(); ++c) {
        if (m(r, c) != 0.0 && m(r, c) != 1.0) {
          std::ostringstream os;
          os << name << " entry (" << r + 1 << "," << c + 1 << ") is not 0/1";
          bad(os.str());
        }
      }
    }
  };
  check_01(t.C, "C");
  check_01(t.A, "A");

  for (int j = 0; j < J; ++j) {
    const double cs = t.C.col(j).sum();
    if (cs == 0.0) bad("activity " + std::to_string(j + 1) + " serves no buffer");
    else if (cs > 1.0) bad("activity " + std::to_string(j + 1) + " serves more than one buffer");
    const double as = t.A.col(j).sum();
    if (as == 0.0) bad("activity " + std::to_string(j + 1) + " has no server");
    else if (as > 1.0) bad("activity " + std::to_string(j + 1) + " uses more than one server");
  }
  for (int i = 0; i < I; ++i) {
    if (t.C.row(i).sum() < 1.0) bad("buffer " + std::to_string(i + 1) + " is served by no activity");
  }
  for (int k = 0; k < K; ++k) {
    if (t.A.row(k).sum() < 1.0) bad("server " + std::to_string(k + 1) + " runs no activity");
  }
  for (int j = 0; j < J; ++j) {
    const double s = t.P.col(j).sum();
    if (t.P.col(j).minCoeff() < 0.0 || s > 1.0 + kStochasticTol || !t.P.col(j).allFinite()) {
      bad("activity " + std::to_string(j + 1) + ": routing not stochastic");
    }
  }
  // At most one activity per (buffer, server) pair.
  for (int a = 0; a < J; ++a) {
    for (int b = a + 1; b < J; ++b) {
      if (t.buffer_of(a) >= 0 && t.buffer_of(a) == t.buffer_of(b) && t.server_of(a) >= 0 &&
          t.server_of(a) == t.server_of(b)) {
        bad("activities " + std::to_string(a + 1) + " and " + std::to_string(b + 1) +
            " share a buffer-server pair");
      }
    }
  }
  return rep;
}

ValidationReport validate_params(const NetworkTopology& t, const LimitParams& p) {
  ValidationReport rep;
  auto bad = [&](const std::string& msg) {
    rep.ok = false;
    rep.violations.push_back(msg);
  };
  const int I = t.num_buffers, J = t.num_activities;
  if (p.alpha.size() != I || p.sigma_u.size() != I || p.theta1.size() != I || p.q0.size() != I) {
    bad("buffer-indexed parameter has wrong length");
  }
  if (p.beta.size() != J || p.sigma_v.size() != J || p.theta2.size() != J) {
    bad("activity-indexed parameter has wrong length");
  }
  if (!rep.ok) return rep;
  for (int i = 0; i < I; ++i) {
    const bool exo = i < t.num_exogenous;
    if (exo && !(p.alpha[i] > 0.0)) bad("alpha_" + std::to_string(i + 1) + " must be > 0");
    if (!exo && (p.alpha[i] != 0.0 || p.sigma_u[i] != 0.0)) {
      bad("alpha and sigma_u must be 0 for non-exogenous buffer " + std::to_string(i + 1));
    }
    if (p.sigma_u[i] < 0.0) bad("sigma_u must be >= 0");
    if (p.q0[i] < 0.0) bad("q0 must be >= 0");
  }
  for (int j = 0; j < J; ++j) {
    if (!(p.beta[j] > 0.0)) bad("beta_" + std::to_string(j + 1) + " must be > 0");
    if (!(p.sigma_v[j] > 0.0)) bad("sigma_v_" + std::to_string(j + 1) + " must be > 0");
  }
  return rep;
}

SigmaConvention parse_sigma_convention(const std::string& s) {
  if (s == "classical") return SigmaConvention::Classical;
  if (s == "literal") return SigmaConvention::Literal;
  fail(ErrorCode::InvalidParams, "sigma_convention must be 'classical' or 'literal', got '" + s + "'");
}

std::string to_string(SigmaConvention c) {
  return c == SigmaConvention::Classical ? "classical" : "literal";
}

Matrix routing_covariance(const Vector& p) {
  if (p.size() > 0 && (p.minCoeff() < 0.0 || p.sum() > 1.0 + kStochasticTol)) {
    fail(ErrorCode::NotStochastic, "routing vector must be nonnegative with sum <= 1");
  }
  Matrix cov = -p * p.transpose();
  cov.diagonal() = p.array() * (1.0 - p.array());
  return cov;
}

HeavyTrafficData heavy_traffic_analysis(const NetworkTopology& t, const LimitParams& p,
                                        SigmaConvention convention) {
  if (auto rep = validate_topology(t); !rep.ok) fail(ErrorCode::InvalidTopology, rep.violations.front());
  if (auto rep = validate_params(t, p); !rep.ok) fail(ErrorCode::InvalidParams, rep.violations.front());
  const int I = t.num_buffers, K = t.num_servers, J = t.num_activities;

  const Matrix R0 = (t.C - t.P) * p.beta.asDiagonal();

  // minimize rho  s.t.  R x = alpha,  A x - rho e <= 0,  (x, rho) >= 0
  Vector obj = Vector::Zero(J + 1);
  obj[J] = 1.0;
  lp::LinearProgram prog = lp::make_lp(obj);
  for (int i = 0; i < I; ++i) {
    Vector row = Vector::Zero(J + 1);
    row.head(J) = R0.row(i).transpose();
    lp::add_eq(prog, row, p.alpha[i]);
  }
  for (int k = 0; k < K; ++k) {
    Vector row = Vector::Zero(J + 1);
    row.head(J) = t.A.row(k).transpose();
    row[J] = -1.0;
    lp::add_ub(prog, row, 0.0);
  }
  const lp::LpSolution sol = lp::solve_lp(prog);
  if (sol.status != lp::LpStatus::Optimal) {
    fail(ErrorCode::InfeasibleTraffic, "allocation LP has no optimal solution");
  }
  Vector x0 = sol.point.head(J);
  for (int j = 0; j < J; ++j) {
    if (std::abs(x0[j]) <= 1e-12) x0[j] = 0.0;
  }
  const double rho = sol.point[J];
  if (std::abs(rho - 1.0) > kHeavyTrafficTol) {
    std::ostringstream os;
    os << "rho* = " << rho << " != 1";
    fail(ErrorCode::NotHeavyTraffic, os.str());
  }
  const Vector load = t.A * x0;
  if ((load.array() - 1.0).abs().maxCoeff() > kHeavyTrafficTol) {
    fail(ErrorCode::NotHeavyTraffic, "A x* != e: some server is not fully loaded");
  }
  if (!sol.is_unique) fail(ErrorCode::NonUniqueAllocation, "allocation LP optimum is not unique");

  HeavyTrafficData htd;
  htd.convention = convention;
  htd.rho_star = rho;
  for (int j = 0; j < J; ++j) {
    if (x0[j] > kHeavyTrafficTol) htd.permutation.push_back(j);
  }
  htd.num_basic = static_cast<int>(htd.permutation.size());
  for (int j = 0; j < J; ++j) {
    if (!(x0[j] > kHeavyTrafficTol)) htd.permutation.push_back(j);
  }

  NetworkTopology& rt = htd.topology;
  rt = t;
  LimitParams& rp = htd.params;
  rp = p;
  htd.x_star = Vector(J);
  for (int k = 0; k < J; ++k) {
    const int j = htd.permutation[static_cast<std::size_t>(k)];
    rt.C.col(k) = t.C.col(j);
    rt.A.col(k) = t.A.col(j);
    rt.P.col(k) = t.P.col(j);
    rp.beta[k] = p.beta[j];
    rp.sigma_v[k] = p.sigma_v[j];
    rp.theta2[k] = p.theta2[j];
    htd.x_star[k] = k < htd.num_basic ? x0[j] : 0.0;
  }

  const int B = htd.num_basic;
  const Matrix net = rt.C - rt.P;
  htd.R = net * rp.beta.asDiagonal();
  htd.K = Matrix::Zero(K + J - B, J);
  htd.K.topRows(K) = rt.A;
  htd.K.bottomRightCorner(J - B, J - B) = -Matrix::Identity(J - B, J - B);
  htd.theta = rp.theta1 - net * rp.theta2.asDiagonal() * htd.x_star;

  Vector var_u(I), var_v(J);
  for (int i = 0; i < I; ++i) {
    var_u[i] = convention == SigmaConvention::Classical
                   ? std::pow(rp.alpha[i], 3) * rp.sigma_u[i] * rp.sigma_u[i]
                   : rp.sigma_u[i] * rp.sigma_u[i];
  }
  for (int j = 0; j < J; ++j) {
    var_v[j] = convention == SigmaConvention::Classical
                   ? std::pow(rp.beta[j], 3) * rp.sigma_v[j] * rp.sigma_v[j]
                   : rp.sigma_v[j] * rp.sigma_v[j];
  }
  Matrix Sigma = Matrix(var_u.asDiagonal());
  Sigma += net * var_v.asDiagonal() * htd.x_star.asDiagonal() * net.transpose();
  htd.sigma_phi.reserve(static_cast<std::size_t>(J));
  for (int j = 0; j < J; ++j) {
    htd.sigma_phi.push_back(routing_covariance(rt.P.col(j)));
    Sigma += htd.sigma_phi.back() * (rp.beta[j] * htd.x_star[j]);
  }
  htd.Sigma = 0.5 * (Sigma + Sigma.transpose());
  return htd;
}

}  // namespace htlab
