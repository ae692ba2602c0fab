#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace htlab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IndexList = std::vector<int>;

/// Unitary network: every activity joins exactly one buffer to one server.
/// Indices are 0-based in code; buffers [0, num_exogenous) receive external
/// arrivals.
struct NetworkTopology {
  int num_buffers = 0;     // I
  int num_servers = 0;     // K
  int num_activities = 0;  // J
  int num_exogenous = 0;   // I'
  Matrix C;                // I x J, buffer served by each activity
  Matrix A;                // K x J, server running each activity
  Matrix P;                // I x J, P(i, j) = probability a job done by j goes to buffer i

  /// Exit probability p_0^j.
  double exit_probability(int j) const;
  /// Buffer served by activity j.
  int buffer_of(int j) const;
  /// Server running activity j.
  int server_of(int j) const;
  /// Activities serving buffer i, ascending.
  IndexList activities_of_buffer(int i) const;
};

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> violations;
};

ValidationReport validate_topology(const NetworkTopology& t);

/// Limit parameters of the network sequence.
struct LimitParams {
  Vector alpha;    // I, zero beyond I'
  Vector beta;     // J, > 0
  Vector sigma_u;  // I, zero beyond I'
  Vector sigma_v;  // J, > 0
  Vector theta1;   // I
  Vector theta2;   // J
  Vector q0;       // I, >= 0
};

ValidationReport validate_params(const NetworkTopology& t, const LimitParams& p);

enum class SigmaConvention {
  /// Renewal FCLT variances alpha^3 sigma_u^2 and beta^3 sigma_v^2.
  Classical,
  /// Raw squared standard deviations.
  Literal,
};

SigmaConvention parse_sigma_convention(const std::string& s);
std::string to_string(SigmaConvention c);

/// Multinomial covariance of one routing draw restricted to buffers 1..I.
/// Throws NotStochastic if p has negative entries or sums above 1.
Matrix routing_covariance(const Vector& p);

/// Output of the structural analysis. All activity-indexed quantities use the
/// relabelled order (basic activities first); `permutation[k]` is the
/// original index of relabelled activity k.
struct HeavyTrafficData {
  NetworkTopology topology;  // relabelled
  LimitParams params;        // relabelled
  std::vector<int> permutation;
  Vector x_star;
  double rho_star = 0.0;
  int num_basic = 0;  // B
  Matrix R;           // I x J
  Matrix K;           // (K + J - B) x J
  Vector theta;       // I
  Matrix Sigma;       // I x I
  std::vector<Matrix> sigma_phi;  // J matrices, I x I
  SigmaConvention convention = SigmaConvention::Classical;

  /// Dimension K + J - B of the control process U.
  int control_dim() const { return static_cast<int>(K.rows()); }
  /// C - P'.
  Matrix net_routing() const { return topology.C - topology.P; }
};

/// Solves the allocation LP, checks the heavy traffic conditions, relabels
/// activities and assembles R, K, theta and Sigma.
HeavyTrafficData heavy_traffic_analysis(const NetworkTopology& t, const LimitParams& p,
                                        SigmaConvention convention = SigmaConvention::Classical);

}  // namespace htlab
