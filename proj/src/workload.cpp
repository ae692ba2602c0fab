#include "htlab/workload.hpp"

#include "htlab/error.hpp"
#include "htlab/lp.hpp"

#include <cmath>
#include <sstream>
#include <vector>

namespace htlab {

namespace {

constexpr double kResidualTol = 1e-9;
constexpr double kPositiveEntry = 1e-12;

void require_positive_costs(const Vector& h, Eigen::Index n) {
  if (h.size() != n) fail(ErrorCode::DimensionMismatch, "holding cost vector length");
  if (!(h.array() > 0.0).all()) fail(ErrorCode::InvalidParams, "holding costs must be > 0");
}

lp::LinearProgram effective_lp(const WorkloadData& wd, const Vector& h, const Vector& w) {
  if (w.size() != wd.Lambda.rows()) fail(ErrorCode::DimensionMismatch, "workload vector length");
  lp::LinearProgram prog = lp::make_lp(h);
  for (Eigen::Index l = 0; l < wd.Lambda.rows(); ++l) {
    lp::add_eq(prog, wd.Lambda.row(l).transpose(), w[l]);
  }
  return prog;
}

}  // namespace

WorkloadData build_workload(const HeavyTrafficData& htd, const std::optional<Matrix>& lambda) {
  const NetworkTopology& t = htd.topology;
  const int I = t.num_buffers;
  const int J = t.num_activities;
  WorkloadData wd;
  if (lambda) {
    if (lambda->cols() != I || lambda->rows() < 1) {
      fail(ErrorCode::DimensionMismatch, "workload matrix must have I columns");
    }
    wd.Lambda = *lambda;
  } else {
    if (t.num_servers != 1 || I != J) {
      fail(ErrorCode::NoCanonicalConstruction,
           "automatic workload matrix needs a single server with one activity per buffer");
    }
    const Matrix net = htd.net_routing();  // I x J, square here
    Eigen::FullPivLU<Matrix> lu(net.transpose());
    if (!lu.isInvertible()) {
      fail(ErrorCode::NoCanonicalConstruction, "C - P' is singular (closed routing)");
    }
    const Vector mean_service = htd.params.beta.cwiseInverse();
    wd.Lambda = lu.solve(mean_service).transpose();
  }

  // G from Lambda R = G K; K has full row rank, so any consistent solve is the solution.
  const Matrix LR = wd.Lambda * htd.R;
  const Matrix Gt = htd.K.transpose().fullPivLu().solve(LR.transpose());
  wd.G = Gt.transpose();
  const double residual = (wd.G * htd.K - LR).lpNorm<Eigen::Infinity>();
  if (!(residual < kResidualTol * (1.0 + LR.lpNorm<Eigen::Infinity>()))) {
    std::ostringstream os;
    os << "Lambda R = G K has residual " << residual;
    fail(ErrorCode::InconsistentWorkload, os.str());
  }
  for (Eigen::Index r = 0; r < wd.G.rows(); ++r) {
    for (Eigen::Index c = 0; c < wd.G.cols(); ++c) {
      double& g = wd.G(r, c);
      if (g < -kPositiveEntry) {
        std::ostringstream os;
        os << "G(" << r + 1 << "," << c + 1 << ") = " << g;
        fail(ErrorCode::GNotNonnegative, os.str());
      }
      if (std::abs(g) < 1e-13) g = 0.0;
    }
  }
  for (Eigen::Index c = 0; c < wd.G.cols(); ++c) {
    if (!(wd.G.col(c).maxCoeff() >= kPositiveEntry)) {
      fail(ErrorCode::Assumption25Violated, "column " + std::to_string(c + 1) + " of G has no positive entry");
    }
  }

  // c = min { |G u|_1 : u >= 0, sum u = 1 }; |G u|_1 is linear there.
  const Eigen::Index m = wd.G.cols();
  lp::LinearProgram prog = lp::make_lp(wd.G.colwise().sum().transpose());
  lp::add_eq(prog, Vector::Ones(m), 1.0);
  const lp::LpSolution sol = lp::solve_lp(prog);
  if (sol.status != lp::LpStatus::Optimal) fail(ErrorCode::NumericalFailure, "norm bound LP failed");
  const double vertex_min = wd.G.colwise().sum().minCoeff();
  wd.lower_norm_c = std::min(sol.value, vertex_min);
  if (!(wd.lower_norm_c > 0.0)) fail(ErrorCode::Assumption25Violated, "no positive lower norm bound for G");
  return wd;
}

double effective_cost(const WorkloadData& wd, const Vector& h, const Vector& w) {
  require_positive_costs(h, wd.Lambda.cols());
  const lp::LpSolution sol = lp::solve_lp(effective_lp(wd, h, w));
  if (sol.status != lp::LpStatus::Optimal) {
    fail(ErrorCode::NotInWorkloadSpace, "workload is not of the form Lambda q with q >= 0");
  }
  return sol.value;
}

Vector lift(const WorkloadData& wd, const Vector& h, const Vector& w) {
  require_positive_costs(h, wd.Lambda.cols());
  lp::LinearProgram prog = effective_lp(wd, h, w);
  const lp::LpSolution sol = lp::solve_lp(prog);
  if (sol.status != lp::LpStatus::Optimal) {
    fail(ErrorCode::NotInWorkloadSpace, "workload is not of the form Lambda q with q >= 0");
  }
  const Eigen::Index n = h.size();
  lp::add_ub(prog, h, sol.value + lp::kTolerance * (1.0 + std::abs(sol.value)));
  // Successively pin each coordinate at its minimum over the optimal face.
  Vector q = sol.point;
  for (Eigen::Index k = 0; k < n; ++k) {
    prog.objective = Vector::Unit(n, k);
    const lp::LpSolution s = lp::solve_lp(prog);
    if (s.status != lp::LpStatus::Optimal) fail(ErrorCode::NumericalFailure, "lexicographic refinement failed");
    q = s.point;
    lp::add_ub(prog, Vector::Unit(n, k), s.value + 1e-12);
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    if (q[k] < 0.0) q[k] = 0.0;
  }
  // The cost slack lets the refinement drift off the optimal vertex by
  // O(1e-9); re-solve on the support to land on it exactly.
  std::vector<Eigen::Index> support;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (q[k] > 1e-7 * (1.0 + q.cwiseAbs().maxCoeff())) support.push_back(k);
  }
  if (!support.empty() && static_cast<Eigen::Index>(support.size()) <= wd.Lambda.rows()) {
    Matrix sub(wd.Lambda.rows(), static_cast<Eigen::Index>(support.size()));
    for (std::size_t c = 0; c < support.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = wd.Lambda.col(support[c]);
    Eigen::FullPivLU<Matrix> lu(sub);
    if (lu.rank() == sub.cols()) {
      const Vector qs = lu.solve(w);
      if ((sub * qs - w).cwiseAbs().maxCoeff() <= lp::kTolerance * (1.0 + w.cwiseAbs().maxCoeff()) &&
          qs.minCoeff() >= 0.0) {
        Vector polished = Vector::Zero(n);
        for (std::size_t c = 0; c < support.size(); ++c) polished[support[c]] = qs[static_cast<Eigen::Index>(c)];
        if (h.dot(polished) <= sol.value + lp::kTolerance * (1.0 + std::abs(sol.value))) q = polished;
      }
    }
  }
  return q;
}

EffectiveGap check_effective_inequality(const WorkloadData& wd, const Vector& h, const Vector& q) {
  EffectiveGap g;
  g.holding = h.dot(q);
  g.effective = effective_cost(wd, h, wd.Lambda * q);
  g.gap = g.holding - g.effective;
  g.ok = g.gap >= -1e-9;
  return g;
}

}  // namespace htlab
