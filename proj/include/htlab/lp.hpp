#pragma once

#include <Eigen/Dense>

#include <vector>

namespace htlab::lp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Absolute feasibility / optimality tolerance used throughout the solver.
inline constexpr double kTolerance = 1e-9;

/// minimize objective·x  s.t.  eq_lhs x = eq_rhs,  ub_lhs x <= ub_rhs,  (x >= 0 if nonneg)
struct LinearProgram {
  Vector objective;
  Matrix eq_lhs;
  Vector eq_rhs;
  Matrix ub_lhs;
  Vector ub_rhs;
  bool nonneg = true;

  Eigen::Index num_vars() const { return objective.size(); }
  Eigen::Index num_constraints() const { return eq_lhs.rows() + ub_lhs.rows(); }
};

/// Builds an LP with `n` variables and no constraints; rows are appended with
/// add_eq / add_ub.
LinearProgram make_lp(const Vector& objective, bool nonneg = true);
void add_eq(LinearProgram& lp, const Vector& row, double rhs);
void add_ub(LinearProgram& lp, const Vector& row, double rhs);

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  double value = 0.0;
  Vector point;
  bool is_unique = false;
  /// Multipliers for the equality rows followed by the inequality rows
  /// (the latter are <= 0 for a minimization with <= rows).
  Vector dual_point;
};

/// Two-phase dense simplex with Bland's rule. Throws DimensionMismatch for
/// malformed input and NumericalFailure if no usable pivot exists.
LpSolution solve_lp(const LinearProgram& lp);

/// Dual objective eq_rhs·y_eq + ub_rhs·y_ub for a dual vector laid out as in
/// LpSolution::dual_point.
double dual_value(const LinearProgram& lp, const Vector& dual_point);

struct Vertex {
  Vector point;
  double value = 0.0;
};

/// Every basic feasible point of the polyhedron, each once, sorted
/// lexicographically. Brute force over active sets; limited to
/// num_vars <= 12 and num_constraints <= 12 (TooLarge otherwise).
std::vector<Vertex> enumerate_vertices(const LinearProgram& lp);

/// Throws DimensionMismatch when shapes disagree or entries are not finite.
void validate(const LinearProgram& lp);

}  // namespace htlab::lp
