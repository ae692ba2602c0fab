#include "htlab/lp.hpp"

#include "htlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace htlab::lp {

namespace {

constexpr double kPivotFloor = 1e-12;
constexpr double kUniqueSpread = 1e-7;
constexpr int kMaxIterations = 50000;

// Standard form  M z = b, z >= 0  built from a LinearProgram. Free variables
// are split into positive and negative parts; each <= row gets a slack.
struct StandardForm {
  Matrix M;
  Vector b;
  Vector c;
  Eigen::Index n_orig = 0;
  Eigen::Index n_struct = 0;  // structural columns (after splitting)
  bool split = false;

  Vector recover(const Vector& z) const {
    Vector x(n_orig);
    for (Eigen::Index k = 0; k < n_orig; ++k) {
      x[k] = split ? z[2 * k] - z[2 * k + 1] : z[k];
    }
    return x;
  }
};

StandardForm to_standard(const LinearProgram& lp) {
  StandardForm sf;
  const auto n = lp.num_vars();
  const auto me = lp.eq_lhs.rows();
  const auto mu = lp.ub_lhs.rows();
  sf.n_orig = n;
  sf.split = !lp.nonneg;
  sf.n_struct = sf.split ? 2 * n : n;
  const auto cols = sf.n_struct + mu;
  sf.M = Matrix::Zero(me + mu, cols);
  sf.b = Vector(me + mu);
  sf.c = Vector::Zero(cols);
  auto put_row = [&](Eigen::Index row, const auto& src) {
    for (Eigen::Index k = 0; k < n; ++k) {
      if (sf.split) {
        sf.M(row, 2 * k) = src(k);
        sf.M(row, 2 * k + 1) = -src(k);
      } else {
        sf.M(row, k) = src(k);
      }
    }
  };
  for (Eigen::Index i = 0; i < me; ++i) {
    put_row(i, lp.eq_lhs.row(i));
    sf.b[i] = lp.eq_rhs[i];
  }
  for (Eigen::Index i = 0; i < mu; ++i) {
    put_row(me + i, lp.ub_lhs.row(i));
    sf.M(me + i, sf.n_struct + i) = 1.0;
    sf.b[me + i] = lp.ub_rhs[i];
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    if (sf.split) {
      sf.c[2 * k] = lp.objective[k];
      sf.c[2 * k + 1] = -lp.objective[k];
    } else {
      sf.c[k] = lp.objective[k];
    }
  }
  return sf;
}

// Dense tableau. Columns [0, ncols) are standard-form columns followed by one
// artificial per row; the final column holds the right-hand side. The last
// row holds reduced costs and minus the objective value.
class Tableau {
 public:
  Tableau(const StandardForm& sf) : ncols_(sf.M.cols()), m_(sf.M.rows()) {
    const auto total = ncols_ + m_;
    T_ = Matrix::Zero(m_ + 1, total + 1);
    basis_.resize(static_cast<std::size_t>(m_));
    active_.assign(static_cast<std::size_t>(m_), true);
    for (Eigen::Index i = 0; i < m_; ++i) {
      const double sgn = sf.b[i] < 0 ? -1.0 : 1.0;
      T_.row(i).head(ncols_) = sgn * sf.M.row(i);
      T_(i, ncols_ + i) = 1.0;
      T_(i, total) = sgn * sf.b[i];
      basis_[static_cast<std::size_t>(i)] = ncols_ + i;
    }
  }

  Eigen::Index rhs_col() const { return T_.cols() - 1; }
  bool is_artificial(Eigen::Index col) const { return col >= ncols_; }

  // Phase 1: minimize the sum of artificials. Returns the optimal sum.
  double phase_one() {
    T_.row(m_).setZero();
    for (Eigen::Index i = 0; i < m_; ++i) {
      T_.row(m_).head(ncols_) -= T_.row(i).head(ncols_);
      T_(m_, rhs_col()) -= T_(i, rhs_col());
    }
    iterate(/*allow_artificial=*/false);
    return -T_(m_, rhs_col());
  }

  // Pivot zero-level artificials out of the basis; drop rows that are redundant.
  void expel_artificials() {
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (!active_[idx(i)] || !is_artificial(basis_[idx(i)])) continue;
      Eigen::Index best = -1;
      double mag = kPivotFloor * 1e3;
      for (Eigen::Index j = 0; j < ncols_; ++j) {
        if (std::abs(T_(i, j)) > mag) {
          mag = std::abs(T_(i, j));
          best = j;
        }
      }
      if (best >= 0) {
        pivot(i, best);
      } else {
        active_[idx(i)] = false;
      }
    }
  }

  void set_objective(const Vector& c) {
    T_.row(m_).setZero();
    T_.row(m_).head(ncols_) = c.transpose();
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (!active_[idx(i)]) continue;
      const auto bcol = basis_[idx(i)];
      const double cb = bcol < ncols_ ? c[bcol] : 0.0;
      if (cb != 0.0) T_.row(m_) -= cb * T_.row(i);
    }
  }

  // Phase 2. Returns false if unbounded.
  bool phase_two() { return iterate(/*allow_artificial=*/false); }

  double objective_value() const { return -T_(m_, rhs_col()); }
  double reduced_cost(Eigen::Index j) const { return T_(m_, j); }

  Vector primal() const {
    Vector z = Vector::Zero(ncols_);
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (!active_[idx(i)]) continue;
      const auto bcol = basis_[idx(i)];
      if (bcol < ncols_) z[bcol] = T_(i, rhs_col());
    }
    return z;
  }

  std::vector<Eigen::Index> basic_columns() const {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (active_[idx(i)]) cols.push_back(basis_[idx(i)]);
    }
    return cols;
  }

  std::vector<Eigen::Index> active_rows() const {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (active_[idx(i)]) rows.push_back(i);
    }
    return rows;
  }

  bool is_basic(Eigen::Index col) const {
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (active_[idx(i)] && basis_[idx(i)] == col) return true;
    }
    return false;
  }

  Eigen::Index num_struct_cols() const { return ncols_; }

 private:
  static std::size_t idx(Eigen::Index i) { return static_cast<std::size_t>(i); }

  void pivot(Eigen::Index r, Eigen::Index e) {
    const double piv = T_(r, e);
    if (std::abs(piv) < kPivotFloor) {
      fail(ErrorCode::NumericalFailure, "pivot magnitude below 1e-12");
    }
    T_.row(r) /= piv;
    for (Eigen::Index i = 0; i <= m_; ++i) {
      if (i == r) continue;
      if (i < m_ && !active_[idx(i)]) continue;
      const double f = T_(i, e);
      if (f != 0.0) T_.row(i) -= f * T_.row(r);
    }
    basis_[idx(r)] = e;
  }

  bool iterate(bool allow_artificial) {
    const Eigen::Index limit = allow_artificial ? ncols_ + m_ : ncols_;
    for (int it = 0; it < kMaxIterations; ++it) {
      // Bland: lowest-index improving column.
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < limit; ++j) {
        if (T_(m_, j) < -kTolerance) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;
      Eigen::Index leave = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < m_; ++i) {
        if (!active_[idx(i)]) continue;
        const double a = T_(i, enter);
        if (a <= kTolerance) continue;
        const double ratio = T_(i, rhs_col()) / a;
        if (ratio < best_ratio - 1e-15 ||
            (std::abs(ratio - best_ratio) <= 1e-15 && basis_[idx(i)] < basis_[idx(leave)])) {
          best_ratio = ratio;
          leave = i;
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
      // Clean tiny negative rhs produced by round-off.
      for (Eigen::Index i = 0; i < m_; ++i) {
        if (T_(i, rhs_col()) < 0.0 && T_(i, rhs_col()) > -kTolerance) T_(i, rhs_col()) = 0.0;
      }
    }
    fail(ErrorCode::NumericalFailure, "simplex iteration limit reached");
  }

  Eigen::Index ncols_;
  Eigen::Index m_;
  Matrix T_;
  std::vector<Eigen::Index> basis_;
  std::vector<bool> active_;
};

struct CoreResult {
  LpStatus status = LpStatus::Infeasible;
  double value = 0.0;
  Vector point;
  Vector dual;
  bool has_zero_reduced_cost = false;
};

CoreResult solve_core(const LinearProgram& lp) {
  const StandardForm sf = to_standard(lp);
  CoreResult out;
  const auto m = sf.M.rows();
  if (m == 0) {
    // No constraints: optimum 0 at origin iff all costs >= 0.
    for (Eigen::Index j = 0; j < sf.c.size(); ++j) {
      if (sf.c[j] < -kTolerance) {
        out.status = LpStatus::Unbounded;
        return out;
      }
    }
    out.status = LpStatus::Optimal;
    out.point = Vector::Zero(sf.n_orig);
    out.dual = Vector(0);
    for (Eigen::Index j = 0; j < sf.c.size(); ++j) {
      if (std::abs(sf.c[j]) <= kTolerance) out.has_zero_reduced_cost = true;
    }
    return out;
  }

  Tableau tab(sf);
  const double scale = 1.0 + sf.b.lpNorm<Eigen::Infinity>();
  if (tab.phase_one() > kTolerance * scale) {
    out.status = LpStatus::Infeasible;
    return out;
  }
  tab.expel_artificials();
  tab.set_objective(sf.c);
  if (!tab.phase_two()) {
    out.status = LpStatus::Unbounded;
    return out;
  }
  out.status = LpStatus::Optimal;
  const Vector z = tab.primal();
  out.point = sf.recover(z);
  out.value = lp.objective.dot(out.point);

  for (Eigen::Index j = 0; j < tab.num_struct_cols(); ++j) {
    if (!tab.is_basic(j) && std::abs(tab.reduced_cost(j)) <= kTolerance) {
      out.has_zero_reduced_cost = true;
      break;
    }
  }

  // Duals from B' y = c_B on the rows that survived phase 1.
  const auto rows = tab.active_rows();
  const auto cols = tab.basic_columns();
  const auto k = static_cast<Eigen::Index>(rows.size());
  Matrix B(k, k);
  Vector cb(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    const auto col = cols[static_cast<std::size_t>(a)];
    cb[a] = col < sf.c.size() ? sf.c[col] : 0.0;
    for (Eigen::Index r = 0; r < k; ++r) {
      B(r, a) = col < sf.M.cols() ? sf.M(rows[static_cast<std::size_t>(r)], col) : 0.0;
    }
  }
  out.dual = Vector::Zero(m);
  if (k > 0) {
    const Vector y = B.transpose().fullPivLu().solve(cb);
    for (Eigen::Index r = 0; r < k; ++r) out.dual[rows[static_cast<std::size_t>(r)]] = y[r];
  }
  return out;
}

void check_finite(const auto& m, const char* what) {
  if (!m.allFinite()) fail(ErrorCode::DimensionMismatch, std::string(what) + " has non-finite entries");
}

}  // namespace

LinearProgram make_lp(const Vector& objective, bool nonneg) {
  LinearProgram lp;
  lp.objective = objective;
  lp.eq_lhs = Matrix(0, objective.size());
  lp.eq_rhs = Vector(0);
  lp.ub_lhs = Matrix(0, objective.size());
  lp.ub_rhs = Vector(0);
  lp.nonneg = nonneg;
  return lp;
}

namespace {
void append_row(Matrix& lhs, Vector& rhs, const Vector& row, double value) {
  if (row.size() != lhs.cols()) fail(ErrorCode::DimensionMismatch, "constraint row length");
  lhs.conservativeResize(lhs.rows() + 1, Eigen::NoChange);
  lhs.row(lhs.rows() - 1) = row.transpose();
  rhs.conservativeResize(rhs.size() + 1);
  rhs[rhs.size() - 1] = value;
}
}  // namespace

void add_eq(LinearProgram& lp, const Vector& row, double rhs) { append_row(lp.eq_lhs, lp.eq_rhs, row, rhs); }
void add_ub(LinearProgram& lp, const Vector& row, double rhs) { append_row(lp.ub_lhs, lp.ub_rhs, row, rhs); }

void validate(const LinearProgram& lp) {
  const auto n = lp.num_vars();
  if (lp.eq_lhs.cols() != n && lp.eq_lhs.rows() > 0) fail(ErrorCode::DimensionMismatch, "eq_lhs column count");
  if (lp.ub_lhs.cols() != n && lp.ub_lhs.rows() > 0) fail(ErrorCode::DimensionMismatch, "ub_lhs column count");
  if (lp.eq_lhs.rows() != lp.eq_rhs.size()) fail(ErrorCode::DimensionMismatch, "eq_rhs length");
  if (lp.ub_lhs.rows() != lp.ub_rhs.size()) fail(ErrorCode::DimensionMismatch, "ub_rhs length");
  check_finite(lp.objective, "objective");
  check_finite(lp.eq_lhs, "eq_lhs");
  check_finite(lp.eq_rhs, "eq_rhs");
  check_finite(lp.ub_lhs, "ub_lhs");
  check_finite(lp.ub_rhs, "ub_rhs");
}

namespace {
// Normalise empty matrices to the right column count so row stacking works.
LinearProgram normalised(const LinearProgram& lp) {
  LinearProgram out = lp;
  if (out.eq_lhs.rows() == 0) out.eq_lhs = Matrix(0, lp.num_vars());
  if (out.ub_lhs.rows() == 0) out.ub_lhs = Matrix(0, lp.num_vars());
  return out;
}
}  // namespace

LpSolution solve_lp(const LinearProgram& input) {
  validate(input);
  const LinearProgram lp = normalised(input);
  const CoreResult core = solve_core(lp);
  LpSolution sol;
  sol.status = core.status;
  if (core.status != LpStatus::Optimal) return sol;
  sol.value = core.value;
  sol.point = core.point;
  sol.dual_point = core.dual;

  if (!core.has_zero_reduced_cost) {
    sol.is_unique = true;
    return sol;
  }
  // A zero reduced cost means the optimal face may be more than a point:
  // minimise and maximise each coordinate over it.
  LinearProgram face = lp;
  add_ub(face, lp.objective, core.value + kTolerance * (1.0 + std::abs(core.value)));
  sol.is_unique = true;
  for (Eigen::Index k = 0; k < lp.num_vars() && sol.is_unique; ++k) {
    Vector dir = Vector::Zero(lp.num_vars());
    dir[k] = 1.0;
    face.objective = dir;
    const CoreResult lo = solve_core(face);
    face.objective = -dir;
    const CoreResult hi = solve_core(face);
    if (lo.status != LpStatus::Optimal || hi.status != LpStatus::Optimal) {
      sol.is_unique = false;
    } else if (-hi.value - lo.value > kUniqueSpread) {
      sol.is_unique = false;
    }
  }
  return sol;
}

double dual_value(const LinearProgram& lp, const Vector& dual_point) {
  const auto me = lp.eq_rhs.size();
  const auto mu = lp.ub_rhs.size();
  if (dual_point.size() != me + mu) fail(ErrorCode::DimensionMismatch, "dual vector length");
  return lp.eq_rhs.dot(dual_point.head(me)) + lp.ub_rhs.dot(dual_point.tail(mu));
}

std::vector<Vertex> enumerate_vertices(const LinearProgram& input) {
  validate(input);
  const LinearProgram lp = normalised(input);
  const auto n = lp.num_vars();
  const auto me = lp.eq_lhs.rows();
  const auto mu = lp.ub_lhs.rows();
  if (n > 12 || me + mu > 12) {
    fail(ErrorCode::TooLarge, "vertex enumeration limited to 12 variables and 12 constraints");
  }

  // Greedy independent subset of the equality rows; a dependent row whose rhs
  // is inconsistent empties the feasible set.
  std::vector<Eigen::Index> eq_rows;
  {
    Matrix acc(0, n);
    Matrix acc_aug(0, n + 1);
    for (Eigen::Index i = 0; i < me; ++i) {
      Matrix trial(acc.rows() + 1, n);
      trial << acc, lp.eq_lhs.row(i);
      Matrix trial_aug(acc_aug.rows() + 1, n + 1);
      Eigen::RowVectorXd aug(n + 1);
      aug << lp.eq_lhs.row(i), lp.eq_rhs[i];
      trial_aug << acc_aug, aug;
      Eigen::FullPivLU<Matrix> lu(trial);
      lu.setThreshold(1e-10);
      Eigen::FullPivLU<Matrix> lu_aug(trial_aug);
      lu_aug.setThreshold(1e-10);
      if (lu.rank() > acc.rows()) {
        acc = trial;
        acc_aug = trial_aug;
        eq_rows.push_back(i);
      } else if (lu_aug.rank() > acc_aug.rows()) {
        return {};
      }
    }
  }

  // Inequalities as rows g x <= d: the <= rows, then -x_k <= 0 when nonneg.
  const Eigen::Index n_ineq = mu + (lp.nonneg ? n : 0);
  Matrix G(n_ineq, n);
  Vector d(n_ineq);
  for (Eigen::Index i = 0; i < mu; ++i) {
    G.row(i) = lp.ub_lhs.row(i);
    d[i] = lp.ub_rhs[i];
  }
  if (lp.nonneg) {
    for (Eigen::Index k = 0; k < n; ++k) {
      G.row(mu + k) = -Vector::Unit(n, k).transpose();
      d[mu + k] = 0.0;
    }
  }

  const auto re = static_cast<Eigen::Index>(eq_rows.size());
  const Eigen::Index need = n - re;
  std::vector<Vertex> out;
  if (need < 0 || need > n_ineq) return out;

  auto feasible = [&](const Vector& x) {
    const double tol = kTolerance * (1.0 + x.lpNorm<Eigen::Infinity>());
    if (me > 0 && ((lp.eq_lhs * x - lp.eq_rhs).lpNorm<Eigen::Infinity>() > tol)) return false;
    if (n_ineq > 0 && ((G * x - d).maxCoeff() > tol)) return false;
    return true;
  };

  std::vector<int> choose(static_cast<std::size_t>(need));
  std::iota(choose.begin(), choose.end(), 0);
  Matrix S(n, n);
  Vector rhs(n);
  for (Eigen::Index a = 0; a < re; ++a) {
    S.row(a) = lp.eq_lhs.row(eq_rows[static_cast<std::size_t>(a)]);
    rhs[a] = lp.eq_rhs[eq_rows[static_cast<std::size_t>(a)]];
  }
  while (true) {
    for (Eigen::Index a = 0; a < need; ++a) {
      S.row(re + a) = G.row(choose[static_cast<std::size_t>(a)]);
      rhs[re + a] = d[choose[static_cast<std::size_t>(a)]];
    }
    Eigen::FullPivLU<Matrix> lu(S);
    lu.setThreshold(1e-10);
    if (n == 0 || lu.isInvertible()) {
      const Vector x = n == 0 ? Vector(0) : Vector(lu.solve(rhs));
      if (feasible(x)) {
        bool dup = false;
        for (const auto& v : out) {
          if ((v.point - x).lpNorm<Eigen::Infinity>() <= 1e-9 * (1.0 + x.lpNorm<Eigen::Infinity>())) {
            dup = true;
            break;
          }
        }
        if (!dup) out.push_back({x, lp.objective.dot(x)});
      }
    }
    // next combination
    Eigen::Index pos = need - 1;
    while (pos >= 0 && choose[static_cast<std::size_t>(pos)] == n_ineq - need + pos) --pos;
    if (pos < 0) break;
    ++choose[static_cast<std::size_t>(pos)];
    for (Eigen::Index q = pos + 1; q < need; ++q) {
      choose[static_cast<std::size_t>(q)] = choose[static_cast<std::size_t>(q - 1)] + 1;
    }
  }
  std::sort(out.begin(), out.end(), [](const Vertex& a, const Vertex& b) {
    return std::lexicographical_compare(a.point.begin(), a.point.end(), b.point.begin(), b.point.end());
  });
  return out;
}

}  // namespace htlab::lp
