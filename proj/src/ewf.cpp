#include "htlab/ewf.hpp"

#include "htlab/error.hpp"
#include "htlab/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace htlab {

namespace {

constexpr std::uint64_t kRbmTag = 0x72626d31ULL;
constexpr std::uint64_t kRbmHalfTag = 0x72626d32ULL;

}  // namespace

PiecewiseLinear PiecewiseLinear::linear(double slope) {
  PiecewiseLinear f;
  f.slopes[0] = slope;
  return f;
}

double PiecewiseLinear::value_at_knot(std::size_t k) const {
  double v = 0.0;
  for (std::size_t i = 0; i < k; ++i) v += slopes[i] * (knots[i + 1] - knots[i]);
  return v;
}

double PiecewiseLinear::operator()(double w) const {
  if (knots.size() == 1) return slopes[0] * w;
  double v = 0.0;
  for (std::size_t i = 0; i < knots.size(); ++i) {
    const double end = i + 1 < knots.size() ? knots[i + 1] : std::numeric_limits<double>::infinity();
    if (w <= end) return v + slopes[i] * (w - knots[i]);
    v += slopes[i] * (end - knots[i]);
  }
  return v;
}

bool PiecewiseLinear::nondecreasing() const {
  return std::all_of(slopes.begin(), slopes.end(), [](double s) { return s >= 0.0; });
}

bool PiecewiseLinear::convex() const {
  for (std::size_t i = 1; i < slopes.size(); ++i) {
    if (slopes[i] < slopes[i - 1]) return false;
  }
  return true;
}

PiecewiseLinear PiecewiseLinear::scaled(double c) const {
  PiecewiseLinear f = *this;
  for (double& s : f.slopes) s *= c;
  return f;
}

void validate(const Ewf1D& e) {
  const auto& f = e.hhat;
  if (f.knots.empty() || f.knots.size() != f.slopes.size() || f.knots[0] != 0.0) {
    fail(ErrorCode::InvalidParams, "hhat needs matching knots and slopes starting at 0");
  }
  for (std::size_t k = 1; k < f.knots.size(); ++k) {
    if (!(f.knots[k] > f.knots[k - 1])) fail(ErrorCode::InvalidParams, "hhat knots must increase");
  }
  if (!f.nondecreasing()) fail(ErrorCode::NotSupported, "hhat decreases somewhere");
  if (!(e.push_cost >= 0.0)) fail(ErrorCode::NotSupported, "push cost must be >= 0");
  if (!(e.variance > 0.0)) fail(ErrorCode::InvalidParams, "workload variance must be > 0");
  if (!(e.gamma > 0.0)) fail(ErrorCode::InvalidParams, "gamma must be > 0");
}

Ewf1D make_ewf_1d(const HeavyTrafficData& htd, const WorkloadData& wd, const CostConfig& cc) {
  if (wd.dim() != 1) fail(ErrorCode::NotSupported, "workload dimension " + std::to_string(wd.dim()) + " > 1");
  const Vector lambda = wd.Lambda.row(0).transpose();
  if (lambda.minCoeff() < 0.0) fail(ErrorCode::NotSupported, "workload matrix has negative entries");
  Ewf1D e;
  e.drift = lambda.dot(htd.theta);
  e.variance = lambda.dot(htd.Sigma * lambda);
  e.gamma = cc.gamma;
  e.hhat = PiecewiseLinear::linear(effective_cost(wd, cc.h, Vector::Ones(1)));
  e.push_cost = 0.0;
  if (cc.p.size() > 0) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index m = 0; m < wd.G.cols(); ++m) {
      if (wd.G(0, m) > 0.0) best = std::min(best, cc.p[m] / wd.G(0, m));
    }
    e.push_cost = std::isfinite(best) ? best : 0.0;
  }
  validate(e);
  return e;
}

double ewf_value_1d(const Ewf1D& e, double w) {
  validate(e);
  if (w < 0.0) fail(ErrorCode::InvalidParams, "workload must be >= 0");
  const double g = e.gamma;
  const double mu = e.drift;
  const double a2 = 0.5 * e.variance;
  const double disc = std::sqrt(mu * mu + 4.0 * a2 * g);
  const double lp = (-mu + disc) / (2.0 * a2);
  const double lm = (-mu - disc) / (2.0 * a2);
  const auto& f = e.hhat;
  const std::size_t m = f.knots.size() - 1;

  // Unknowns: (A_k, B_k) for k < m, then B_m. Basis e^{lambda (w - b_k)} on piece k.
  const auto n = static_cast<Eigen::Index>(2 * m + 1);
  Matrix M = Matrix::Zero(n, n);
  Vector rhs = Vector::Zero(n);
  auto col_a = [](std::size_t k) { return static_cast<Eigen::Index>(2 * k); };
  auto col_b = [m](std::size_t k) { return static_cast<Eigen::Index>(k < m ? 2 * k + 1 : 2 * m); };

  // V'(0) = -push_cost.
  if (m > 0) M(0, col_a(0)) = lp;
  M(0, col_b(0)) = lm;
  rhs[0] = -e.push_cost - f.slopes[0] / g;
  for (std::size_t k = 0; k < m; ++k) {
    const double d = f.knots[k + 1] - f.knots[k];
    const double ep = std::exp(lp * d);
    const double em = std::exp(lm * d);
    const auto rv = static_cast<Eigen::Index>(1 + 2 * k);
    const auto rd = rv + 1;
    // value: particular parts differ only through mu s / g^2.
    M(rv, col_a(k)) = ep;
    M(rv, col_b(k)) = em;
    if (k + 1 < m) M(rv, col_a(k + 1)) = -1.0;
    M(rv, col_b(k + 1)) -= 1.0;
    rhs[rv] = mu * (f.slopes[k + 1] - f.slopes[k]) / (g * g);
    M(rd, col_a(k)) = lp * ep;
    M(rd, col_b(k)) = lm * em;
    if (k + 1 < m) M(rd, col_a(k + 1)) = -lp;
    M(rd, col_b(k + 1)) -= lm;
    rhs[rd] = (f.slopes[k + 1] - f.slopes[k]) / g;
  }
  const Vector coef = M.fullPivLu().solve(rhs);

  std::size_t k = 0;
  while (k < m && w >= f.knots[k + 1]) ++k;
  const double x = w - f.knots[k];
  const double s = f.slopes[k];
  double v = (f.value_at_knot(k) + s * x) / g + mu * s / (g * g);
  if (k < m) v += coef[col_a(k)] * std::exp(lp * x);
  v += coef[col_b(k)] * std::exp(lm * x);
  return v;
}

double rbm_default_horizon(double gamma) { return std::log(1e6) / gamma * 1.0001; }

double rbm_default_step(double sigma2, double gamma) {
  return 1e-3 * (sigma2 > 0.0 ? sigma2 : 1.0) / gamma;
}

RbmSample rbm_simulate(double w, double mu, double sigma2, double gamma, const PiecewiseLinear& hhat, double p,
                       double T, double dt, std::uint64_t seed, RbmPath* path) {
  if (!(dt > 0.0) || !(T >= 0.0)) fail(ErrorCode::InvalidParams, "rbm needs dt > 0 and T >= 0");
  if (!(sigma2 >= 0.0)) fail(ErrorCode::InvalidParams, "variance must be >= 0");
  if (w < 0.0) fail(ErrorCode::InvalidParams, "workload must be >= 0");
  const auto steps = static_cast<std::int64_t>(std::ceil(T / dt - 1e-9));
  const double sd = std::sqrt(sigma2 * dt);
  rng::CounterEngine eng(seed);
  std::normal_distribution<double> normal;

  double x = w;        // free process w + mu t + sigma B
  double run_min = w;  // running minimum of x
  double L = 0.0;
  double W = w;
  double disc = 1.0;
  const double step_disc = std::exp(-gamma * dt);
  const double half_disc = std::exp(-0.5 * gamma * dt);
  double prev_term = hhat(W);
  RbmSample out;
  if (path != nullptr) {
    path->t.assign(1, 0.0);
    path->W.assign(1, W);
    path->L.assign(1, 0.0);
    path->touched.assign(1, W <= 0.0 ? 1 : 0);
  }
  for (std::int64_t k = 0; k < steps; ++k) {
    const double a = x;
    const double b = a + mu * dt + sd * normal(eng);
    const double u = rng::open_uniform(eng);
    const double bridge_min = 0.5 * (a + b - std::sqrt((b - a) * (b - a) - 2.0 * sigma2 * dt * std::log(u)));
    const double L_old = L;
    run_min = std::min(run_min, bridge_min);
    L = std::max(0.0, -run_min);
    x = b;
    W = std::max(0.0, x + L);
    const double next_disc = disc * step_disc;
    const double term = hhat(W);
    out.holding += 0.5 * dt * (disc * prev_term + next_disc * term);
    out.push += p * disc * half_disc * (L - L_old);
    prev_term = term;
    disc = next_disc;
    if (path != nullptr) {
      path->t.push_back(static_cast<double>(k + 1) * dt);
      path->W.push_back(W);
      path->L.push_back(L);
      path->touched.push_back(bridge_min + L_old <= 0.0 ? 1 : 0);
    }
  }
  out.cost = out.holding + out.push;
  return out;
}

RbmEstimate rbm_monte_carlo(const Ewf1D& e, double w, std::size_t paths, std::uint64_t seed, double dt,
                            Execution ex) {
  validate(e);
  if (paths < 2) fail(ErrorCode::InvalidParams, "need at least 2 paths");
  RbmEstimate est;
  est.paths = paths;
  est.dt = dt > 0.0 ? dt : rbm_default_step(e.variance, e.gamma);
  const double T = rbm_default_horizon(e.gamma);
  auto run = [&](double step, std::uint64_t tag) {
    const auto costs = replicate<double>(
        paths,
        [&](std::size_t k) {
          return rbm_simulate(w, e.drift, e.variance, e.gamma, e.hhat, e.push_cost, T, step,
                              rng::derive_key(seed, tag, static_cast<std::uint64_t>(k)))
              .cost;
        },
        ex);
    return sample_stats(costs);
  };
  const SampleStats full = run(est.dt, kRbmTag);
  const SampleStats half = run(0.5 * est.dt, kRbmHalfTag);
  est.mean = full.mean;
  est.se = full.se;
  est.mean_half_step = half.mean;
  est.se_half_step = half.se;
  est.richardson = 2.0 * half.mean - full.mean;
  return est;
}

BoundReport evaluate_lower_bound(const std::vector<KeyedEstimate>& estimates, double w, double bound,
                                 double slack_ses) {
  if (estimates.size() < 2) fail(ErrorCode::InvalidParams, "need estimates for at least two values of r");
  BoundReport rep;
  rep.w = w;
  rep.bound = bound;
  rep.slack_ses = slack_ses;
  std::vector<KeyedEstimate> sorted = estimates;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.r < b.r; });
  for (const auto& ke : sorted) {
    BoundRow row;
    row.r = ke.r;
    row.mean = ke.estimate.mean;
    row.se = ke.estimate.std_error;
    row.gap = row.mean - bound;
    row.ok = row.mean + slack_ses * row.se >= bound;
    rep.ok = rep.ok && row.ok;
    rep.per_r.push_back(row);
  }
  rep.gaps_shrink = rep.per_r.back().gap <= rep.per_r.front().gap;
  return rep;
}

BoundReport verify_lower_bound(const std::vector<KeyedEstimate>& estimates, double w, double bound,
                               double slack_ses) {
  BoundReport rep = evaluate_lower_bound(estimates, w, bound, slack_ses);
  if (!rep.ok) {
    std::ostringstream os;
    os << "cost estimate below the bound " << bound << " by more than " << slack_ses << " SE at r =";
    for (const auto& row : rep.per_r) {
      if (!row.ok) os << ' ' << row.r;
    }
    fail(ErrorCode::BoundViolated, os.str());
  }
  return rep;
}

void write_bound_json(const BoundReport& rep, std::ostream& os) {
  nlohmann::ordered_json j;
  j["w"] = rep.w;
  j["bound"] = rep.bound;
  j["slack_ses"] = rep.slack_ses;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& row : rep.per_r) {
    nlohmann::ordered_json o;
    o["r"] = row.r;
    o["mean"] = row.mean;
    o["se"] = row.se;
    o["gap"] = row.gap;
    o["ok"] = row.ok;
    rows.push_back(o);
  }
  j["per_r"] = rows;
  j["trend"] = rep.gaps_shrink ? "shrinking" : "not_shrinking";
  j["ok"] = rep.ok;
  os << j.dump(2) << '\n';
}

}  // namespace htlab
