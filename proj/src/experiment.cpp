#include "htlab/experiment.hpp"

#include "htlab/cost.hpp"
#include "htlab/error.hpp"
#include "htlab/ewf.hpp"
#include "htlab/rng.hpp"
#include "htlab/scaling.hpp"
#include "htlab/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

namespace htlab {

namespace {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

ojson vec_json(const Vector& v) {
  ojson a = ojson::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v[k]);
  return a;
}

ojson mat_json(const Matrix& m) {
  ojson a = ojson::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vec_json(m.row(i).transpose()));
  return a;
}

std::string r_tag(double r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", r);
  return buf;
}

class Writer {
 public:
  Writer(fs::path dir, RunResult& res) : dir_(std::move(dir)), res_(res) {}

  std::ofstream open(const std::string& name) {
    std::ofstream os(dir_ / name, std::ios::binary);
    if (!os) fail(ErrorCode::ConfigError, "cannot write " + (dir_ / name).string());
    res_.artifacts.push_back(name);
    return os;
  }

  void json(const std::string& name, const ojson& j) { open(name) << j.dump(2) << '\n'; }

 private:
  fs::path dir_;
  RunResult& res_;
};

void run_analyze(const ExperimentConfig& c, const Model& m, Writer& out, std::ostream& log) {
  const HeavyTrafficData& h = m.htd;
  const int J = h.topology.num_activities;
  Vector x_orig(J);
  ojson perm = ojson::array();
  for (int k = 0; k < J; ++k) {
    const int orig = h.permutation[static_cast<std::size_t>(k)];
    x_orig[orig] = h.x_star[k];
    perm.push_back(orig + 1);
  }
  ojson j;
  j["permutation"] = perm;
  j["x_star"] = vec_json(x_orig);
  j["x_star_relabelled"] = vec_json(h.x_star);
  j["rho_star"] = h.rho_star;
  j["num_basic"] = h.num_basic;
  j["R"] = mat_json(h.R);
  j["K"] = mat_json(h.K);
  j["theta"] = vec_json(h.theta);
  j["Sigma"] = mat_json(h.Sigma);
  j["sigma_convention"] = to_string(h.convention);
  log << "x* = " << x_orig.transpose() << "  rho* = " << h.rho_star << "  B = " << h.num_basic << '\n';
  if (m.workload) {
    const WorkloadData& wd = *m.workload;
    ojson w;
    w["Lambda"] = mat_json(wd.Lambda);
    w["G"] = mat_json(wd.G);
    w["lower_norm_c"] = wd.lower_norm_c;
    ojson unit = ojson::array();
    for (int l = 0; l < wd.dim(); ++l) unit.push_back(effective_cost(wd, c.cost.h, Vector::Unit(wd.dim(), l)));
    w["hhat_unit"] = unit;
    w["w0"] = vec_json(wd.Lambda * c.network.q0);
    j["workload"] = w;
    log << "Lambda = [" << wd.Lambda << "]  hhat(e_1) = " << unit[0].get<double>() << '\n';
  } else {
    j["workload_error"] = m.workload_error;
    log << "workload: " << m.workload_error << '\n';
  }
  out.json("analysis.json", j);
}

void run_simulate(const ExperimentConfig& c, const Model& m, Writer& out, std::ostream& log) {
  const auto policy = build_policy(c.policy.spec, m, c.cost);
  const ScalingContext ctx = make_scaling_context(m.htd, m.workload ? &*m.workload : nullptr);
  ojson summary = ojson::array();
  for (std::size_t k = 0; k < c.r_list.size(); ++k) {
    const double r = c.r_list[k];
    const std::uint64_t seed = mode_seed(c.base_seed, Mode::Simulate, k);
    const PrimitiveStreams streams(m.spec, r, seed);
    const Trajectory traj = simulate(m.htd.topology, streams, *policy, initial_queue(m.spec.q0, r), c.sim_horizon);
    {
      auto os = out.open("events_r" + r_tag(r) + ".csv");
      write_event_log_csv(traj, os);
    }
    std::vector<double> uniform;
    const int n = std::max(2, c.grid_points);
    for (int g = 0; g < n; ++g) uniform.push_back(c.sim_horizon * g / (n - 1));
    {
      const ScaledTrajectory st = scale(traj, ctx, uniform);
      auto os = out.open("scaled_r" + r_tag(r) + ".csv");
      write_scaled_csv(st, os);
    }
    const ScaledTrajectory full = scale(traj, ctx);
    ojson row;
    row["r"] = r;
    row["seed"] = seed;
    row["events"] = traj.records.size() - 1;
    row["deadlocked"] = traj.deadlocked;
    row["queue_identity_residual"] = full.identity_queue_residual();
    row["control_identity_residual"] = full.identity_control_residual();
    if (m.workload) row["workload_identity_residual"] = full.identity_workload_residual();
    const TransformCheck tc = check_time_transform(time_transform(full));
    row["tau_roundtrip_error"] = tc.max_roundtrip_error;
    row["tau_lipschitz_excess"] = tc.max_lipschitz_excess;
    summary.push_back(row);
    log << "r = " << r << ": " << traj.records.size() - 1 << " events\n";
  }
  out.json("simulate.json", ojson{{"runs", summary}});
}

std::vector<CostRow> cost_rows(const ExperimentConfig& c, const Model& m, const NamedPolicy& np, std::uint64_t seed_base,
                               Execution ex, std::ostream& log) {
  const auto policy = build_policy(np.spec, m, c.cost);
  std::vector<CostRow> rows;
  for (std::size_t k = 0; k < c.r_list.size(); ++k) {
    const double r = c.r_list[k];
    CostRow row;
    row.r = r;
    row.policy = np.name;
    row.estimate = monte_carlo_cost(m.spec, m.htd, *policy, r, c.cost, c.replications,
                                    rng::derive_key(seed_base, static_cast<std::uint64_t>(k)), ex);
    log << np.name << " r = " << r << ": " << row.estimate.mean << " +- " << row.estimate.std_error << '\n';
    rows.push_back(row);
  }
  return rows;
}

void run_cost(const ExperimentConfig& c, const Model& m, Writer& out, std::ostream& log, Execution ex) {
  const std::uint64_t seed = mode_seed(c.base_seed, Mode::Cost, 0);
  std::vector<CostRow> rows = cost_rows(c, m, c.policy, seed, ex, log);
  for (const auto& p : c.compare) {
    auto more = cost_rows(c, m, p, seed, ex, log);
    rows.insert(rows.end(), more.begin(), more.end());
  }
  auto os = out.open("costs.csv");
  write_cost_csv(rows, os);
}

int run_bound(const ExperimentConfig& c, const Model& m, Writer& out, std::ostream& log, Execution ex) {
  if (!m.workload) fail(ErrorCode::NotSupported, "bound mode needs a workload matrix: " + m.workload_error);
  const WorkloadData& wd = *m.workload;
  const Ewf1D e = make_ewf_1d(m.htd, wd, c.cost);
  const double w = (wd.Lambda * m.spec.q0)[0];
  const double bound = ewf_value_1d(e, w);
  const RbmEstimate rbm = rbm_monte_carlo(e, w, c.rbm_paths, mode_seed(c.base_seed, Mode::Bound, 1000), 0.0, ex);
  log << "EWF value at w = " << w << ": " << bound << " (RBM " << rbm.mean << " +- " << rbm.se << ")\n";

  std::vector<CostRow> rows;
  std::vector<std::vector<CostRow>> blocks;
  for (std::size_t b = 0; b < c.seed_blocks; ++b) {
    blocks.push_back(cost_rows(c, m, c.policy, mode_seed(c.base_seed, Mode::Bound, b), ex, log));
  }
  std::vector<KeyedEstimate> pooled;
  for (std::size_t k = 0; k < c.r_list.size(); ++k) {
    CostEstimate p;
    double var = 0.0;
    for (const auto& blk : blocks) {
      p.mean += blk[k].estimate.mean;
      var += blk[k].estimate.std_error * blk[k].estimate.std_error;
      p.holding_term += blk[k].estimate.holding_term;
      p.idleness_term += blk[k].estimate.idleness_term;
      p.truncation_bound += blk[k].estimate.truncation_bound;
      p.replications += blk[k].estimate.replications;
    }
    const auto nb = static_cast<double>(blocks.size());
    p.mean /= nb;
    p.std_error = std::sqrt(var) / nb;
    p.holding_term /= nb;
    p.idleness_term /= nb;
    p.truncation_bound /= nb;
    pooled.push_back({c.r_list[k], p});
    rows.push_back({c.r_list[k], c.policy.name, p});
  }
  const BoundReport rep = c.r_list.size() >= 2 ? evaluate_lower_bound(pooled, w, bound, c.slack_ses) : BoundReport{};

  ojson j;
  j["w"] = w;
  j["bound"] = bound;
  ojson per_r = ojson::array();
  for (const auto& row : rep.per_r) {
    per_r.push_back(ojson{{"r", row.r}, {"mean", row.mean}, {"se", row.se}, {"gap", row.gap}, {"ok", row.ok}});
  }
  j["per_r"] = per_r;
  j["trend"] = rep.gaps_shrink ? "shrinking" : "not_shrinking";
  std::size_t shrinking = 0;
  ojson block_gaps = ojson::array();
  for (const auto& blk : blocks) {
    ojson g = ojson::array();
    for (const auto& row : blk) g.push_back(row.estimate.mean - bound);
    if (blk.back().estimate.mean <= blk.front().estimate.mean) ++shrinking;
    block_gaps.push_back(g);
  }
  j["block_gaps"] = block_gaps;
  j["block_trend_fraction"] = static_cast<double>(shrinking) / static_cast<double>(blocks.size());
  j["slack_ses"] = c.slack_ses;
  j["ok"] = rep.ok;
  j["ewf"] = ojson{{"drift", e.drift}, {"variance", e.variance}, {"hhat_slope", e.hhat.slopes[0]},
                   {"push_cost", e.push_cost}, {"gamma", e.gamma}};
  j["rbm_check"] = ojson{{"paths", rbm.paths}, {"dt", rbm.dt}, {"mean", rbm.mean}, {"se", rbm.se},
                         {"mean_half_step", rbm.mean_half_step}, {"richardson", rbm.richardson},
                         {"agrees", std::abs(rbm.mean - bound) <= 3.0 * rbm.se}};

  for (const auto& p : c.compare) {
    auto more = cost_rows(c, m, p, mode_seed(c.base_seed, Mode::Bound, 0), ex, log);
    rows.insert(rows.end(), more.begin(), more.end());
  }
  {
    auto os = out.open("costs.csv");
    write_cost_csv(rows, os);
  }
  out.json("bound.json", j);
  if (!rep.ok) {
    log << "lower bound violated\n";
    return 3;
  }
  return 0;
}

void run_validate(const ExperimentConfig& c, const Model& m, Writer& out, std::ostream& log, Execution ex) {
  const auto policy = build_policy(c.policy.spec, m, c.cost);
  const ScalingContext ctx = make_scaling_context(m.htd, m.workload ? &*m.workload : nullptr);
  const int I = m.htd.topology.num_buffers;
  ojson runs = ojson::array();
  for (std::size_t k = 0; k < c.r_list.size(); ++k) {
    const double r = c.r_list[k];
    const std::uint64_t base = mode_seed(c.base_seed, Mode::Validate, k);
    struct Rep {
      Vector x_hat;
      double sup_fluid = 0.0;
    };
    const auto reps = replicate<Rep>(
        c.replications,
        [&](std::size_t n) {
          const PrimitiveStreams streams(m.spec, r, replication_seed(base, n));
          SimOptions opt;
          opt.check_invariants = false;
          const Trajectory tr = simulate(m.htd.topology, streams, *policy, initial_queue(m.spec.q0, r), 1.0, opt);
          const ScaledTrajectory st = scale(tr, ctx, {1.0});
          return Rep{st.points()[0].X_hat, sup_fluid_queue(tr, 1.0)};
        },
        ex);
    Matrix cov = Matrix::Zero(I, I);
    Vector mean = Vector::Zero(I);
    for (const auto& rp : reps) mean += rp.x_hat;
    mean /= static_cast<double>(reps.size());
    for (const auto& rp : reps) cov += (rp.x_hat - mean) * (rp.x_hat - mean).transpose();
    cov /= static_cast<double>(reps.size() - 1);
    std::vector<double> sups;
    for (const auto& rp : reps) sups.push_back(rp.sup_fluid);
    std::sort(sups.begin(), sups.end());
    const std::size_t mid = sups.size() / 2;
    const double median = sups.size() % 2 == 1 ? sups[mid] : 0.5 * (sups[mid - 1] + sups[mid]);

    const PrimitiveStreams streams(m.spec, r, replication_seed(base, 0));
    const Trajectory tr = simulate(m.htd.topology, streams, *policy, initial_queue(m.spec.q0, r), 1.0);
    const EventRecord& last = tr.records.back();
    const MartingaleReport mr = martingale_diagnostics(streams, last.arrivals, last.completions);
    ojson mart = ojson::array();
    auto add = [&](const std::vector<MartingaleSeries>& v) {
      for (const auto& s : v) {
        mart.push_back(ojson{{"name", s.name},
                             {"steps", s.steps},
                             {"mean_increment", s.mean_increment},
                             {"se_increment", s.se_increment},
                             {"quadratic_variation", s.quadratic_variation},
                             {"predicted_qv", s.predicted_qv}});
      }
    };
    add(mr.arrival);
    add(mr.service);
    add(mr.routing);
    runs.push_back(ojson{{"r", r},
                         {"replications", reps.size()},
                         {"x_hat_mean", vec_json(mean)},
                         {"x_hat_cov", mat_json(cov)},
                         {"Sigma", mat_json(m.htd.Sigma)},
                         {"median_sup_fluid_queue", median},
                         {"martingales", mart}});
    log << "r = " << r << ": Var X_hat(1) diag = " << cov.diagonal().transpose() << " vs "
        << m.htd.Sigma.diagonal().transpose() << "; median sup |Q_bar| = " << median << '\n';
  }
  out.json("validate.json", ojson{{"runs", runs}});
}

}  // namespace

Model build_model(const ExperimentConfig& c) {
  Model m;
  m.htd = heavy_traffic_analysis(c.network.topology, limit_params(c.network), c.sigma_convention);
  m.spec = relabeled(c.network, m.htd.permutation);
  try {
    m.workload = build_workload(m.htd, c.lambda);
  } catch (const Error& e) {
    m.workload_error = e.what();
  }
  return m;
}

std::unique_ptr<Policy> build_policy(const PolicySpec& spec, const Model& m, const CostConfig& cc) {
  return make_policy(spec, m.htd.topology, cc.h, m.htd.params.beta);
}

std::uint64_t mode_seed(std::uint64_t base_seed, Mode mode, std::size_t index) {
  return rng::derive_key(base_seed, 0x6d6f6465ULL + static_cast<std::uint64_t>(mode), static_cast<std::uint64_t>(index));
}

RunResult run_experiment(const ExperimentConfig& c, const std::string& out_dir, std::ostream& log, Execution ex) {
  RunResult res;
  fs::create_directories(out_dir);
  Writer out(out_dir, res);
  const Model m = build_model(c);
  switch (c.mode) {
    case Mode::Analyze: run_analyze(c, m, out, log); break;
    case Mode::Simulate: run_simulate(c, m, out, log); break;
    case Mode::Cost: run_cost(c, m, out, log, ex); break;
    case Mode::Bound: res.exit_code = run_bound(c, m, out, log, ex); break;
    case Mode::Validate: run_validate(c, m, out, log, ex); break;
  }
  const nlohmann::json cfg = to_json(c);
  ojson manifest;
  manifest["tool"] = "htlab";
  manifest["version"] = kVersion;
  manifest["mode"] = to_string(c.mode);
  manifest["config_hash"] = fnv1a_hex(cfg.dump());
  manifest["base_seed"] = c.base_seed;
  ojson files = ojson::array();
  for (const auto& a : res.artifacts) files.push_back(a);
  manifest["artifacts"] = files;
  manifest["exit_code"] = res.exit_code;
  manifest["config"] = ojson::parse(cfg.dump());
  out.json("manifest.json", manifest);
  return res;
}

}  // namespace htlab
