// Serial reference against the OpenMP replication kernel on the N2 cost run.
#include "htlab/cost.hpp"
#include "htlab/experiment.hpp"
#include "htlab/ewf.hpp"

#include <benchmark/benchmark.h>

namespace {

htlab::ExperimentConfig n2_config() {
  htlab::ExperimentConfig c;
  auto& t = c.network.topology;
  t.num_buffers = 2;
  t.num_servers = 1;
  t.num_activities = 2;
  t.num_exogenous = 2;
  t.C = htlab::Matrix::Identity(2, 2);
  t.A = htlab::Matrix::Ones(1, 2);
  t.P = htlab::Matrix::Zero(2, 2);
  c.network.interarrival = {{htlab::Family::Exponential, 1.0, 1.0}, {htlab::Family::Exponential, 2.0, 2.0}};
  c.network.service = {{htlab::Family::Exponential, 0.5, 0.5}, {htlab::Family::Exponential, 1.0, 1.0}};
  c.network.theta1 = htlab::Vector{{-0.5, -0.25}};
  c.network.theta2 = htlab::Vector::Zero(2);
  c.network.q0 = htlab::Vector::Ones(2);
  c.policy.spec.type = "cmu";
  c.cost.gamma = 1.0;
  c.cost.h = htlab::Vector{{1.0, 3.0}};
  c.cost.horizon_scaled = 16.0;
  return c;
}

void run(benchmark::State& state, htlab::Execution ex) {
  const auto c = n2_config();
  const auto m = htlab::build_model(c);
  const auto policy = htlab::build_policy(c.policy.spec, m, c.cost);
  const auto reps = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    const auto est = htlab::monte_carlo_cost(m.spec, m.htd, *policy, 10.0, c.cost, reps, 7, ex);
    benchmark::DoNotOptimize(est.mean);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void rbm(benchmark::State& state, htlab::Execution ex) {
  htlab::Ewf1D e;
  e.drift = -0.5;
  e.variance = 1.5;
  e.hhat = htlab::PiecewiseLinear::linear(2.0);
  e.gamma = 1.0;
  for (auto _ : state) {
    const auto est = htlab::rbm_monte_carlo(e, 1.5, static_cast<std::size_t>(state.range(0)), 11, 0.01, ex);
    benchmark::DoNotOptimize(est.mean);
  }
}

void BM_CostSerial(benchmark::State& s) { run(s, htlab::Execution::Serial); }
void BM_CostParallel(benchmark::State& s) { run(s, htlab::Execution::Parallel); }
void BM_RbmSerial(benchmark::State& s) { rbm(s, htlab::Execution::Serial); }
void BM_RbmParallel(benchmark::State& s) { rbm(s, htlab::Execution::Parallel); }

}  // namespace

BENCHMARK(BM_CostSerial)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CostParallel)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RbmSerial)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RbmParallel)->Arg(256)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
