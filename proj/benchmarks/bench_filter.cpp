#include <benchmark/benchmark.h>

#include <Eigen/Dense>
#include <vector>

#include "cebass/backsampling.hpp"
#include "cebass/filter.hpp"
#include "cebass/model.hpp"
#include "cebass/proposals.hpp"
#include "cebass/rng.hpp"
#include "cebass/simulate.hpp"

namespace {

using namespace cebass;

StateSpaceModel trend_model() {
  StateSpaceModel m;
  m.A.resize(2, 2);
  m.A << 1.0, 1.0, 0.0, 1.0;
  m.C.resize(1, 2);
  m.C << 1.0, 0.0;
  m.obs_var = Eigen::VectorXd::Constant(1, 1.0);
  m.inn_var.resize(2);
  m.inn_var << 0.01, 0.0001;
  return m;
}

StateSpaceModel dense_model(int p, int q) {
  StateSpaceModel m;
  m.A = 0.9 * Eigen::MatrixXd::Identity(q, q) + 0.05 * Eigen::MatrixXd::Ones(q, q);
  m.C = Eigen::MatrixXd::Ones(p, q);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < q; ++j) m.C(i, j) = 1.0 / (1.0 + i + j);
  }
  m.obs_var = Eigen::VectorXd::Constant(p, 1.0);
  m.inn_var = Eigen::VectorXd::Constant(q, 0.05);
  return m;
}

void BM_KalmanUpdate(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  StateSpaceModel m = dense_model(dim, dim);
  GaussianState st{Eigen::VectorXd::Zero(dim), Eigen::MatrixXd::Identity(dim, dim)};
  Eigen::VectorXd y = Eigen::VectorXd::Constant(dim, 0.7);
  for (auto _ : state) {
    auto out = kalman_update(y, st, m, NoiseScales::typical());
    benchmark::DoNotOptimize(out);
  }
}
BENCHMARK(BM_KalmanUpdate)->Arg(1)->Arg(2)->Arg(4)->Arg(8);

void BM_SampleParticles(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  StateSpaceModel m = dense_model(dim, dim);
  GaussianState st{Eigen::VectorXd::Zero(dim), Eigen::MatrixXd::Identity(dim, dim)};
  HyperParams hp = HyperParams::defaults(dim, dim);
  Eigen::VectorXd y = Eigen::VectorXd::Constant(dim, 2.0);
  Rng rng(7);
  for (auto _ : state) {
    auto draws = sample_particles(st, y, m, hp, 1, rng);
    benchmark::DoNotOptimize(draws);
  }
}
BENCHMARK(BM_SampleParticles)->Arg(1)->Arg(2)->Arg(4);

void BM_WindowPassExtend(benchmark::State& state) {
  StateSpaceModel m = trend_model();
  GaussianState st{Eigen::VectorXd::Zero(2), 0.1 * Eigen::MatrixXd::Identity(2, 2)};
  Eigen::VectorXd y = Eigen::VectorXd::Constant(1, 0.4);
  const int window = static_cast<int>(state.range(0));
  for (auto _ : state) {
    WindowPass pass(st, m);
    for (int i = 0; i < window; ++i) pass.extend(y, m);
    benchmark::DoNotOptimize(pass);
  }
  state.SetItemsProcessed(state.iterations() * window);
}
BENCHMARK(BM_WindowPassExtend)->Arg(1)->Arg(10)->Arg(40);

void BM_FilterStep(benchmark::State& state) {
  const int n_particles = static_cast<int>(state.range(0));
  const int max_horizon = static_cast<int>(state.range(1));
  StateSpaceModel m = trend_model();
  FilterOptions opts;
  opts.n_particles = n_particles;
  opts.m_descendants = 1;
  opts.max_horizon = max_horizon;
  opts.seed = 3;
  FilterConfig cfg = build_filter_config(m, opts);

  Rng gen(11);
  SimulatedStream stream = generate(m, 256, {}, gen);

  CebassFilter filter(m, cfg, default_initial_state(m));
  std::size_t t = 0;
  for (auto _ : state) {
    filter.step(stream.ys[t]);
    t = (t + 1) % stream.ys.size();
    benchmark::DoNotOptimize(filter);
  }
}
BENCHMARK(BM_FilterStep)->Args({20, 2})->Args({40, 10})->Args({40, 40});

void BM_StratifiedSubsample(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  std::vector<double> w(static_cast<std::size_t>(k));
  Rng rng(5);
  double sum = 0.0;
  for (auto& x : w) {
    x = -std::log(rng.uniform());
    sum += x;
  }
  for (auto& x : w) x /= sum;
  for (auto _ : state) {
    Rng local(42);
    auto res = stratified_subsample(w, k / 4, local);
    benchmark::DoNotOptimize(res);
  }
}
BENCHMARK(BM_StratifiedSubsample)->Arg(128)->Arg(1024)->Arg(4096);

}  // namespace

BENCHMARK_MAIN();
