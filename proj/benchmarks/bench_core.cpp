#include <benchmark/benchmark.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "robobs/hinf.hpp"
#include "robobs/magfit.hpp"
#include "robobs/mu.hpp"
#include "robobs/observer.hpp"
#include "robobs/pipeline.hpp"
#include "robobs/popsim.hpp"
#include "robobs/riccati.hpp"
#include "robobs/uncertainty.hpp"

using namespace robobs;

namespace {

Matrix randn(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = n(rng);
  return m;
}

GeneralizedPlant default_plant() {
  const PipelineConfig cfg;
  const PopulationModel pop = make_population(cfg.population);
  const StateSpace w_delta(Matrix{{-10.0}}, Matrix{{1.0}}, Matrix{{5.0}}, Matrix{{0.2}});
  const WeightSet ws = default_weights(cfg.weights, pop.nominal.inputs(),
                                       pop.nominal.outputs(), pop.measurement.rows());
  return build_generalized_plant(pop.nominal, pop.measurement, w_delta, ws);
}

}  // namespace

static void BM_CareSolve(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const Matrix a = randn(n, n, rng) / std::sqrt(double(n)) - 1.5 * Matrix::Identity(n, n);
  const Matrix b = randn(n, 2, rng);
  const Matrix q = Matrix::Identity(n, n), r = Matrix::Identity(2, 2);
  for (auto _ : state) benchmark::DoNotOptimize(care_solve(a, b, q, r));
}
BENCHMARK(BM_CareSolve)->Arg(8)->Arg(16)->Arg(32)->Arg(64);

static void BM_MuUpperPoint(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const CMatrix n = randn(10, 8, rng).cast<Complex>() +
                    Complex(0.0, 1.0) * randn(10, 8, rng).cast<Complex>();
  const BlockStructure blocks{2, 4, 6, 6};
  for (auto _ : state) benchmark::DoNotOptimize(mu_upper_point(n, blocks));
}
BENCHMARK(BM_MuUpperPoint);

static void BM_FreqResponse(benchmark::State& state) {
  const StateSpace p = default_plant().sys;
  const auto grid = FrequencyGrid::logspace_hz(0.01, 25.0, 61);
  for (auto _ : state) benchmark::DoNotOptimize(freq_response(p, grid));
}
BENCHMARK(BM_FreqResponse);

static void BM_HinfSynthesize(benchmark::State& state) {
  const GeneralizedPlant p = default_plant();
  for (auto _ : state) benchmark::DoNotOptimize(hinf_synthesize(p));
}
BENCHMARK(BM_HinfSynthesize)->Unit(benchmark::kMillisecond);

static void BM_FitMagnitude(benchmark::State& state) {
  const PopulationModel pop = make_population(PopulationSpec{});
  const auto grid = FrequencyGrid::logspace_hz(0.01, 25.0, 61);
  ResidualEnvelope env = envelope(compute_residuals(pop, grid));
  const double peak = *std::max_element(env.envelope.begin(), env.envelope.end());
  for (double& e : env.envelope) e = std::max(e, 1e-3 * peak);
  MagnitudeFitOptions opts;
  opts.order = static_cast<int>(state.range(0));
  opts.mode = FitMode::kOverbound;
  for (auto _ : state) benchmark::DoNotOptimize(fit_magnitude(grid, env.envelope, opts));
}
BENCHMARK(BM_FitMagnitude)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

static void BM_SimulateMember(benchmark::State& state) {
  const StateSpace g = make_member(default_joints());
  const std::size_t n = 16384;
  Matrix u(static_cast<Eigen::Index>(n), 2);
  const auto lines = odd_lines(n, 0.005, 20.0);
  u.col(0) = multisine(n, lines, 0.5, 1);
  u.col(1) = multisine(n, lines, 0.5, 2);
  for (auto _ : state) benchmark::DoNotOptimize(simulate(g, measurement_matrix(), u, 0.005));
}
BENCHMARK(BM_SimulateMember)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
