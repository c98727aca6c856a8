#include <cmath>
#include <random>
#include <string>

#include "doctest.h"
#include "oracles.hpp"
#include "robobs/dk.hpp"
#include "robobs/errors.hpp"
#include "robobs/observer.hpp"

using namespace robobs;
using robobs::testing::randn;
using robobs::testing::random_stable;
using robobs::testing::rel_err;
using robobs::testing::smax;

namespace {

struct Setup {
  StateSpace g;
  Matrix c;
};

Setup small_setup() {
  std::mt19937_64 rng(21);
  return {random_stable(3, 2, 3, rng, false), randn(2, 3, rng)};
}

GeneralizedPlant plant_with(const Setup& s, const StateSpace& w_delta, double e_gain) {
  WeightParams wp;
  wp.e_gain = e_gain;
  wp.nu_gain = 0.1;
  wp.n_floor = 0.1;
  return build_generalized_plant(s.g, s.c, w_delta, default_weights(wp, 2, 3, 2));
}

DKConfig small_config(int iters) {
  DKConfig cfg;
  cfg.grid = FrequencyGrid::logspace(0.01, 100.0, 31);
  cfg.max_iters = iters;
  cfg.d_fit_order = 2;
  return cfg;
}

void check_bounds(const GeneralizedPlant& p, const DKIteration& it,
                  const FrequencyGrid& grid) {
  const auto n = closed_loop_response(p, it.synthesis.controller, grid);
  const BlockStructure b = block_structure(p.dims);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const CMatrix& m = n.values[k];
    const double lo = std::max(smax(m.topLeftCorner(b.delta_cols, b.delta_rows)),
                               smax(m.bottomRightCorner(b.perf_cols, b.perf_rows)));
    CHECK(it.ssv.mu_upper[k] >= lo - 1e-9);
    CHECK(it.ssv.mu_upper[k] <= smax(m) + 1e-9);
  }
}

}  // namespace

TEST_CASE("block structure follows the plant channels") {
  const auto p = plant_with(small_setup(), StateSpace::gain(Matrix{{0.2}}), 1.0);
  const BlockStructure b = block_structure(p.dims);
  CHECK(b.n_rows() == p.dims.delta_out + p.dims.z);
  CHECK(b.n_cols() == p.dims.delta_in + p.dims.w);
}

TEST_CASE("without uncertainty DK reduces to one H-infinity design") {
  const auto p = plant_with(small_setup(), StateSpace::gain(Matrix::Zero(1, 1)), 0.1);
  const DKConfig cfg = small_config(3);
  const DKTrace t = dk_iterate(p, block_structure(p.dims), cfg);
  REQUIRE(t.converged);
  CHECK(t.iterations.size() == 1);
  CHECK(t.final_index == 0);
  const auto n = closed_loop_response(p, t.final.controller, cfg.grid);
  const BlockStructure b = block_structure(p.dims);
  double peak = 0.0;  // performance channel only; w_delta columns are scaled away
  for (const auto& v : n.values)
    peak = std::max(peak, smax(v.bottomRightCorner(b.perf_cols, b.perf_rows)));
  CHECK(t.iterations[0].ssv.peak_mu == doctest::Approx(peak).epsilon(1e-6));
  CHECK(t.iterations[0].ssv.peak_mu < 1.0);
  CHECK(t.iterations[0].ssv.peak_mu <= 1.05 * t.iterations[0].gamma);
  check_bounds(p, t.iterations[0], cfg.grid);
}

TEST_CASE("budget exhaustion on a failing plant") {
  const auto p = plant_with(small_setup(), StateSpace::gain(Matrix{{3.0}}), 1.0);
  const DKTrace t = dk_iterate(p, block_structure(p.dims), small_config(1));
  CHECK_FALSE(t.converged);
  CHECK(t.iterations.size() == 1);
  CHECK(t.iterations[0].ssv.peak_mu > 1.0);
  CHECK(t.iterations[0].d_fit_error == 0.0);
}

TEST_CASE("best iterate is kept and bounds hold at every iteration") {
  const auto p = plant_with(small_setup(), StateSpace::gain(Matrix{{3.0}}), 1.0);
  const DKConfig cfg = small_config(3);
  const DKTrace t = dk_iterate(p, block_structure(p.dims), cfg);
  CHECK_FALSE(t.converged);
  REQUIRE(t.iterations.size() == 3);
  double best = t.iterations[0].ssv.peak_mu;
  for (const auto& it : t.iterations) {
    best = std::min(best, it.ssv.peak_mu);
    check_bounds(p, it, cfg.grid);
    CHECK(is_stable(lft_lower(p.sys, it.synthesis.controller)));
  }
  CHECK(t.iterations[t.final_index].ssv.peak_mu == best);
  CHECK(t.final.gamma == t.iterations[t.final_index].gamma);
  CHECK(t.iterations[0].d_fit_error > 0.0);
  CHECK(t.iterations[1].d_scale.states() == 2);
}

TEST_CASE("a converged trace ends at a passing iterate") {
  const StateSpace w_delta(Matrix{{-10.0}}, Matrix{{1.0}}, Matrix{{-4.0}}, Matrix{{0.6}});
  const auto p = plant_with(small_setup(), w_delta, 0.5);
  DKConfig cfg = small_config(4);
  const DKTrace t = dk_iterate(p, block_structure(p.dims), cfg);
  for (const auto& it : t.iterations) check_bounds(p, it, cfg.grid);
  if (t.converged) {
    CHECK(rp_check(t.iterations[t.final_index].ssv, cfg.stop_mu));
    CHECK(t.final_index + 1 == t.iterations.size());
  }
  CHECK(t.iterations.size() <= 4u);
}

TEST_CASE("unit scaling reproduces the plant") {
  const auto p = plant_with(small_setup(), StateSpace::gain(Matrix{{0.4}}), 1.0);
  const auto s = scale_plant(p, StateSpace::gain(Matrix::Identity(1, 1)));
  for (double w : {0.01, 1.0, 50.0}) {
    CHECK(rel_err(evaluate(s.sys, Complex(0.0, w)), evaluate(p.sys, Complex(0.0, w))) < 1e-9);
  }
}

TEST_CASE("DK traces are deterministic") {
  const auto p = plant_with(small_setup(), StateSpace::gain(Matrix{{3.0}}), 1.0);
  const DKConfig cfg = small_config(2);
  const DKTrace a = dk_iterate(p, block_structure(p.dims), cfg);
  const DKTrace b = dk_iterate(p, block_structure(p.dims), cfg);
  REQUIRE(a.iterations.size() == b.iterations.size());
  for (std::size_t i = 0; i < a.iterations.size(); ++i) {
    CHECK(a.iterations[i].ssv.mu_upper == b.iterations[i].ssv.mu_upper);
    CHECK(a.iterations[i].ssv.d_opt == b.iterations[i].ssv.d_opt);
    CHECK(a.iterations[i].gamma == b.iterations[i].gamma);
  }
}

TEST_CASE("configuration and synthesis errors") {
  const auto p = plant_with(small_setup(), StateSpace::gain(Matrix{{0.4}}), 1.0);
  DKConfig cfg = small_config(0);
  CHECK_THROWS_AS(dk_iterate(p, block_structure(p.dims), cfg), Error);
  cfg = small_config(1);
  BlockStructure wrong = block_structure(p.dims);
  wrong.perf_rows += 1;
  CHECK_THROWS_AS(dk_iterate(p, wrong, cfg), Error);

  // Unobservable unstable mode: no detectable measurement.
  const StateSpace g(Matrix{{1.0, 0.0}, {0.0, -1.0}}, Matrix{{1.0}, {1.0}},
                     Matrix{{1.0, 0.0}, {0.0, 1.0}}, Matrix::Zero(2, 1));
  WeightParams wp;
  const auto bad = build_generalized_plant(g, Matrix{{0.0, 1.0}}, StateSpace::gain(Matrix{{0.1}}),
                                           default_weights(wp, 1, 2, 1));
  try {
    dk_iterate(bad, block_structure(bad.dims), cfg);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("DK iteration 1") != std::string::npos);
  }
}
