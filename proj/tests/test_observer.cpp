#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "robobs/errors.hpp"
#include "robobs/interconnect.hpp"
#include "robobs/observer.hpp"

using namespace robobs;
using robobs::testing::randn;
using robobs::testing::random_stable;
using robobs::testing::rel_err;
using robobs::testing::smax;

namespace {

StateSpace integrator() {
  return StateSpace(Matrix{{0.0}}, Matrix{{1.0}}, Matrix{{1.0}}, Matrix{{0.0}});
}

StateSpace static_gain(const Matrix& g) { return StateSpace::gain(g); }

struct RandomSetup {
  StateSpace g;
  Matrix c;
  StateSpace k;
};

// Stable G (n_u -> n_x), C (n_y x n_x) and a dynamic K giving a stable observer.
RandomSetup random_setup(std::mt19937_64& rng, Eigen::Index nu = 2,
                         Eigen::Index nx = 3, Eigen::Index ny = 2) {
  for (;;) {
    RandomSetup s{random_stable(4, nu, nx, rng, false), randn(ny, nx, rng),
                  random_stable(2, ny, nu, rng, true)};
    s.k = StateSpace(s.k.a(), s.k.b(), 0.3 * s.k.c(), 0.3 * s.k.d());
    try {
      build_observer(s.g, s.c, s.k);
      return s;
    } catch (const Error&) {
    }
  }
}

// Weighted closed-loop map (w1, w2) -> (z1, z2) from the observer error
// equations evaluated directly at s.
CMatrix weighted_error_oracle(const RandomSetup& st, const WeightSet& w, Complex s) {
  const CMatrix g = evaluate(st.g, s), k = evaluate(st.k, s);
  const CMatrix c = st.c.cast<Complex>();
  const Eigen::Index nx = g.rows(), nu = g.cols(), ny = c.rows();
  const CMatrix fe =
      (CMatrix::Identity(nx, nx) + g * k * c).partialPivLu().inverse();
  const CMatrix ex_du = fe * g, ex_n = -fe * g * k;
  const CMatrix ey_du = c * ex_du, ey_n = c * ex_n + CMatrix::Identity(ny, ny);
  const CMatrix wd = evaluate(w.w_d, s), wn = evaluate(w.w_n, s);
  const CMatrix we = evaluate(w.w_e, s), wnu = evaluate(w.w_nu, s);
  CMatrix out(nx + nu, nu + ny);
  out.topLeftCorner(nx, nu) = we * ex_du * wd;
  out.topRightCorner(nx, ny) = we * ex_n * wn;
  out.bottomLeftCorner(nu, nu) = wnu * k * ey_du * wd;
  out.bottomRightCorner(nu, ny) = wnu * k * ey_n * wn;
  return out;
}

CMatrix performance_block(const StateSpace& n, const PlantDims& d, Complex s) {
  const CMatrix full = evaluate(n, s);
  return full.block(d.delta_out, d.delta_in, d.z, d.w);
}

StateSpace select_columns(Eigen::Index n_out, const std::vector<std::pair<Eigen::Index, Eigen::Index>>& map,
                          Eigen::Index n_in) {
  Matrix s = Matrix::Zero(n_out, n_in);
  for (const auto& [row, col] : map) s(row, col) = 1.0;
  return StateSpace::gain(s);
}

// Plant copy and observer side by side; output x - x_hat.
// Inputs (u, d_u, d_x, n).
StateSpace two_path_composite(const RandomSetup& st) {
  const Eigen::Index nu = st.g.inputs(), nx = st.g.outputs(), ny = st.c.rows();
  const ObserverRealization obs = build_observer(st.g, st.c, st.k);
  BlockDiagram bd;
  const int u = bd.add_input(nu), du = bd.add_input(nu);
  const int dx = bd.add_input(nx), n = bd.add_input(ny);
  const int plant = bd.add_block(st.g);
  const int est = bd.add_block(obs.sys);
  const int out = bd.add_output(nx);
  bd.input_to_block(u, plant);
  bd.input_to_block(du, plant);
  Matrix u_sel = Matrix::Zero(nu + ny, nu), y_sel = Matrix::Zero(nu + ny, ny);
  u_sel.topRows(nu).setIdentity();
  y_sel.bottomRows(ny).setIdentity();
  bd.input_to_block(u, est, u_sel);
  bd.block_to_block(plant, est, y_sel * st.c);
  bd.input_to_block(dx, est, y_sel * st.c);
  bd.input_to_block(n, est, y_sel);
  bd.block_to_output(plant, out);
  bd.input_to_output(dx, out);
  bd.block_to_output(est, out, -1.0);
  return bd.build();
}

}  // namespace

TEST_CASE("K = 0 gives the open-loop model copy") {
  std::mt19937_64 rng(3);
  const StateSpace g = random_stable(3, 2, 3, rng, false);
  const Matrix c = randn(2, 3, rng);
  const StateSpace k = static_gain(Matrix::Zero(2, 2));
  const auto obs = build_observer(g, c, k, "copy");
  CHECK(obs.source_label == "copy");
  CHECK(obs.sys.outputs() == 3);
  for (double w : {0.1, 1.0, 7.0}) {
    const CMatrix h = evaluate(obs.sys, Complex(0.0, w));
    CHECK(rel_err(h.leftCols(2), evaluate(g, Complex(0.0, w))) < 1e-12);
    CHECK(h.rightCols(2).norm() < 1e-12);
  }
}

TEST_CASE("integrator with static gain k") {
  const double k = 3.0;
  const auto obs = build_observer(integrator(), Matrix{{1.0}}, static_gain(Matrix{{k}}));
  const auto err = build_error_dynamics(integrator(), Matrix{{1.0}}, static_gain(Matrix{{k}}));
  for (double w : {0.01, 0.5, 3.0, 40.0}) {
    const Complex s(0.0, w);
    CHECK(std::abs(evaluate(obs.sys, s)(0, 1) - k / (s + k)) < 1e-12);
    CHECK(std::abs(evaluate(err, s)(0, 0) - 1.0 / (s + k)) < 1e-12);
  }
}

TEST_CASE("unstable observer is reported") {
  CHECK_THROWS_AS(build_observer(integrator(), Matrix{{1.0}}, static_gain(Matrix{{-1.0}})),
                  Error);
  try {
    build_observer(integrator(), Matrix{{1.0}}, static_gain(Matrix{{-1.0}}), "bad");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kUnstableObserver);
  }
}

TEST_CASE("inconsistent dimensions") {
  std::mt19937_64 rng(4);
  const StateSpace g = random_stable(3, 2, 3, rng);
  try {
    build_observer(g, Matrix::Identity(2, 2), static_gain(Matrix::Zero(2, 2)));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDimensionMismatch);
  }
}

TEST_CASE("error dynamics with K = 0") {
  std::mt19937_64 rng(5);
  const StateSpace g = random_stable(3, 2, 3, rng);
  const Matrix c = randn(2, 3, rng);
  const auto err = build_error_dynamics(g, c, static_gain(Matrix::Zero(2, 2)));
  for (double w : {0.2, 2.0, 20.0}) {
    const Complex s(0.0, w);
    const CMatrix e = evaluate(err, s), gs = evaluate(g, s);
    CHECK(rel_err(e.block(0, 0, 3, 2), gs) < 1e-12);
    CHECK(rel_err(e.block(0, 2, 3, 3), CMatrix::Identity(3, 3)) < 1e-12);
    CHECK(e.block(0, 5, 3, 2).norm() < 1e-12);
    CHECK(rel_err(e.block(3, 5, 2, 2), CMatrix::Identity(2, 2)) < 1e-12);
  }
}

TEST_CASE("error dynamics match the closed-form equations") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    const RandomSetup st = random_setup(rng);
    const auto err = build_error_dynamics(st.g, st.c, st.k);
    for (double w : {0.05, 0.7, 9.0}) {
      const Complex s(0.0, w);
      const CMatrix g = evaluate(st.g, s), k = evaluate(st.k, s);
      const CMatrix c = st.c.cast<Complex>();
      const CMatrix fe = (CMatrix::Identity(3, 3) + g * k * c).inverse();
      const CMatrix e = evaluate(err, s);
      CHECK(rel_err(e.block(0, 0, 3, 2), fe * g) < 1e-10);
      CHECK(rel_err(e.block(0, 2, 3, 3), fe) < 1e-10);
      CHECK(rel_err(e.block(0, 5, 3, 2), -fe * g * k) < 1e-10);
    }
  }
}

TEST_CASE("default weight shapes") {
  WeightParams p;
  const WeightSet w = default_weights(p, 2, 4, 2);
  const double two_pi = 2.0 * M_PI;
  const CMatrix lo = evaluate(w.w_d, Complex(0.0, two_pi * 0.01));
  const CMatrix hi = evaluate(w.w_d, Complex(0.0, two_pi * 100.0));
  CHECK(std::abs(std::abs(lo(0, 0)) - 1.0) < 1e-3);
  CHECK(std::abs(hi(1, 1)) <= 0.011);
  CHECK(std::abs(lo(0, 1)) == doctest::Approx(0.0));
  for (const StateSpace* s : {&w.w_d, &w.w_n, &w.w_e, &w.w_nu}) {
    CHECK(is_stable(*s));
    CHECK(s->d().allFinite());
  }
  CHECK(w.w_e.outputs() == 4);
  // W_nu is high-pass: small at DC, its gain at high frequency.
  CHECK(std::abs(evaluate(w.w_nu, Complex(0.0, 1e-3))(0, 0)) < 1e-3);
  CHECK(std::abs(evaluate(w.w_nu, Complex(0.0, 1e5))(0, 0)) ==
        doctest::Approx(p.nu_gain).epsilon(1e-3));

  p.n_floor = 0.5;
  const WeightSet wf = default_weights(p, 2, 4, 2);
  for (double f : {1e-3, 1.0, 1e3}) {
    CHECK(std::abs(evaluate(wf.w_n, Complex(0.0, f))(1, 1)) == doctest::Approx(0.5));
  }
  p.d_bw_hz = 0.0;
  CHECK_THROWS_AS(default_weights(p, 2, 4, 2), Error);
}

TEST_CASE("generalized plant with identity weights and K = 0") {
  std::mt19937_64 rng(7);
  const StateSpace g0 = random_stable(4, 2, 3, rng, false);
  const Matrix c = randn(2, 3, rng);
  WeightSet w{static_gain(Matrix::Identity(2, 2)), static_gain(Matrix::Identity(2, 2)),
              static_gain(Matrix::Identity(3, 3)), static_gain(Matrix::Identity(2, 2))};
  const auto p = build_generalized_plant(g0, c, static_gain(Matrix::Zero(1, 1)), w);
  CHECK(p.dims.delta_in + p.dims.w + p.dims.ctl == p.sys.inputs());
  CHECK(p.dims.delta_out + p.dims.z + p.dims.meas == p.sys.outputs());
  const auto n = lft_lower(p.sys, static_gain(Matrix::Zero(2, 2)));
  for (double om : {0.1, 1.0, 10.0}) {
    const Complex s(0.0, om);
    const CMatrix nv = evaluate(n, s);
    CHECK(rel_err(nv.block(2, 2, 3, 2), evaluate(g0, s)) < 1e-12);
    CHECK(nv.topRows(2).norm() < 1e-12);  // W_delta = 0
  }
}

TEST_CASE("zero performance weights silence z") {
  std::mt19937_64 rng(8);
  const RandomSetup st = random_setup(rng);
  WeightParams wp;
  wp.e_gain = 0.0;
  wp.nu_gain = 0.0;
  const WeightSet w = default_weights(wp, 2, 3, 2);
  const StateSpace wdel(Matrix{{-2.0}}, Matrix{{1.0}}, Matrix{{0.6}}, Matrix{{0.2}});
  const auto p = build_generalized_plant(st.g, st.c, wdel, w);
  const auto n = lft_lower(p.sys, st.k);
  for (double om : {0.1, 1.0, 10.0}) {
    const CMatrix nv = evaluate(n, Complex(0.0, om));
    CHECK(nv.block(p.dims.delta_out, 0, p.dims.z, nv.cols()).norm() < 1e-14);
    CHECK(nv.block(0, 0, p.dims.delta_out, p.dims.delta_in).norm() > 1e-3);
  }
}

TEST_CASE("dimension mismatch in the generalized plant") {
  std::mt19937_64 rng(9);
  const StateSpace g0 = random_stable(4, 2, 3, rng, false);
  const WeightSet w = default_weights(WeightParams{}, 2, 4, 2);  // W_e too wide
  try {
    build_generalized_plant(g0, Matrix::Identity(2, 3), static_gain(Matrix{{0.1}}), w);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDimensionMismatch);
  }
}

TEST_CASE("closed plant equals weighted error dynamics on 50 frequencies") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 5; ++trial) {
    const RandomSetup st = random_setup(rng);
    WeightParams wp;
    wp.n_floor = 0.3;
    wp.e_gain = 2.0;
    const WeightSet w = default_weights(wp, 2, 3, 2);
    const StateSpace wdel(Matrix{{-5.0}}, Matrix{{1.0}}, Matrix{{2.0}}, Matrix{{0.1}});
    const auto p = build_generalized_plant(st.g, st.c, wdel, w);
    const auto n = lft_lower(p.sys, st.k);

    // Second construction from the error-dynamics realization and weights.
    const auto err = build_error_dynamics(st.g, st.c, st.k);  // (d_u, d_x, n) -> (e_x, e_y)
    const auto inputs = series(append(w.w_d, w.w_n),
                               select_columns(7, {{0, 0}, {1, 1}, {5, 2}, {6, 3}}, 4));
    const auto outputs = append(w.w_e, series(st.k, w.w_nu));
    const auto composed = series(series(inputs, err), outputs);

    const auto grid = FrequencyGrid::logspace(0.01, 100.0, 50);
    for (double om : grid.omegas()) {
      const Complex s(0.0, om);
      const CMatrix nz = performance_block(n, p.dims, s);
      CHECK(rel_err(nz, weighted_error_oracle(st, w, s)) < 1e-8);
      CHECK(rel_err(nz, evaluate(composed, s)) < 1e-8);
    }
  }
}

TEST_CASE("noise sign flip leaves singular values unchanged") {
  std::mt19937_64 rng(11);
  const RandomSetup st = random_setup(rng);
  WeightSet w = default_weights(WeightParams{}, 2, 3, 2);
  const StateSpace wdel(Matrix{{-5.0}}, Matrix{{1.0}}, Matrix{{2.0}}, Matrix{{0.1}});
  const auto n_pos = lft_lower(build_generalized_plant(st.g, st.c, wdel, w).sys, st.k);
  w.w_n = static_gain(-w.w_n.d());
  const auto pneg = build_generalized_plant(st.g, st.c, wdel, w);
  const auto n_neg = lft_lower(pneg.sys, st.k);
  for (double om : FrequencyGrid::logspace(0.01, 100.0, 20).omegas()) {
    const Complex s(0.0, om);
    const CMatrix a = evaluate(n_pos, s), b = evaluate(n_neg, s);
    CHECK(std::abs(smax(a) - smax(b)) < 1e-10);
    const Eigen::Index c0 = pneg.dims.delta_in + 2;  // w2 columns
    CHECK(std::abs(smax(a.middleCols(c0, 2)) - smax(b.middleCols(c0, 2))) < 1e-10);
    CHECK((singular_values(a) - singular_values(b)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("state disturbance channel") {
  std::mt19937_64 rng(12);
  const RandomSetup st = random_setup(rng);
  const WeightSet w = default_weights(WeightParams{}, 2, 3, 2);
  PlantOptions opts;
  opts.state_disturbance = true;
  opts.state_disturbance_gain = 0.5;
  const auto p = build_generalized_plant(st.g, st.c, static_gain(Matrix::Zero(1, 1)), w, opts);
  CHECK(p.dims.w == 2 + 2 + 3);
  const auto n = lft_lower(p.sys, st.k);
  const auto err = build_error_dynamics(st.g, st.c, st.k);
  for (double om : {0.3, 3.0}) {
    const Complex s(0.0, om);
    const CMatrix nz = performance_block(n, p.dims, s);
    const CMatrix expect = evaluate(w.w_e, s) * evaluate(err, s).block(0, 2, 3, 3) * 0.5;
    CHECK(rel_err(nz.block(0, 4, 3, 3), expect) < 1e-10);
  }
}

TEST_CASE("two-path time-domain check") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 3; ++trial) {
    const RandomSetup st = random_setup(rng);
    const auto composite = two_path_composite(st);
    const auto err = build_error_dynamics(st.g, st.c, st.k);
    const double dt = 0.01;
    const Matrix inputs = randn(2000, 2 + 2 + 3 + 2, rng);
    const Matrix diff = simulate(discretize_zoh(composite, dt), inputs);
    const Matrix ex = simulate(discretize_zoh(err, dt), inputs.rightCols(7)).leftCols(3);
    const double scale = std::max(1.0, ex.cwiseAbs().maxCoeff());
    CHECK((diff - ex).cwiseAbs().maxCoeff() / scale < 1e-8);
  }
}

TEST_CASE("observer is unbiased without disturbances") {
  std::mt19937_64 rng(14);
  const RandomSetup st = random_setup(rng);
  const auto composite = two_path_composite(st);
  Matrix inputs = Matrix::Zero(3000, 9);
  inputs.leftCols(2) = randn(3000, 2, rng);
  const Matrix diff = simulate(discretize_zoh(composite, 0.005), inputs);
  CHECK(diff.cwiseAbs().maxCoeff() < 1e-10);
}
