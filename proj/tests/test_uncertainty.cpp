#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "robobs/errors.hpp"
#include "robobs/uncertainty.hpp"

using namespace robobs;
using robobs::testing::random_stable;
using robobs::testing::rel_err;

namespace {

StateSpace lag(double k) {
  return StateSpace(Matrix{{-1.0}}, Matrix{{1.0}}, Matrix{{k}}, Matrix{{0.0}});
}

}  // namespace

TEST_CASE("residual of the nominal itself is zero") {
  std::mt19937_64 rng(1);
  const StateSpace g0 = random_stable(4, 2, 4, rng);
  const auto grid = FrequencyGrid::logspace(0.1, 10, 11);
  const auto r = residual_response(g0, g0, grid);
  for (const auto& e : r.values) CHECK(e.norm() < 1e-12);
}

TEST_CASE("constant gain mismatch") {
  const auto grid = FrequencyGrid::logspace(0.1, 10, 11);
  const auto r = residual_response(lag(1.0), lag(2.0), grid);
  for (const auto& e : r.values) CHECK(std::abs(e(0, 0) - 0.5) < 1e-12);
}

TEST_CASE("tall nominal reconstruction") {
  // Members built as G0 M(s) lie in the range of G0, where the pseudo-inverse
  // residual reconstructs them exactly.
  std::mt19937_64 rng(2);
  const StateSpace g0 = random_stable(4, 2, 4, rng);
  const StateSpace m =
      parallel(StateSpace::identity(2), random_stable(2, 2, 2, rng, false).scaled(0.3));
  const StateSpace gi = series(m, g0);
  const auto grid = FrequencyGrid::logspace_hz(0.01, 25, 61);
  const auto r = residual_response(g0, gi, grid);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Complex s(0, grid[k]);
    const CMatrix rec = evaluate(g0, s) *
                        (CMatrix::Identity(2, 2) - r.values[k]).inverse();
    CHECK(rel_err(rec, evaluate(gi, s)) < 1e-8);
  }
}

TEST_CASE("rank-deficient nominal and singular ratio") {
  const auto grid = FrequencyGrid::logspace(0.1, 10, 3);
  const StateSpace g0 = StateSpace::gain(Matrix{{1.0, 1.0}, {1.0, 1.0}});
  try {
    residual_response(g0, g0, grid);
    FAIL("expected RankDeficientNominal");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kRankDeficientNominal);
  }
  try {
    residual_response(lag(1.0), lag(0.0), grid);
    FAIL("expected SingularRatio");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kSingularRatio);
  }
}

TEST_CASE("envelope") {
  const FrequencyGrid grid({1.0, 2.0});
  FrequencyResponse a{grid, {CMatrix::Constant(1, 1, 0.1), CMatrix::Constant(1, 1, 0.5)}};
  FrequencyResponse b{grid, {CMatrix::Constant(1, 1, Complex(0, 0.3)),
                             CMatrix::Constant(1, 1, 0.2)}};
  const auto single = envelope({a});
  CHECK(single.envelope[0] == doctest::Approx(0.1));
  CHECK(single.envelope[1] == doctest::Approx(0.5));
  const auto both = envelope({a, b});
  CHECK(both.envelope[0] == doctest::Approx(0.3));
  CHECK(both.envelope[1] == doctest::Approx(0.5));
  FrequencyResponse c{FrequencyGrid({1.0, 3.0}), a.values};
  CHECK_THROWS_AS(envelope({a, c}), Error);

  std::mt19937_64 rng(4);
  const StateSpace g0 = random_stable(3, 2, 3, rng);
  std::vector<FrequencyResponse> rs;
  const auto g = FrequencyGrid::logspace(0.1, 10, 21);
  for (int i = 0; i < 4; ++i) {
    const StateSpace gi(g0.a(), g0.b(), g0.c() * (1.0 + 0.1 * (i + 1)), g0.d());
    rs.push_back(residual_response(g0, gi, g));
  }
  const auto env = envelope(rs);
  for (const auto& trace : env.per_member)
    for (std::size_t k = 0; k < trace.size(); ++k)
      CHECK(env.envelope[k] >= trace[k]);
}

TEST_CASE("overbound weight") {
  const auto grid = FrequencyGrid::logspace_hz(0.01, 25, 61);
  ResidualEnvelope flat{grid, {}, std::vector<double>(61, 0.2)};
  const auto w = fit_overbound_weight(flat, 1, 1.0);
  for (double om : grid) {
    const double m = std::abs(evaluate(w.w, Complex(0, om))(0, 0));
    CHECK(m >= 0.2 - 1e-9);
    CHECK(m <= 0.21);
  }
  CHECK(is_minimum_phase(w.w));

  ResidualEnvelope bad{grid, {}, std::vector<double>(61, 0.2)};
  bad.envelope[3] = -1.0;
  CHECK_THROWS_AS(fit_overbound_weight(bad, 2, 1.0), Error);

  ResidualEnvelope zero{grid, {}, std::vector<double>(61, 0.0)};
  zero.envelope[30] = 0.5;
  const auto wz = fit_overbound_weight(zero, 2, 1.2);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double m = std::abs(evaluate(wz.w, Complex(0, grid[k]))(0, 0));
    CHECK(m >= 1.2 * std::max(zero.envelope[k], kEnvelopeFloor) - 1e-9);
  }
}
