#include "robobs/magfit.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include <Eigen/Eigenvalues>

#include "robobs/errors.hpp"
#include "robobs/lp.hpp"

namespace robobs {
namespace {

// Basis row [1, p_1/(x+p_1), ..., p_n/(x+p_n)].
Vector basis_row(double x, const Vector& p) {
  Vector r(p.size() + 1);
  r(0) = 1.0;
  for (Eigen::Index j = 0; j < p.size(); ++j) r(j + 1) = p(j) / (x + p(j));
  return r;
}

struct Rational {
  Vector a, b;  // numerator / denominator coefficients in the basis
};

// One feasibility LP at band t: maximize the common margin s.
std::optional<Rational> feasible_at(const std::vector<double>& xs,
                                    const std::vector<double>& tsq,
                                    const std::vector<double>& xpos,
                                    const Vector& p, double t, FitMode mode) {
  const Eigen::Index nb = p.size() + 1;
  const Eigen::Index nv = 2 * nb + 1;  // a, b, s
  const Eigen::Index k = static_cast<Eigen::Index>(xs.size());
  const Eigen::Index kp = static_cast<Eigen::Index>(xpos.size());
  const Eigen::Index rows = 2 * k + 2 * kp + 3 + 1;
  Matrix a_ub = Matrix::Zero(rows, nv);
  Vector b_ub = Vector::Zero(rows);
  Eigen::Index r = 0;
  auto add = [&](const Vector& num, const Vector& den) {
    // num' a + den' b + margin <= 0 with the margin scaled by the row norm.
    a_ub.block(r, 0, 1, nb) = num.transpose();
    a_ub.block(r, nb, 1, nb) = den.transpose();
    const double nrm = std::sqrt(num.squaredNorm() + den.squaredNorm());
    a_ub.row(r).head(2 * nb) /= nrm;
    a_ub(r, 2 * nb) = 1.0;
    ++r;
  };
  const double hi = std::exp(t);
  const double lo = mode == FitMode::kOverbound ? 1.0 : std::exp(-t);
  for (Eigen::Index i = 0; i < k; ++i) {
    const Vector phi = basis_row(xs[i], p);
    add(-phi, lo * tsq[i] * phi);   // N >= lo T D
    add(phi, -hi * tsq[i] * phi);   // N <= hi T D
  }
  for (Eigen::Index i = 0; i < kp; ++i) {
    const Vector phi = basis_row(xpos[i], p);
    add(-phi, Vector::Zero(nb));
    add(Vector::Zero(nb), -phi);
  }
  // Behaviour at x -> infinity: a0 >= 0, b0 >= 0, a0 <= hi T_last b0.
  Vector e0 = Vector::Zero(nb);
  e0(0) = 1.0;
  add(-e0, Vector::Zero(nb));
  add(Vector::Zero(nb), -e0);
  add(e0, -hi * tsq.back() * e0);
  // Margin cap keeps the program bounded.
  a_ub(r, 2 * nb) = 1.0;
  b_ub(r) = 1.0;
  ++r;

  LinearProgram lp;
  lp.c = Vector::Zero(nv);
  lp.c(2 * nb) = -1.0;
  lp.a_ub = a_ub;
  lp.b_ub = b_ub;
  // Mean of D over the fit grid equals one.
  lp.a_eq = Matrix::Zero(1, nv);
  for (Eigen::Index i = 0; i < k; ++i) {
    lp.a_eq.block(0, nb, 1, nb) += basis_row(xs[i], p).transpose() / double(k);
  }
  lp.b_eq = Vector::Ones(1);
  const LpResult res = solve_lp(lp);
  if (res.status != LpStatus::kOptimal || !(res.x(2 * nb) > 1e-9)) {
    return std::nullopt;
  }
  Rational out{res.x.head(nb), res.x.segment(nb, nb)};
  // The basis is poorly conditioned over wide ranges; re-check the solution
  // directly rather than trusting the solver tolerance.
  for (double x : xpos) {
    const Vector phi = basis_row(x, p);
    if (!(phi.dot(out.a) > 0.0) || !(phi.dot(out.b) > 0.0)) return std::nullopt;
  }
  for (Eigen::Index i = 0; i < k; ++i) {
    const Vector phi = basis_row(xs[i], p);
    const double n = phi.dot(out.a), d = phi.dot(out.b);
    if (!(n > 0.0 && d > 0.0)) return std::nullopt;
    const double ratio = n / (d * tsq[i]);
    if (ratio > hi * (1.0 + 1e-6) || ratio < lo * (1.0 - 1e-6)) return std::nullopt;
  }
  return out;
}

// Roots in x of c0 + sum c_j p_j / (x + p_j) from the arrowhead pencil.
std::vector<Complex> barycentric_roots(const Vector& c, const Vector& p) {
  const Eigen::Index n = p.size();
  std::vector<Complex> out;
  if (n == 0) return out;
  const double scale = c.cwiseAbs().maxCoeff();
  Matrix e = Matrix::Zero(n + 1, n + 1), b = Matrix::Zero(n + 1, n + 1);
  e(0, 0) = c(0) / scale;
  for (Eigen::Index j = 0; j < n; ++j) {
    e(0, j + 1) = c(j + 1) * p(j) / scale;
    e(j + 1, 0) = 1.0;
    e(j + 1, j + 1) = -p(j);
    b(j + 1, j + 1) = 1.0;
  }
  Eigen::GeneralizedEigenSolver<Matrix> ges(e, b, false);
  const auto& alphas = ges.alphas();
  const auto& betas = ges.betas();
  const double big = 1e8 * (1.0 + p.maxCoeff());
  for (Eigen::Index i = 0; i < alphas.size(); ++i) {
    if (std::abs(betas(i)) < 1e-14 * std::abs(alphas(i))) continue;
    const Complex x = alphas(i) / betas(i);
    if (std::abs(x) > big) continue;
    out.push_back(x);
  }
  return out;
}

// Drops zero/pole pairs that coincide to within 1e-3 of max(|p|, w_lo);
// below the band such pairs have no effect on the fitted magnitude. Real
// roots pair with real roots, complex roots with their conjugates.
void cancel_common(std::vector<Complex>& zeros, std::vector<Complex>& poles,
                   double w_lo) {
  std::vector<char> zdrop(zeros.size(), 0), pdrop(poles.size(), 0);
  auto find_conj = [](const std::vector<Complex>& v, std::vector<char>& drop,
                      Complex q) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!drop[i] && v[i] == std::conj(q)) {
        drop[i] = 1;
        return;
      }
    }
  };
  for (std::size_t i = 0; i < poles.size(); ++i) {
    const Complex pq = poles[i];
    if (pdrop[i] || pq.imag() < 0.0) continue;
    std::size_t best = zeros.size();
    double dist = 1e300;
    for (std::size_t j = 0; j < zeros.size(); ++j) {
      const Complex zq = zeros[j];
      if (zdrop[j] || zq.imag() < 0.0 || ((zq.imag() == 0.0) != (pq.imag() == 0.0))) continue;
      const double d = std::abs(zq - pq);
      if (d < dist) {
        dist = d;
        best = j;
      }
    }
    if (best < zeros.size() && dist <= 1e-3 * std::max(std::abs(pq), w_lo)) {
      pdrop[i] = 1;
      zdrop[best] = 1;
      if (pq.imag() > 0.0) {
        find_conj(poles, pdrop, pq);
        find_conj(zeros, zdrop, zeros[best]);
      }
    }
  }
  auto keep = [](std::vector<Complex>& v, const std::vector<char>& drop) {
    std::vector<Complex> out;
    for (std::size_t i = 0; i < v.size(); ++i)
      if (!drop[i]) out.push_back(v[i]);
    v = std::move(out);
  };
  keep(zeros, zdrop);
  keep(poles, pdrop);
}

// Keeps roots clear of the origin and the imaginary axis. Real roots below
// 0.1 w_lo or above 10 w_hi are cancelled in pairs; lone slow ones are
// clamped to 0.1 w_lo; complex roots get at least 1e-3 damping; far poles
// are dropped while the fit is strictly proper.
void condition_roots(std::vector<Complex>& zeros, std::vector<Complex>& poles,
                     double w_lo, double w_hi, bool biproper) {
  const double floor = 1e-1 * w_lo;
  const double far = 1e1 * w_hi;
  auto reals_beyond = [&](const std::vector<Complex>& v, bool below) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double m = std::abs(v[i]);
      if (v[i].imag() == 0.0 && (below ? m < floor : m > far)) idx.push_back(i);
    }
    return idx;
  };
  std::vector<char> zdrop(zeros.size(), 0), pdrop(poles.size(), 0);
  for (bool below : {true, false}) {
    const std::vector<std::size_t> zs = reals_beyond(zeros, below);
    const std::vector<std::size_t> ps = reals_beyond(poles, below);
    for (std::size_t i = 0; i < std::min(zs.size(), ps.size()); ++i) {
      zdrop[zs[i]] = 1;
      pdrop[ps[i]] = 1;
    }
  }
  auto keep = [](std::vector<Complex>& v, const std::vector<char>& drop) {
    std::vector<Complex> out;
    for (std::size_t i = 0; i < v.size(); ++i)
      if (!drop[i]) out.push_back(v[i]);
    v = std::move(out);
  };
  keep(zeros, zdrop);
  keep(poles, pdrop);
  auto clamp = [&](std::vector<Complex>& v) {
    for (Complex& q : v) {
      if (q.imag() == 0.0) {
        if (std::abs(q) < floor) q = Complex(-floor, 0.0);
      } else if (-q.real() < 1e-3 * std::abs(q)) {
        q = Complex(-1e-3 * std::abs(q), q.imag());
      }
    }
  };
  clamp(zeros);
  clamp(poles);
  while (poles.size() > zeros.size()) {
    auto it = std::find_if(poles.begin(), poles.end(), [&](const Complex& q) {
      return q.imag() == 0.0 && std::abs(q) > far;
    });
    if (it == poles.end()) break;
    poles.erase(it);
  }
  if (biproper) {
    while (zeros.size() < poles.size()) zeros.emplace_back(-far, 0.0);
  }
}

// Left half-plane s-roots for the factors (x - r), x = -s^2, with roots on
// or right of the axis pulled to Re s = -eps.
std::vector<Complex> to_lhp(const std::vector<Complex>& xr, double eps) {
  std::vector<Complex> out;
  for (const Complex& r : xr) {
    Complex q = -std::sqrt(-r);
    if (q.real() > -eps) q = Complex(-eps, q.imag());
    out.push_back(q);
  }
  // Enforce exact conjugate pairing.
  std::vector<Complex> clean;
  std::vector<char> used(out.size(), 0);
  const double tol = 1e-6;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (used[i]) continue;
    used[i] = 1;
    const Complex q = out[i];
    if (std::abs(q.imag()) <= tol * (1.0 + std::abs(q))) {
      clean.emplace_back(q.real(), 0.0);
      continue;
    }
    std::size_t best = out.size();
    double dist = 1e300;
    for (std::size_t j = i + 1; j < out.size(); ++j) {
      if (used[j]) continue;
      const double d = std::abs(out[j] - std::conj(q));
      if (d < dist) {
        dist = d;
        best = j;
      }
    }
    if (best < out.size() && dist <= 1e-4 * (1.0 + std::abs(q))) {
      used[best] = 1;
      const Complex avg = 0.5 * (q + std::conj(out[best]));
      clean.push_back(avg);
      clean.push_back(std::conj(avg));
    } else {
      clean.emplace_back(q.real(), 0.0);
    }
  }
  return clean;
}

// Splits roots into real-coefficient polynomial factors of degree 1 and 2,
// returned as coefficient pairs (c1, c0) of s^2 + c1 s + c0, or (nan, c0)
// for the monic linear factor s + c0.
struct Factor {
  int degree;
  double c1, c0;
};

std::vector<Factor> quadratic_factors(const std::vector<Complex>& roots) {
  std::vector<Factor> out;
  std::vector<double> reals;
  for (std::size_t i = 0; i < roots.size(); ++i) {
    const Complex q = roots[i];
    if (q.imag() == 0.0) {
      reals.push_back(q.real());
    } else if (q.imag() > 0.0) {
      out.push_back({2, -2.0 * q.real(), std::norm(q)});
    }
  }
  std::sort(reals.begin(), reals.end());
  std::size_t i = 0;
  for (; i + 1 < reals.size(); i += 2) {
    out.push_back({2, -(reals[i] + reals[i + 1]), reals[i] * reals[i + 1]});
  }
  if (i < reals.size()) out.push_back({1, 0.0, -reals[i]});
  return out;
}

}  // namespace

StateSpace realize_zpk(const std::vector<Complex>& zeros,
                       const std::vector<Complex>& poles, double dc_gain) {
  if (zeros.size() > poles.size()) {
    throw Error(ErrorKind::kInvalidArgument, "realize_zpk: improper");
  }
  for (const auto& q : zeros) {
    if (!(q.real() < 0.0)) {
      throw Error(ErrorKind::kInvalidArgument, "realize_zpk: zero not in LHP");
    }
  }
  for (const auto& q : poles) {
    if (!(q.real() < 0.0)) {
      throw Error(ErrorKind::kInvalidArgument, "realize_zpk: pole not in LHP");
    }
  }
  std::vector<Factor> zf = quadratic_factors(zeros);
  std::vector<Factor> pf = quadratic_factors(poles);
  // Second-order pole factors first so a leftover linear zero can share one.
  std::stable_sort(pf.begin(), pf.end(),
                   [](const Factor& a, const Factor& b) { return a.degree > b.degree; });
  std::stable_sort(zf.begin(), zf.end(),
                   [](const Factor& a, const Factor& b) { return a.degree > b.degree; });

  // Factor magnitude: root modulus or natural frequency.
  auto mag = [](const Factor& f) { return f.degree == 2 ? std::sqrt(f.c0) : f.c0; };
  StateSpace out = StateSpace::gain(Matrix::Identity(1, 1));
  double gain = dc_gain;
  std::vector<char> zused(zf.size(), 0);
  for (const Factor& den : pf) {
    // Numerator factor of the same degree closest in magnitude, else the
    // closest of lower degree.
    int pick = -1;
    for (int want : {den.degree, den.degree - 1}) {
      double dist = 1e300;
      for (std::size_t i = 0; i < zf.size(); ++i) {
        if (zused[i] || zf[i].degree != want) continue;
        const double d = std::abs(std::log(mag(zf[i]) / mag(den)));
        if (d < dist) {
          dist = d;
          pick = static_cast<int>(i);
        }
      }
      if (pick >= 0) break;
    }
    // Numerator n2 s^2 + n1 s + n0 normalized to unit DC.
    double n2 = 0.0, n1 = 0.0;
    if (pick >= 0) {
      zused[pick] = 1;
      const Factor& z = zf[pick];
      if (z.degree == 2) {
        n2 = 1.0 / z.c0;
        n1 = z.c1 / z.c0;
      } else {
        n1 = 1.0 / z.c0;
      }
    }
    StateSpace sec;
    if (den.degree == 1) {
      // (n1 s + 1) / (s/c0 + 1) with pole -c0.
      const double a0 = den.c0;
      const double d = n1 * a0;
      sec = StateSpace(Matrix::Constant(1, 1, -a0), Matrix::Constant(1, 1, 1.0),
                       Matrix::Constant(1, 1, a0 * (1.0 - d)),
                       Matrix::Constant(1, 1, d));
    } else {
      // (n2 s^2 + n1 s + 1) * c0 / (s^2 + c1 s + c0), with the state
      // scaled by the natural frequency.
      const double c0 = den.c0, c1 = den.c1, wn = std::sqrt(c0);
      const double b2 = n2 * c0, b1 = n1 * c0, b0 = c0;
      Matrix a{{0.0, wn}, {-wn, -c1}};
      Matrix b{{0.0}, {1.0}};
      Matrix c{{(b0 - b2 * c0) / wn, b1 - b2 * c1}};
      sec = StateSpace(a, b, c, Matrix::Constant(1, 1, b2));
    }
    // Keep each section's larger end gain at one.
    const double hf = std::abs(sec.d()(0, 0));
    if (hf > 1.0) {
      sec = sec.scaled(1.0 / hf);
      gain *= hf;
    }
    out = series(out, sec);
  }
  for (std::size_t i = 0; i < zf.size(); ++i) {
    if (!zused[i]) {
      throw Error(ErrorKind::kInvalidArgument,
                  "realize_zpk: could not pair numerator factors");
    }
  }
  return out.scaled(gain);
}

MagnitudeFit fit_magnitude(const FrequencyGrid& grid,
                           const std::vector<double>& target,
                           const MagnitudeFitOptions& opts) {
  if (target.size() != grid.size() || grid.size() == 0) {
    throw Error(ErrorKind::kDimensionMismatch,
                "fit_magnitude: target length differs from grid");
  }
  if (opts.order < 0) {
    throw Error(ErrorKind::kInvalidArgument, "fit_magnitude: negative order");
  }
  for (double v : target) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorKind::kNonPositiveEnvelope,
                  "fit_magnitude: targets must be positive and finite");
    }
  }
  const std::size_t k = grid.size();
  std::vector<double> xs(k), tsq(k);
  for (std::size_t i = 0; i < k; ++i) {
    xs[i] = grid[i] * grid[i];
    tsq[i] = target[i] * target[i];
  }
  const double lmax = std::log(*std::max_element(tsq.begin(), tsq.end()));
  const double lmin = std::log(*std::min_element(tsq.begin(), tsq.end()));

  MagnitudeFit fit;
  std::vector<Complex> zeros, poles;
  if (opts.order > 0 && lmax - lmin > 1e-12) {
    const int n = opts.order;
    Vector p(n);
    const double l0 = std::log(xs.front()), l1 = std::log(xs.back());
    for (int j = 0; j < n; ++j) {
      p(j) = n == 1 ? std::exp(0.5 * (l0 + l1))
                    : std::exp(l0 + (l1 - l0) * j / double(n - 1));
    }
    std::vector<double> xpos(opts.positivity_points);
    const double e0 = l0 - 2.0 * std::log(100.0), e1 = l1 + 2.0 * std::log(100.0);
    for (std::size_t i = 0; i < xpos.size(); ++i) {
      xpos[i] = std::exp(e0 + (e1 - e0) * double(i) / double(xpos.size() - 1));
    }
    xpos.insert(xpos.begin(), 0.0);

    double t_hi = opts.mode == FitMode::kOverbound ? (lmax - lmin) * 1.001 + 1e-6
                                                   : 0.5 * (lmax - lmin) * 1.001 + 1e-6;
    double t_lo = 0.0;
    std::optional<Rational> best = feasible_at(xs, tsq, xpos, p, t_hi, opts.mode);
    if (!best) {
      throw Error(ErrorKind::kInfeasibleFit,
                  "fit_magnitude: no feasible rational fit at the constant band");
    }
    while (t_hi - t_lo > opts.band_tol) {
      const double mid = 0.5 * (t_lo + t_hi);
      if (auto r = feasible_at(xs, tsq, xpos, p, mid, opts.mode)) {
        best = r;
        t_hi = mid;
      } else {
        t_lo = mid;
      }
    }
    const double eps = 1e-6 * std::sqrt(xs.front());
    zeros = to_lhp(barycentric_roots(best->a, p), eps);
    poles = to_lhp(barycentric_roots(best->b, p), eps);
    cancel_common(zeros, poles, grid[0]);
    condition_roots(zeros, poles, grid[0], grid[k - 1], opts.biproper);
    if (zeros.size() > poles.size()) {
      throw Error(ErrorKind::kInfeasibleFit,
                  "fit_magnitude: fitted magnitude is improper");
    }
  }

  StateSpace shape = realize_zpk(zeros, poles, 1.0);
  std::vector<double> e(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double m = std::abs(evaluate(shape, Complex(0.0, grid[i]))(0, 0));
    e[i] = std::log(target[i]) - std::log(m);
  }
  const double emax = *std::max_element(e.begin(), e.end());
  const double emin = *std::min_element(e.begin(), e.end());
  const double log_gain =
      opts.mode == FitMode::kOverbound ? emax + 1e-12 : 0.5 * (emax + emin);
  fit.sys = shape.scaled(std::exp(log_gain));
  fit.log_ratio.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    fit.log_ratio[i] = log_gain - e[i];
    fit.max_abs_log_error =
        std::max(fit.max_abs_log_error, std::abs(fit.log_ratio[i]));
  }
  if (!fit.sys.a().allFinite() || !fit.sys.d().allFinite()) {
    throw Error(ErrorKind::kInfeasibleFit, "fit_magnitude: non-finite realization");
  }
  return fit;
}

}  // namespace robobs
