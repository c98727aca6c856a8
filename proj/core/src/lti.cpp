#include "robobs/lti.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "robobs/errors.hpp"

namespace robobs {

namespace {

void require(bool ok, ErrorKind kind, const std::string& what) {
  if (!ok) throw Error(kind, what);
}

bool all_finite(const Matrix& m) { return m.size() == 0 || m.allFinite(); }

Matrix block_diag(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows() + b.rows(), a.cols() + b.cols());
  out.topLeftCorner(a.rows(), a.cols()) = a;
  out.bottomRightCorner(b.rows(), b.cols()) = b;
  return out;
}

Matrix solve_square(const Matrix& m, const Matrix& rhs, const char* what) {
  if (m.rows() == 0) return Matrix(0, rhs.cols());
  Eigen::FullPivLU<Matrix> lu(m);
  if (!lu.isInvertible()) throw Error(ErrorKind::kAlgebraicLoop, what);
  return lu.solve(rhs);
}

double log_golden_max(const StateSpace& sys, double lo, double hi,
                      double* arg) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  auto f = [&](double lw) {
    return sigma_max(evaluate(sys, Complex(0.0, std::exp(lw))));
  };
  double a = std::log(lo), b = std::log(hi);
  double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > 1e-10) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    }
  }
  const double mid = 0.5 * (a + b);
  *arg = std::exp(mid);
  return f(mid);
}

}  // namespace

StateSpace::StateSpace(Matrix a, Matrix b, Matrix c, Matrix d)
    : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)), d_(std::move(d)) {
  require(a_.rows() == a_.cols(), ErrorKind::kDimensionMismatch,
          "A must be square");
  require(b_.rows() == a_.rows(), ErrorKind::kDimensionMismatch,
          "B rows must equal state count");
  require(c_.cols() == a_.rows(), ErrorKind::kDimensionMismatch,
          "C columns must equal state count");
  require(d_.rows() == c_.rows() && d_.cols() == b_.cols(),
          ErrorKind::kDimensionMismatch, "D must be outputs x inputs");
  require(all_finite(a_) && all_finite(b_) && all_finite(c_) && all_finite(d_),
          ErrorKind::kInvalidArgument, "realization has non-finite entries");
}

StateSpace StateSpace::gain(const Matrix& d) {
  return StateSpace(Matrix(0, 0), Matrix(0, d.cols()), Matrix(d.rows(), 0), d);
}

StateSpace StateSpace::identity(Eigen::Index n) {
  return gain(Matrix::Identity(n, n));
}

StateSpace StateSpace::zero(Eigen::Index outputs, Eigen::Index inputs) {
  return gain(Matrix::Zero(outputs, inputs));
}

StateSpace StateSpace::block(Eigen::Index out0, Eigen::Index n_out,
                             Eigen::Index in0, Eigen::Index n_in) const {
  require(out0 >= 0 && n_out >= 0 && out0 + n_out <= outputs() && in0 >= 0 &&
              n_in >= 0 && in0 + n_in <= inputs(),
          ErrorKind::kDimensionMismatch, "channel block out of range");
  return StateSpace(a_, b_.middleCols(in0, n_in), c_.middleRows(out0, n_out),
                    d_.block(out0, in0, n_out, n_in));
}

StateSpace StateSpace::scaled(double k) const {
  return StateSpace(a_, b_, k * c_, k * d_);
}

FrequencyGrid::FrequencyGrid(std::vector<double> omegas)
    : omegas_(std::move(omegas)) {
  require(!omegas_.empty(), ErrorKind::kInvalidArgument,
          "frequency grid must be non-empty");
  for (std::size_t k = 0; k < omegas_.size(); ++k) {
    require(std::isfinite(omegas_[k]) && omegas_[k] > 0.0,
            ErrorKind::kInvalidArgument, "grid frequencies must be positive");
    if (k > 0) {
      require(omegas_[k] > omegas_[k - 1], ErrorKind::kInvalidArgument,
              "grid must be strictly increasing");
    }
  }
}

FrequencyGrid FrequencyGrid::logspace(double omega_lo, double omega_hi,
                                      std::size_t n) {
  require(omega_lo > 0.0 && omega_hi > omega_lo && n >= 1,
          ErrorKind::kInvalidArgument, "bad logspace bounds");
  std::vector<double> w(n);
  if (n == 1) {
    w[0] = omega_lo;
    return FrequencyGrid(std::move(w));
  }
  const double l0 = std::log10(omega_lo), l1 = std::log10(omega_hi);
  for (std::size_t k = 0; k < n; ++k) {
    w[k] = std::pow(10.0, l0 + (l1 - l0) * static_cast<double>(k) /
                                   static_cast<double>(n - 1));
  }
  return FrequencyGrid(std::move(w));
}

FrequencyGrid FrequencyGrid::logspace_hz(double hz_lo, double hz_hi,
                                         std::size_t n) {
  return logspace(2.0 * M_PI * hz_lo, 2.0 * M_PI * hz_hi, n);
}

CMatrix evaluate(const StateSpace& sys, Complex s) {
  CMatrix out = sys.d().cast<Complex>();
  const Eigen::Index n = sys.states();
  if (n == 0) return out;
  CMatrix m = -sys.a().cast<Complex>();
  m.diagonal().array() += s;
  Eigen::PartialPivLU<CMatrix> lu(m);
  // PartialPivLU does not report singularity; check the pivots directly.
  const double scale = std::max(1.0, std::abs(s)) +
                       (sys.a().size() ? sys.a().cwiseAbs().maxCoeff() : 0.0);
  const auto& lu_m = lu.matrixLU();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(lu_m(i, i)) <= 1e-13 * scale) {
      throw Error(ErrorKind::kSingularAtFrequency,
                  "resolvent singular at s = " + std::to_string(s.real()) +
                      (s.imag() >= 0 ? "+" : "") + std::to_string(s.imag()) +
                      "j");
    }
  }
  out.noalias() += sys.c().cast<Complex>() * lu.solve(sys.b().cast<Complex>());
  return out;
}

FrequencyResponse freq_response(const StateSpace& sys,
                                const FrequencyGrid& grid) {
  FrequencyResponse r{grid, {}};
  r.values.reserve(grid.size());
  for (double w : grid) r.values.push_back(evaluate(sys, Complex(0.0, w)));
  return r;
}

StateSpace series(const StateSpace& g1, const StateSpace& g2) {
  require(g1.outputs() == g2.inputs(), ErrorKind::kDimensionMismatch,
          "series: g1 outputs must equal g2 inputs");
  const Eigen::Index n1 = g1.states(), n2 = g2.states();
  Matrix a = Matrix::Zero(n1 + n2, n1 + n2);
  a.topLeftCorner(n1, n1) = g1.a();
  a.bottomLeftCorner(n2, n1) = g2.b() * g1.c();
  a.bottomRightCorner(n2, n2) = g2.a();
  Matrix b(n1 + n2, g1.inputs());
  b << g1.b(), g2.b() * g1.d();
  Matrix c(g2.outputs(), n1 + n2);
  c << g2.d() * g1.c(), g2.c();
  return StateSpace(a, b, c, g2.d() * g1.d());
}

StateSpace parallel(const StateSpace& g1, const StateSpace& g2) {
  require(g1.inputs() == g2.inputs() && g1.outputs() == g2.outputs(),
          ErrorKind::kDimensionMismatch, "parallel: channel counts differ");
  Matrix b(g1.states() + g2.states(), g1.inputs());
  b << g1.b(), g2.b();
  Matrix c(g1.outputs(), g1.states() + g2.states());
  c << g1.c(), g2.c();
  return StateSpace(block_diag(g1.a(), g2.a()), b, c, g1.d() + g2.d());
}

StateSpace append(const StateSpace& g1, const StateSpace& g2) {
  return StateSpace(block_diag(g1.a(), g2.a()), block_diag(g1.b(), g2.b()),
                    block_diag(g1.c(), g2.c()), block_diag(g1.d(), g2.d()));
}

StateSpace stack_outputs(const StateSpace& g1, const StateSpace& g2) {
  require(g1.inputs() == g2.inputs(), ErrorKind::kDimensionMismatch,
          "stack_outputs: input counts differ");
  Matrix b(g1.states() + g2.states(), g1.inputs());
  b << g1.b(), g2.b();
  Matrix d(g1.outputs() + g2.outputs(), g1.inputs());
  d << g1.d(), g2.d();
  return StateSpace(block_diag(g1.a(), g2.a()), b, block_diag(g1.c(), g2.c()),
                    d);
}

StateSpace feedback(const StateSpace& g, const StateSpace& h, int sign) {
  require(sign == 1 || sign == -1, ErrorKind::kInvalidArgument,
          "feedback sign must be +1 or -1");
  require(h.inputs() == g.outputs() && h.outputs() == g.inputs(),
          ErrorKind::kDimensionMismatch, "feedback: h must map y_g to u_g");
  const double s = sign;
  const Eigen::Index ng = g.states(), nh = h.states();
  const Eigen::Index p = g.outputs();
  // y_g = E^{-1} (Cg xg + s Dg Ch xh + Dg r), E = I - s Dg Dh.
  const Matrix e = Matrix::Identity(p, p) - s * g.d() * h.d();
  Matrix cx(p, ng + nh);
  cx << g.c(), s * g.d() * h.c();
  const Matrix y_x = solve_square(e, cx, "feedback: I - sign*Dg*Dh singular");
  const Matrix y_r = solve_square(e, g.d(), "feedback: I - sign*Dg*Dh singular");
  // u_g = r + s (Ch xh + Dh y_g)
  Matrix ch_pad = Matrix::Zero(g.inputs(), ng + nh);
  ch_pad.rightCols(nh) = h.c();
  const Matrix u_x = s * (ch_pad + h.d() * y_x);
  const Matrix u_r =
      Matrix::Identity(g.inputs(), g.inputs()) + s * h.d() * y_r;
  Matrix a = Matrix::Zero(ng + nh, ng + nh);
  a.topLeftCorner(ng, ng) = g.a();
  a.bottomRightCorner(nh, nh) = h.a();
  a.topRows(ng) += g.b() * u_x;
  a.bottomRows(nh) += h.b() * y_x;
  Matrix b(ng + nh, g.inputs());
  b << g.b() * u_r, h.b() * y_r;
  return StateSpace(a, b, y_x, y_r);
}

StateSpace lft_lower(const StateSpace& p, const StateSpace& k) {
  const Eigen::Index n_ctl = k.outputs(), n_meas = k.inputs();
  require(n_ctl <= p.inputs() && n_meas <= p.outputs(),
          ErrorKind::kDimensionMismatch, "lft_lower: controller too large");
  const Eigen::Index nw = p.inputs() - n_ctl, nz = p.outputs() - n_meas;
  const Eigen::Index np = p.states(), nk = k.states();
  const Matrix b1 = p.b().leftCols(nw), b2 = p.b().rightCols(n_ctl);
  const Matrix c1 = p.c().topRows(nz), c2 = p.c().bottomRows(n_meas);
  const Matrix d11 = p.d().topLeftCorner(nz, nw);
  const Matrix d12 = p.d().topRightCorner(nz, n_ctl);
  const Matrix d21 = p.d().bottomLeftCorner(n_meas, nw);
  const Matrix d22 = p.d().bottomRightCorner(n_meas, n_ctl);

  // u = M (Dk C2 x + Ck xk + Dk D21 w), M = (I - Dk D22)^{-1}
  const Matrix e = Matrix::Identity(n_ctl, n_ctl) - k.d() * d22;
  Matrix ux_rhs(n_ctl, np + nk);
  ux_rhs << k.d() * c2, k.c();
  const Matrix u_x = solve_square(e, ux_rhs, "lft_lower: I - Dk*D22 singular");
  const Matrix u_w =
      solve_square(e, k.d() * d21, "lft_lower: I - Dk*D22 singular");
  Matrix c2_pad = Matrix::Zero(n_meas, np + nk);
  c2_pad.leftCols(np) = c2;
  const Matrix y_x = c2_pad + d22 * u_x;
  const Matrix y_w = d21 + d22 * u_w;

  Matrix a = Matrix::Zero(np + nk, np + nk);
  a.topLeftCorner(np, np) = p.a();
  a.bottomRightCorner(nk, nk) = k.a();
  a.topRows(np) += b2 * u_x;
  a.bottomRows(nk) += k.b() * y_x;
  Matrix b(np + nk, nw);
  b << b1 + b2 * u_w, k.b() * y_w;
  Matrix c1_pad = Matrix::Zero(nz, np + nk);
  c1_pad.leftCols(np) = c1;
  return StateSpace(a, b, c1_pad + d12 * u_x, d11 + d12 * u_w);
}

StateSpace inverse(const StateSpace& sys) {
  require(sys.inputs() == sys.outputs(), ErrorKind::kDimensionMismatch,
          "inverse: system must be square");
  Eigen::FullPivLU<Matrix> lu(sys.d());
  if (sys.d().size() == 0 || !lu.isInvertible()) {
    throw Error(ErrorKind::kNonInvertibleScale,
                "inverse: feedthrough is singular");
  }
  const Matrix d_inv = lu.inverse();
  return StateSpace(sys.a() - sys.b() * d_inv * sys.c(), sys.b() * d_inv,
                    -d_inv * sys.c(), d_inv);
}

StateSpace similarity(const StateSpace& sys, const Matrix& t) {
  Eigen::FullPivLU<Matrix> lu(t);
  require(t.rows() == sys.states() && lu.isInvertible(),
          ErrorKind::kInvalidArgument, "similarity: T must be invertible");
  const Matrix t_inv = lu.inverse();
  return StateSpace(t_inv * sys.a() * t, t_inv * sys.b(), sys.c() * t,
                    sys.d());
}

StateSpace diag_repeat(const StateSpace& siso, Eigen::Index n) {
  require(siso.inputs() == 1 && siso.outputs() == 1,
          ErrorKind::kDimensionMismatch, "diag_repeat expects a SISO system");
  StateSpace out = StateSpace::zero(0, 0);
  for (Eigen::Index i = 0; i < n; ++i) out = append(out, siso);
  return out;
}

CVector poles(const StateSpace& sys) {
  if (sys.states() == 0) return CVector(0);
  Eigen::EigenSolver<Matrix> es(sys.a(), false);
  return es.eigenvalues();
}

bool is_stable(const StateSpace& sys, double margin) {
  const CVector p = poles(sys);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (!(p[i].real() < -margin)) return false;
  }
  return true;
}

CVector zeros(const StateSpace& sys) {
  require(sys.inputs() == sys.outputs(), ErrorKind::kDimensionMismatch,
          "zeros: system must be square");
  const Eigen::Index n = sys.states(), m = sys.inputs();
  if (n == 0) return CVector(0);
  Matrix e(n + m, n + m), f = Matrix::Zero(n + m, n + m);
  e << sys.a(), sys.b(), sys.c(), sys.d();
  f.topLeftCorner(n, n).setIdentity();
  Eigen::GeneralizedEigenSolver<Matrix> ges(e, f, false);
  std::vector<Complex> finite;
  const double scale = 1.0 + e.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < ges.alphas().size(); ++i) {
    const Complex al = ges.alphas()(i);
    const double be = ges.betas()(i);
    if (std::abs(be) <= 1e-12 * std::abs(al)) continue;
    const Complex z = al / be;
    if (std::abs(z) > 1e10 * scale) continue;
    finite.push_back(z);
  }
  CVector out(static_cast<Eigen::Index>(finite.size()));
  for (std::size_t i = 0; i < finite.size(); ++i) out(i) = finite[i];
  return out;
}

bool is_minimum_phase(const StateSpace& sys) {
  if (!is_stable(sys)) return false;
  const CVector z = zeros(sys);
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (!(z[i].real() < 0.0)) return false;
  }
  return true;
}

GriddedNorm hinf_norm_gridded(const StateSpace& sys,
                              const FrequencyGrid& grid) {
  if (!is_stable(sys)) {
    throw Error(ErrorKind::kUnstableSystem,
                "hinf_norm_gridded requires a stable system");
  }
  GriddedNorm best;
  std::size_t k_best = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double v = sigma_max(evaluate(sys, Complex(0.0, grid[k])));
    if (k == 0 || v > best.value) {
      best = {v, grid[k]};
      k_best = k;
    }
  }
  if (grid.size() > 1) {
    const double lo = grid[k_best == 0 ? 0 : k_best - 1];
    const double hi = grid[std::min(k_best + 1, grid.size() - 1)];
    double arg = best.omega;
    const double v = log_golden_max(sys, lo, hi, &arg);
    if (v > best.value) best = {v, arg};
  }
  // The supremum runs over [0, inf]; DC and the feedthrough close the ends.
  const double dc = sigma_max(evaluate(sys, Complex(0.0, 0.0)));
  if (dc > best.value) best = {dc, 0.0};
  const double hf = sigma_max(sys.d().cast<Complex>());
  if (hf > best.value) best = {hf, std::numeric_limits<double>::infinity()};
  return best;
}

DiscreteStateSpace discretize_zoh(const StateSpace& sys, double dt) {
  require(dt > 0.0 && std::isfinite(dt), ErrorKind::kInvalidArgument,
          "dt must be positive");
  const Eigen::Index n = sys.states(), m = sys.inputs();
  Matrix aug = Matrix::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = sys.a() * dt;
  aug.topRightCorner(n, m) = sys.b() * dt;
  Matrix e = aug.exp();
  return {StateSpace(e.topLeftCorner(n, n), e.topRightCorner(n, m), sys.c(),
                     sys.d()),
          dt};
}

MixedHold discretize_mixed_hold(const StateSpace& sys, double dt,
                                Eigen::Index n_zoh) {
  require(dt > 0.0 && std::isfinite(dt), ErrorKind::kInvalidArgument,
          "dt must be positive");
  require(n_zoh >= 0 && n_zoh <= sys.inputs(), ErrorKind::kDimensionMismatch,
          "held inputs exceed the input count");
  const Eigen::Index n = sys.states(), m = sys.inputs(), f = m - n_zoh;
  // exp([[A dt, B dt, 0], [0, 0, I_f], [0, 0, 0]]) = [[Phi, G1, G2], ...]
  Matrix aug = Matrix::Zero(n + m + f, n + m + f);
  aug.topLeftCorner(n, n) = sys.a() * dt;
  aug.block(0, n, n, m) = sys.b() * dt;
  aug.block(n + n_zoh, n + m, f, f) = Matrix::Identity(f, f);
  const Matrix e = aug.exp();
  const Matrix phi = e.topLeftCorner(n, n);
  const Matrix g1 = e.block(0, n, n, m);
  const Matrix g2 = e.block(0, n + m, n, f);
  // x[n+1] = Phi x + G1 w[n] + G2 (w[n+1] - w[n]) on the interpolated inputs.
  Matrix b = g1;
  b.rightCols(f) += phi * g2 - g2;
  Matrix d = sys.d();
  d.rightCols(f) += sys.c() * g2;
  return {{StateSpace(phi, b, sys.c(), d), dt}, g2};
}

FrequencyResponse freq_response(const DiscreteStateSpace& dsys,
                                const FrequencyGrid& grid) {
  FrequencyResponse out{grid, {}};
  out.values.reserve(grid.size());
  for (double w : grid) {
    out.values.push_back(
        evaluate(dsys.sys, std::exp(Complex(0.0, w * dsys.dt))));
  }
  return out;
}

Matrix simulate(const DiscreteStateSpace& dsys, const Matrix& inputs,
                const Vector& x0) {
  const StateSpace& s = dsys.sys;
  require(inputs.cols() == s.inputs(), ErrorKind::kDimensionMismatch,
          "simulate: input column count differs from system inputs");
  Vector x = x0.size() == 0 ? Vector::Zero(s.states()) : x0;
  require(x.size() == s.states(), ErrorKind::kDimensionMismatch,
          "simulate: initial state size");
  Matrix out(inputs.rows(), s.outputs());
  for (Eigen::Index n = 0; n < inputs.rows(); ++n) {
    const Vector u = inputs.row(n).transpose();
    out.row(n) = (s.c() * x + s.d() * u).transpose();
    x = s.a() * x + s.b() * u;
  }
  return out;
}

double sigma_max(const CMatrix& m) {
  if (m.size() == 0) return 0.0;
  if (m.rows() == 1 || m.cols() == 1) return m.norm();
  Eigen::JacobiSVD<CMatrix> svd(m);
  return svd.singularValues()(0);
}

Vector singular_values(const CMatrix& m) {
  if (m.size() == 0) return Vector(0);
  Eigen::JacobiSVD<CMatrix> svd(m);
  return svd.singularValues();
}

FrequencyGrid dynamics_grid(const StateSpace& sys, std::size_t n) {
  const CVector p = poles(sys);
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double r = std::abs(p[i]);
    if (r > 1e-12) {
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
  }
  if (hi == 0.0) return FrequencyGrid::logspace(1e-2, 1e2, n);
  return FrequencyGrid::logspace(lo / 10.0, hi * 10.0, n);
}

}  // namespace robobs
