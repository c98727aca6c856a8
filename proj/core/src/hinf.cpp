#include "robobs/hinf.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "robobs/errors.hpp"

namespace robobs {

void GeneralizedPlant::validate() const {
  if (dims.outputs() != sys.outputs() || dims.inputs() != sys.inputs()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "generalized plant partition does not match realization (" +
                    std::to_string(dims.outputs()) + "x" +
                    std::to_string(dims.inputs()) + " vs " +
                    std::to_string(sys.outputs()) + "x" +
                    std::to_string(sys.inputs()) + ")");
  }
}

namespace {

struct Partitioned {
  Matrix a, b1, b2, c1, c2, d11, d12, d21, d22;
};

Partitioned partition(const StateSpace& p, Eigen::Index n_meas,
                      Eigen::Index n_ctl) {
  if (n_meas <= 0 || n_ctl <= 0 || n_meas > p.outputs() ||
      n_ctl > p.inputs()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "hinf: bad measurement/control partition");
  }
  const Eigen::Index nw = p.inputs() - n_ctl, nz = p.outputs() - n_meas;
  return {p.a(),
          p.b().leftCols(nw),
          p.b().rightCols(n_ctl),
          p.c().topRows(nz),
          p.c().bottomRows(n_meas),
          p.d().topLeftCorner(nz, nw),
          p.d().topRightCorner(nz, n_ctl),
          p.d().bottomLeftCorner(n_meas, nw),
          p.d().bottomRightCorner(n_meas, n_ctl)};
}

bool full_column_rank(const Matrix& m) {
  if (m.rows() < m.cols()) return false;
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  return s(s.size() - 1) > 1e-12 * std::max(1.0, s(0));
}

// Appends eps*I rows to z (for D12) and eps*I columns to w (for D21) when
// the rank conditions fail.
void regularize(Partitioned& pp, double eps, bool* reg12, bool* reg21) {
  const Eigen::Index n = pp.a.rows(), m2 = pp.b2.cols(), p2 = pp.c2.rows();
  *reg12 = !full_column_rank(pp.d12);
  *reg21 = !full_column_rank(pp.d21.transpose());
  if (*reg12) {
    const Eigen::Index p1 = pp.c1.rows(), m1 = pp.b1.cols();
    Matrix c1(p1 + m2, n), d11(p1 + m2, m1), d12(p1 + m2, m2);
    c1 << pp.c1, Matrix::Zero(m2, n);
    d11 << pp.d11, Matrix::Zero(m2, m1);
    d12 << pp.d12, eps * Matrix::Identity(m2, m2);
    pp.c1 = c1;
    pp.d11 = d11;
    pp.d12 = d12;
  }
  if (*reg21) {
    const Eigen::Index p1 = pp.c1.rows(), m1 = pp.b1.cols();
    Matrix b1(n, m1 + p2), d11(p1, m1 + p2), d21(p2, m1 + p2);
    b1 << pp.b1, Matrix::Zero(n, p2);
    d11 << pp.d11, Matrix::Zero(p1, p2);
    d21 << pp.d21, eps * Matrix::Identity(p2, p2);
    pp.b1 = b1;
    pp.d11 = d11;
    pp.d21 = d21;
  }
}

// Plant rotated and scaled so that D12 = [0; I], D21 = [0, I], D22 = 0.
struct Normalized {
  Matrix a, b1, b2, c1, c2, d11;
  Matrix u_map;  // u = u_map * u_normalized
  Matrix y_map;  // y_normalized = y_map * y
};

Normalized normalize(const Partitioned& pp) {
  const Eigen::Index m2 = pp.d12.cols(), p2 = pp.d21.rows();
  const Eigen::Index p1 = pp.d12.rows(), m1 = pp.d21.cols();

  Eigen::JacobiSVD<Matrix> s12(pp.d12, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Matrix& u12 = s12.matrixU();
  Matrix theta_z(p1, p1);
  theta_z << u12.rightCols(p1 - m2).transpose(), u12.leftCols(m2).transpose();
  const Matrix u_map = s12.matrixV() *
                       s12.singularValues().cwiseInverse().asDiagonal();

  Eigen::JacobiSVD<Matrix> s21(pp.d21, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Matrix& v21 = s21.matrixV();
  Matrix theta_w(m1, m1);
  theta_w << v21.rightCols(m1 - p2), v21.leftCols(p2);
  const Matrix y_map = s21.singularValues().cwiseInverse().asDiagonal() *
                       s21.matrixU().transpose();

  return {pp.a,
          pp.b1 * theta_w,
          pp.b2 * u_map,
          theta_z * pp.c1,
          y_map * pp.c2,
          theta_z * pp.d11 * theta_w,
          u_map,
          y_map};
}

Matrix solve_spd_or_throw(const Matrix& m, const Matrix& rhs) {
  Eigen::FullPivLU<Matrix> lu(m);
  if (!lu.isInvertible()) {
    throw Error(ErrorKind::kNoStabilizingSolution, "hinf: singular matrix");
  }
  return lu.solve(rhs);
}

Matrix chol_lower(const Matrix& m) {
  if (m.rows() == 0) return m;
  Eigen::LLT<Matrix> llt(0.5 * (m + m.transpose()));
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::kNoStabilizingSolution,
                "hinf: controller feedthrough factor not positive definite");
  }
  return llt.matrixL();
}

double min_eig_sym(const Matrix& m) {
  if (m.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()),
                                           Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double max_abs_eig(const Matrix& m) {
  if (m.rows() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

struct Attempt {
  StateSpace controller;  // in normalized coordinates
  double x_residual = 0.0;
  double y_residual = 0.0;
  double spectral_radius = 0.0;
};

// Glover-Doyle central controller for the normalized plant.
std::optional<Attempt> central_controller(const Normalized& np, double gamma,
                                          const RiccatiOptions& ropts) {
  const Eigen::Index n = np.a.rows();
  const Eigen::Index m1 = np.b1.cols(), m2 = np.b2.cols();
  const Eigen::Index p1 = np.c1.rows(), p2 = np.c2.rows();
  const double g2 = gamma * gamma;

  const Matrix d1111 = np.d11.topLeftCorner(p1 - m2, m1 - p2);
  const Matrix d1112 = np.d11.topRightCorner(p1 - m2, p2);
  const Matrix d1121 = np.d11.bottomLeftCorner(m2, m1 - p2);
  const Matrix d1122 = np.d11.bottomRightCorner(m2, p2);

  Matrix top(p1 - m2, m1);
  top << d1111, d1112;
  Matrix left(p1, m1 - p2);
  left << d1111, d1121;
  const double bound = std::max(
      top.size() ? Eigen::JacobiSVD<Matrix>(top).singularValues()(0) : 0.0,
      left.size() ? Eigen::JacobiSVD<Matrix>(left).singularValues()(0) : 0.0);
  if (!(gamma > bound * (1.0 + 1e-12))) return std::nullopt;

  Matrix d12(p1, m2), d21(p2, m1);
  d12 << Matrix::Zero(p1 - m2, m2), Matrix::Identity(m2, m2);
  d21 << Matrix::Zero(p2, m1 - p2), Matrix::Identity(p2, p2);
  Matrix d1dot(p1, m1 + m2), ddot1(p1 + p2, m1);
  d1dot << np.d11, d12;
  ddot1 << np.d11, d21;
  Matrix bb(n, m1 + m2), cc(p1 + p2, n);
  bb << np.b1, np.b2;
  cc << np.c1, np.c2;

  Matrix r = d1dot.transpose() * d1dot;
  r.topLeftCorner(m1, m1) -= g2 * Matrix::Identity(m1, m1);
  Matrix rt = ddot1 * ddot1.transpose();
  rt.topLeftCorner(p1, p1) -= g2 * Matrix::Identity(p1, p1);

  Matrix x, y;
  const Matrix qx = np.c1.transpose() * np.c1, sx = np.c1.transpose() * d1dot;
  const Matrix qy = np.b1 * np.b1.transpose(), sy = np.b1 * ddot1.transpose();
  try {
    x = care_solve(np.a, bb, qx, r, sx, ropts);
    y = care_solve(np.a.transpose(), cc.transpose(), qy, rt, sy, ropts);
  } catch (const Error&) {
    return std::nullopt;
  }
  const double x_scale = std::max(1.0, x.norm());
  const double y_scale = std::max(1.0, y.norm());
  if (min_eig_sym(x) < -1e-9 * x_scale || min_eig_sym(y) < -1e-9 * y_scale) {
    return std::nullopt;
  }
  const double rho = max_abs_eig(x * y);
  if (!(rho < g2 * (1.0 - 1e-9))) return std::nullopt;

  Attempt out;
  out.x_residual = care_residual(np.a, bb, qx, r, sx, x) / (1.0 + x.norm());
  out.y_residual = care_residual(np.a.transpose(), cc.transpose(), qy, rt, sy,
                                 y) /
                   (1.0 + y.norm());
  out.spectral_radius = rho / g2;

  try {
    const Matrix f = -solve_spd_or_throw(r, d1dot.transpose() * np.c1 +
                                                bb.transpose() * x);
    const Matrix h = -solve_spd_or_throw(
                          rt, (np.b1 * ddot1.transpose() + y * cc.transpose())
                                  .transpose())
                          .transpose();
    const Matrix f12 = f.block(m1 - p2, 0, p2, n);
    const Matrix f2 = f.bottomRows(m2);
    const Matrix h12 = h.block(0, p1 - m2, n, m2);
    const Matrix h2 = h.rightCols(p2);

    const Matrix g_row = g2 * Matrix::Identity(p1 - m2, p1 - m2) -
                         d1111 * d1111.transpose();
    const Matrix g_col = g2 * Matrix::Identity(m1 - p2, m1 - p2) -
                         d1111.transpose() * d1111;
    Matrix dk11 = -d1122;
    if (d1111.size() > 0) {
      dk11 -= d1121 * d1111.transpose() * solve_spd_or_throw(g_row, d1112);
    }
    Matrix m12 = Matrix::Identity(m2, m2);
    if (d1121.size() > 0) m12 -= d1121 * solve_spd_or_throw(g_col, d1121.transpose());
    Matrix m21 = Matrix::Identity(p2, p2);
    if (d1112.size() > 0) m21 -= d1112.transpose() * solve_spd_or_throw(g_row, d1112);
    const Matrix dk12 = chol_lower(m12);
    const Matrix dk21 = chol_lower(m21).transpose();

    const Matrix z = solve_spd_or_throw(
        Matrix::Identity(n, n) - y * x / g2, Matrix::Identity(n, n));
    const Matrix bk2 = z * (np.b2 + h12) * dk12;
    const Matrix ck2 = -dk21 * (np.c2 + f12);
    const Matrix dk12_inv = dk12.inverse();
    const Matrix dk21_inv = dk21.inverse();
    const Matrix bk1 = -z * h2 + bk2 * dk12_inv * dk11;
    const Matrix ck1 = f2 + dk11 * dk21_inv * ck2;
    const Matrix ak = np.a + bb * f + bk1 * dk21_inv * ck2;
    out.controller = StateSpace(ak, bk1, ck1, dk11);
  } catch (const Error&) {
    return std::nullopt;
  }
  if (!out.controller.a().allFinite() || !out.controller.b().allFinite() ||
      !out.controller.c().allFinite() || !out.controller.d().allFinite()) {
    return std::nullopt;
  }
  return out;
}

struct Prepared {
  Normalized normalized;
  Matrix d22;
  bool reg12 = false;
  bool reg21 = false;
};

Prepared prepare(const StateSpace& plant, Eigen::Index n_meas,
                 Eigen::Index n_ctl, const HinfOptions& opts) {
  Partitioned pp = partition(plant, n_meas, n_ctl);
  if (!is_stabilizable(pp.a, pp.b2)) {
    throw Error(ErrorKind::kRegularityFailure, "(A, B2) is not stabilizable");
  }
  if (!is_detectable(pp.a, pp.c2)) {
    throw Error(ErrorKind::kRegularityFailure, "(C2, A) is not detectable");
  }
  Prepared out;
  regularize(pp, opts.regularization, &out.reg12, &out.reg21);
  if (!full_column_rank(pp.d12)) {
    throw Error(ErrorKind::kRegularityFailure,
                "D12 lacks full column rank after regularization");
  }
  if (!full_column_rank(pp.d21.transpose())) {
    throw Error(ErrorKind::kRegularityFailure,
                "D21 lacks full row rank after regularization");
  }
  out.d22 = pp.d22;
  out.normalized = normalize(pp);
  return out;
}

StateSpace to_plant_coordinates(const Prepared& prep, const StateSpace& k_norm) {
  const Normalized& np = prep.normalized;
  // u = u_map * K_norm * y_map * y
  StateSpace k(k_norm.a(), k_norm.b() * np.y_map, np.u_map * k_norm.c(),
               np.u_map * k_norm.d() * np.y_map);
  if (prep.d22.size() > 0 && prep.d22.cwiseAbs().maxCoeff() > 0.0) {
    k = feedback(k, StateSpace::gain(prep.d22), -1);
  }
  return k;
}

}  // namespace

bool is_stabilizable(const Matrix& a, const Matrix& b, double tol) {
  const Eigen::Index n = a.rows();
  if (n == 0) return true;
  Eigen::EigenSolver<Matrix> es(a, false);
  const CVector lam = es.eigenvalues();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (lam[i].real() < -tol) continue;
    CMatrix m(n, n + b.cols());
    m << a.cast<Complex>() - lam[i] * CMatrix::Identity(n, n),
        b.cast<Complex>();
    Eigen::JacobiSVD<CMatrix> svd(m);
    const auto& s = svd.singularValues();
    if (s(n - 1) <= 1e-10 * std::max(1.0, s(0))) return false;
  }
  return true;
}

bool is_detectable(const Matrix& a, const Matrix& c, double tol) {
  return is_stabilizable(a.transpose(), c.transpose(), tol);
}

std::optional<StateSpace> hinf_controller_at(const StateSpace& plant,
                                             Eigen::Index n_meas,
                                             Eigen::Index n_ctl, double gamma,
                                             const HinfOptions& opts) {
  const Prepared prep = prepare(plant, n_meas, n_ctl, opts);
  auto attempt = central_controller(prep.normalized, gamma, opts.riccati);
  if (!attempt) return std::nullopt;
  return to_plant_coordinates(prep, attempt->controller);
}

SynthesisResult hinf_synthesize(const StateSpace& plant, Eigen::Index n_meas,
                                Eigen::Index n_ctl, const HinfOptions& opts) {
  if (!(opts.gamma_min > 0.0 && opts.gamma_max > opts.gamma_min &&
        opts.rel_tol > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "hinf: bad gamma bracket");
  }
  const Prepared prep = prepare(plant, n_meas, n_ctl, opts);
  auto feasible = [&](double g) {
    return central_controller(prep.normalized, g, opts.riccati);
  };

  SynthesisResult result;
  auto best = feasible(opts.gamma_max);
  if (!best) {
    throw Error(ErrorKind::kInfeasibleAtGammaMax,
                "no controller achieves gamma_max = " +
                    std::to_string(opts.gamma_max));
  }
  double lo = opts.gamma_min, hi = opts.gamma_max;
  if (auto at_lo = feasible(lo)) {
    best = at_lo;
    hi = lo;
  } else {
    while (hi / lo > 1.0 + opts.rel_tol) {
      const double mid = std::sqrt(lo * hi);
      ++result.iterations;
      if (auto a = feasible(mid)) {
        best = a;
        hi = mid;
      } else {
        lo = mid;
      }
    }
  }

  // Closed-loop verification on the unregularized plant; near the optimum
  // the central controller can be numerically fragile, so back off a little
  // if the loop does not check out.
  const FrequencyGrid grid = dynamics_grid(plant, opts.check_points);
  double gamma = hi;
  for (int attempt = 0;; ++attempt) {
    const StateSpace k = to_plant_coordinates(prep, best->controller);
    const StateSpace cl = lft_lower(plant, k);
    if (is_stable(cl, 1e-9)) {
      const GriddedNorm norm = hinf_norm_gridded(cl, grid);
      if (norm.value <= gamma * 1.05 || attempt >= 8) {
        result.controller = k;
        result.gamma = gamma;
        result.diagnostics = {best->x_residual,  best->y_residual,
                              best->spectral_radius, norm.value,
                              prep.reg12,        prep.reg21};
        return result;
      }
    } else if (attempt >= 8) {
      throw Error(ErrorKind::kNoStabilizingSolution,
                  "hinf: central controller does not stabilize the plant");
    }
    gamma *= 1.0 + 10.0 * opts.rel_tol;
    if (gamma > opts.gamma_max) gamma = opts.gamma_max;
    best = feasible(gamma);
    if (!best) {
      throw Error(ErrorKind::kNoStabilizingSolution,
                  "hinf: lost feasibility while backing off gamma");
    }
  }
}

SynthesisResult hinf_synthesize(const GeneralizedPlant& plant,
                                const HinfOptions& opts) {
  plant.validate();
  return hinf_synthesize(plant.sys, plant.dims.meas, plant.dims.ctl, opts);
}

}  // namespace robobs
