#include "robobs/riccati.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "robobs/errors.hpp"

namespace robobs {

namespace {

// Swaps the adjacent diagonal entries k, k+1 of the upper triangular T while
// keeping H = U T U^H.
void swap_adjacent(CMatrix& t, CMatrix& u, Eigen::Index k) {
  const Complex a = t(k, k), c = t(k + 1, k + 1), b = t(k, k + 1);
  const Complex v1 = b, v2 = c - a;
  const double r = std::hypot(std::abs(v1), std::abs(v2));
  if (r == 0.0) return;
  Eigen::Matrix2cd g;
  g(0, 0) = v1 / r;
  g(1, 0) = v2 / r;
  g(0, 1) = -std::conj(v2) / r;
  g(1, 1) = std::conj(v1) / r;
  t.middleRows(k, 2) = (g.adjoint() * t.middleRows(k, 2)).eval();
  t.middleCols(k, 2) = (t.middleCols(k, 2) * g).eval();
  u.middleCols(k, 2) = (u.middleCols(k, 2) * g).eval();
  t(k + 1, k) = 0.0;
}

// Solves A' D + D A = -E for real A with no eigenvalue pair summing to zero,
// by Bartels-Stewart on the complex Schur form of A.
Matrix lyapunov_solve(const Matrix& a, const Matrix& e) {
  const Eigen::Index n = a.rows();
  Eigen::ComplexSchur<CMatrix> schur(a.cast<Complex>());
  const CMatrix& t = schur.matrixT();
  const CMatrix& u = schur.matrixU();
  const CMatrix c = -(u.adjoint() * e.cast<Complex>() * u);
  CMatrix y(n, n);
  const CMatrix th = t.adjoint();
  for (Eigen::Index j = 0; j < n; ++j) {
    CVector rhs = c.col(j);
    if (j > 0) rhs -= y.leftCols(j) * t.col(j).head(j);
    CMatrix lhs = th;
    lhs.diagonal().array() += t(j, j);
    y.col(j) = lhs.triangularView<Eigen::Lower>().solve(rhs);
  }
  Matrix d = (u * y * u.adjoint()).real();
  return 0.5 * (d + d.transpose());
}

}  // namespace

Matrix ric(const Matrix& h, const RiccatiOptions& opts) {
  if (h.rows() != h.cols() || h.rows() % 2 != 0) {
    throw Error(ErrorKind::kDimensionMismatch, "ric: H must be 2n x 2n");
  }
  const Eigen::Index n = h.rows() / 2;
  if (n == 0) return Matrix(0, 0);
  if (!h.allFinite()) {
    throw Error(ErrorKind::kInvalidArgument, "ric: non-finite Hamiltonian");
  }

  Eigen::ComplexSchur<CMatrix> schur(h.cast<Complex>());
  if (schur.info() != Eigen::Success) {
    throw Error(ErrorKind::kNoStabilizingSolution,
                "ric: Schur decomposition did not converge");
  }
  CMatrix t = schur.matrixT();
  CMatrix u = schur.matrixU();

  Eigen::Index stable = 0;
  for (Eigen::Index j = 0; j < 2 * n; ++j) {
    const Complex lam = t(j, j);
    if (std::abs(lam.real()) <= opts.axis_tol * (1.0 + std::abs(lam))) {
      throw Error(ErrorKind::kImaginaryAxisEigenvalue,
                  "ric: Hamiltonian eigenvalue " + std::to_string(lam.real()) +
                      (lam.imag() >= 0 ? "+" : "") +
                      std::to_string(lam.imag()) + "j on the imaginary axis");
    }
    if (lam.real() < 0.0) {
      for (Eigen::Index k = j; k > stable; --k) swap_adjacent(t, u, k - 1);
      ++stable;
    }
  }
  if (stable != n) {
    throw Error(ErrorKind::kNoStabilizingSolution,
                "ric: stable subspace has dimension " + std::to_string(stable) +
                    ", expected " + std::to_string(n));
  }

  const CMatrix u1 = u.topLeftCorner(n, n);
  const CMatrix u2 = u.bottomLeftCorner(n, n);
  Eigen::JacobiSVD<CMatrix> svd(u1);
  const auto sv = svd.singularValues();
  if (sv(n - 1) <= 1e-12 * sv(0)) {
    throw Error(ErrorKind::kNoStabilizingSolution,
                "ric: stable subspace is not a graph (U1 singular)");
  }
  // X U1 = U2
  const CMatrix x_c = u1.transpose().partialPivLu().solve(u2.transpose())
                          .transpose();
  Matrix x = x_c.real();
  x = 0.5 * (x + x.transpose()).eval();
  if (!x.allFinite()) {
    throw Error(ErrorKind::kNoStabilizingSolution, "ric: non-finite solution");
  }
  return x;
}

Matrix care_solve(const Matrix& a, const Matrix& b, const Matrix& q,
                  const Matrix& r, const Matrix& s_in,
                  const RiccatiOptions& opts) {
  const Eigen::Index n = a.rows(), m = b.cols();
  if (a.cols() != n || b.rows() != n || q.rows() != n || q.cols() != n ||
      r.rows() != m || r.cols() != m) {
    throw Error(ErrorKind::kDimensionMismatch, "care_solve: shapes");
  }
  const Matrix s = s_in.size() == 0 ? Matrix::Zero(n, m) : s_in;
  if (s.rows() != n || s.cols() != m) {
    throw Error(ErrorKind::kDimensionMismatch, "care_solve: S shape");
  }
  if (n == 0) return Matrix(0, 0);
  Eigen::FullPivLU<Matrix> r_lu(r);
  if (m > 0 && !r_lu.isInvertible()) {
    throw Error(ErrorKind::kInvalidArgument, "care_solve: R is singular");
  }
  const Matrix r_inv_bt = m > 0 ? Matrix(r_lu.solve(b.transpose()))
                                : Matrix::Zero(0, n);
  const Matrix r_inv_st = m > 0 ? Matrix(r_lu.solve(s.transpose()))
                                : Matrix::Zero(0, n);
  const Matrix a_s = a - b * r_inv_st;
  Matrix h(2 * n, 2 * n);
  h << a_s, -b * r_inv_bt, -(q - s * r_inv_st), -a_s.transpose();
  Matrix x = ric(h, opts);

  // One Newton step on the Schur solution.
  const double res0 = care_residual(a, b, q, r, s, x);
  if (res0 > 0.0) {
    const Matrix g = b * r_inv_bt;
    const Matrix q_s = q - s * r_inv_st;
    const Matrix res = a_s.transpose() * x + x * a_s - x * g * x + q_s;
    const Matrix x1 = x + lyapunov_solve(a_s - g * x, res);
    if (x1.allFinite() && care_residual(a, b, q, r, s, x1) < res0) x = x1;
  }
  return x;
}

double care_residual(const Matrix& a, const Matrix& b, const Matrix& q,
                     const Matrix& r, const Matrix& s_in, const Matrix& x) {
  const Matrix s = s_in.size() == 0 ? Matrix::Zero(a.rows(), b.cols()) : s_in;
  const Matrix xb_s = x * b + s;
  const Matrix res = a.transpose() * x + x * a -
                     xb_s * r.fullPivLu().solve(xb_s.transpose()) + q;
  return res.norm();
}

KalmanGain kalman_steady_state(const Matrix& a, const Matrix& b_w,
                               const Matrix& c_meas, const Matrix& q_c,
                               const Matrix& r_c) {
  const Eigen::Index n = a.rows();
  if (b_w.rows() != n || c_meas.cols() != n || q_c.rows() != b_w.cols() ||
      r_c.rows() != c_meas.rows()) {
    throw Error(ErrorKind::kDimensionMismatch, "kalman_steady_state: shapes");
  }
  const Matrix p = care_solve(a.transpose(), c_meas.transpose(),
                              b_w * q_c * b_w.transpose(), r_c);
  const Matrix l = r_c.llt().solve(c_meas * p).transpose();
  const StateSpace err(a - l * c_meas, Matrix::Zero(n, 0),
                       Matrix::Zero(0, n), Matrix::Zero(0, 0));
  if (!is_stable(err)) {
    throw Error(ErrorKind::kNoStabilizingSolution,
                "kalman_steady_state: A - L C is not stable");
  }
  return {l, p};
}

}  // namespace robobs
