#include "robobs/lp.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "robobs/errors.hpp"

namespace robobs {
namespace {

// Revised simplex on  min f'y  s.t.  M y = r, y >= 0  with r >= 0 and an
// initial basis of artificial columns appended after the real ones.
class DualSimplex {
 public:
  DualSimplex(Matrix m, Vector r, const LpOptions& opts)
      : n_(m.rows()), m_real_(m.cols()), opts_(opts) {
    mat_.resize(n_, m_real_ + n_);
    mat_ << m, Matrix::Identity(n_, n_);
    rhs_ = std::move(r);
    basis_.resize(n_);
    for (Eigen::Index i = 0; i < n_; ++i) basis_[i] = m_real_ + i;
  }

  bool is_artificial(Eigen::Index j) const { return j >= m_real_; }

  // Runs simplex iterations for the given costs. Returns kOptimal,
  // kUnbounded or kIterationLimit.
  LpStatus run(const Vector& cost, bool allow_artificial_entry) {
    int degenerate_run = 0;
    for (;;) {
      if (iterations_ >= opts_.max_iterations) return LpStatus::kIterationLimit;
      refactor();
      Vector cb(n_);
      for (Eigen::Index i = 0; i < n_; ++i) cb(i) = cost(basis_[i]);
      pi_ = lu_.transpose().solve(cb);

      const bool bland = degenerate_run > 50;
      Eigen::Index enter = -1;
      double best = 0.0;
      std::vector<char> in_basis(mat_.cols(), 0);
      for (Eigen::Index b : basis_) in_basis[b] = 1;
      const double scale = 1.0 + pi_.cwiseAbs().maxCoeff();
      for (Eigen::Index j = 0; j < mat_.cols(); ++j) {
        if (in_basis[j]) continue;
        if (!allow_artificial_entry && is_artificial(j)) continue;
        const double d = cost(j) - mat_.col(j).dot(pi_);
        if (d < -opts_.tol * scale * (1.0 + mat_.col(j).cwiseAbs().maxCoeff())) {
          if (bland) {
            enter = j;
            break;
          }
          if (d < best) {
            best = d;
            enter = j;
          }
        }
      }
      if (enter < 0) return LpStatus::kOptimal;

      const Vector w = lu_.solve(mat_.col(enter));
      Eigen::Index leave = -1;
      double theta = std::numeric_limits<double>::infinity();
      const double wscale = 1.0 + w.cwiseAbs().maxCoeff();
      for (Eigen::Index i = 0; i < n_; ++i) {
        const double wi = w(i);
        double ratio;
        if (is_artificial(basis_[i]) && !allow_artificial_entry &&
            std::abs(wi) > opts_.tol * wscale) {
          // Artificial held at zero: it must leave before moving.
          ratio = 0.0;
        } else if (wi > opts_.tol * wscale) {
          ratio = std::max(0.0, xb_(i)) / wi;
        } else {
          continue;
        }
        if (ratio < theta ||
            (ratio == theta && leave >= 0 && basis_[i] < basis_[leave])) {
          theta = ratio;
          leave = i;
        }
      }
      if (leave < 0) return LpStatus::kUnbounded;
      degenerate_run = theta == 0.0 ? degenerate_run + 1 : 0;
      basis_[leave] = enter;
      ++iterations_;
    }
  }

  // Tries to replace basic artificials (at zero) by real columns.
  void drive_out_artificials() {
    for (Eigen::Index i = 0; i < n_; ++i) {
      if (!is_artificial(basis_[i])) continue;
      refactor();
      const Matrix binv_row = lu_.transpose().solve(Vector::Unit(n_, i));
      std::vector<char> in_basis(mat_.cols(), 0);
      for (Eigen::Index b : basis_) in_basis[b] = 1;
      Eigen::Index pick = -1;
      double best = 1e-9;
      for (Eigen::Index j = 0; j < m_real_; ++j) {
        if (in_basis[j]) continue;
        const double v = std::abs(mat_.col(j).dot(binv_row.col(0)));
        if (v > best) {
          best = v;
          pick = j;
        }
      }
      if (pick >= 0) basis_[i] = pick;
    }
    refactor();
  }

  double objective(const Vector& cost) const {
    double f = 0.0;
    for (Eigen::Index i = 0; i < n_; ++i) f += cost(basis_[i]) * xb_(i);
    return f;
  }

  const Vector& multipliers() const { return pi_; }
  int iterations() const { return iterations_; }
  Eigen::Index total_columns() const { return mat_.cols(); }

  void compute_multipliers(const Vector& cost) {
    refactor();
    Vector cb(n_);
    for (Eigen::Index i = 0; i < n_; ++i) cb(i) = cost(basis_[i]);
    pi_ = lu_.transpose().solve(cb);
  }

 private:
  void refactor() {
    Matrix b(n_, n_);
    for (Eigen::Index i = 0; i < n_; ++i) b.col(i) = mat_.col(basis_[i]);
    lu_.compute(b);
    xb_ = lu_.solve(rhs_);
  }

  Eigen::Index n_, m_real_;
  LpOptions opts_;
  Matrix mat_;
  Vector rhs_;
  std::vector<Eigen::Index> basis_;
  Eigen::PartialPivLU<Matrix> lu_;
  Vector xb_, pi_;
  int iterations_ = 0;
};

}  // namespace

LpResult solve_lp(const LinearProgram& lp, const LpOptions& opts) {
  const Eigen::Index n = lp.c.size();
  const Eigen::Index m_ub = lp.a_ub.rows(), m_eq = lp.a_eq.rows();
  if ((m_ub > 0 && (lp.a_ub.cols() != n || lp.b_ub.size() != m_ub)) ||
      (m_eq > 0 && (lp.a_eq.cols() != n || lp.b_eq.size() != m_eq))) {
    throw Error(ErrorKind::kDimensionMismatch, "solve_lp: inconsistent sizes");
  }
  LpResult out;
  if (n == 0) {
    const bool ok = (m_ub == 0 || lp.b_ub.minCoeff() >= 0.0) &&
                    (m_eq == 0 || lp.b_eq.cwiseAbs().maxCoeff() == 0.0);
    out.status = ok ? LpStatus::kOptimal : LpStatus::kInfeasible;
    out.x = Vector(0);
    return out;
  }

  // Dual: min b'y s.t. A'y = -c, y_ub >= 0, y_eq = y+ - y-.
  const Eigen::Index m = m_ub + 2 * m_eq;
  Matrix mat(n, m);
  Vector f(m);
  if (m_ub > 0) {
    mat.leftCols(m_ub) = lp.a_ub.transpose();
    f.head(m_ub) = lp.b_ub;
  }
  if (m_eq > 0) {
    mat.middleCols(m_ub, m_eq) = lp.a_eq.transpose();
    mat.rightCols(m_eq) = -lp.a_eq.transpose();
    f.segment(m_ub, m_eq) = lp.b_eq;
    f.tail(m_eq) = -lp.b_eq;
  }
  Vector r = -lp.c;
  Vector sign = Vector::Ones(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (r(i) < 0.0) {
      r(i) = -r(i);
      mat.row(i) *= -1.0;
      sign(i) = -1.0;
    }
  }

  DualSimplex simplex(mat, r, opts);
  const Eigen::Index total = simplex.total_columns();
  Vector phase1 = Vector::Zero(total);
  phase1.tail(n).setOnes();
  LpStatus st = simplex.run(phase1, true);
  out.iterations = simplex.iterations();
  if (st == LpStatus::kIterationLimit) return out;
  if (simplex.objective(phase1) > 1e-9 * (1.0 + r.cwiseAbs().sum())) {
    // Dual infeasible: the primal is unbounded (or itself infeasible).
    out.status = LpStatus::kUnbounded;
    return out;
  }
  simplex.drive_out_artificials();

  Vector phase2 = Vector::Zero(total);
  phase2.head(m) = f;
  st = simplex.run(phase2, false);
  out.iterations = simplex.iterations();
  if (st == LpStatus::kUnbounded) {
    out.status = LpStatus::kInfeasible;
    return out;
  }
  if (st == LpStatus::kIterationLimit) return out;
  simplex.compute_multipliers(phase2);
  out.x = simplex.multipliers().cwiseProduct(sign);
  out.objective = lp.c.dot(out.x);
  out.status = LpStatus::kOptimal;
  return out;
}

}  // namespace robobs
