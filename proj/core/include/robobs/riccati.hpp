#pragma once

#include "robobs/lti.hpp"

namespace robobs {

struct RiccatiOptions {
  /// Hamiltonian eigenvalues with |Re| <= axis_tol * (1 + |lambda|) count as
  /// lying on the imaginary axis.
  double axis_tol = 1e-8;
};

/// Stabilizing solution X = Ric(H) of the Hamiltonian-type matrix
/// H = [[H11, H12], [H21, H22]], i.e. the X with [I; X] spanning the stable
/// invariant subspace. Computed through a complex Schur form reordered so
/// the stable eigenvalues lead.
Matrix ric(const Matrix& hamiltonian, const RiccatiOptions& opts = {});

/// Stabilizing solution of
///   A'X + XA - (XB + S) R^{-1} (B'X + S') + Q = 0.
/// R only has to be invertible (indefinite R is used by H-infinity synthesis).
/// S may be empty, meaning zero.
Matrix care_solve(const Matrix& a, const Matrix& b, const Matrix& q,
                  const Matrix& r, const Matrix& s = Matrix(),
                  const RiccatiOptions& opts = {});

/// Frobenius norm of the CARE residual for a candidate X.
double care_residual(const Matrix& a, const Matrix& b, const Matrix& q,
                     const Matrix& r, const Matrix& s, const Matrix& x);

struct KalmanGain {
  Matrix gain;        // L, n_x by n_y
  Matrix covariance;  // P, steady-state error covariance
};

/// Continuous steady-state Kalman filter for x' = A x + B_w w, y = C x + v,
/// with E[w w'] = Q_c and E[v v'] = R_c.
KalmanGain kalman_steady_state(const Matrix& a, const Matrix& b_w,
                               const Matrix& c_meas, const Matrix& q_c,
                               const Matrix& r_c);

}  // namespace robobs
