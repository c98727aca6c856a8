#pragma once

// Continuous-time LTI state-space algebra.

#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace robobs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using Complex = std::complex<double>;

/// Real realization x' = A x + B u, y = C x + D u. A static gain has zero
/// states; its B and C are 0-by-m and p-by-0.
class StateSpace {
 public:
  StateSpace() = default;
  StateSpace(Matrix a, Matrix b, Matrix c, Matrix d);

  static StateSpace gain(const Matrix& d);
  static StateSpace identity(Eigen::Index n);
  static StateSpace zero(Eigen::Index outputs, Eigen::Index inputs);

  const Matrix& a() const { return a_; }
  const Matrix& b() const { return b_; }
  const Matrix& c() const { return c_; }
  const Matrix& d() const { return d_; }

  Eigen::Index states() const { return a_.rows(); }
  Eigen::Index inputs() const { return d_.cols(); }
  Eigen::Index outputs() const { return d_.rows(); }

  /// Sub-system on a contiguous block of outputs and inputs.
  StateSpace block(Eigen::Index out0, Eigen::Index n_out, Eigen::Index in0,
                   Eigen::Index n_in) const;
  StateSpace scaled(double k) const;

 private:
  Matrix a_{0, 0}, b_{0, 0}, c_{0, 0}, d_{0, 0};
};

/// Strictly increasing positive angular frequencies (rad/s).
class FrequencyGrid {
 public:
  FrequencyGrid() = default;
  explicit FrequencyGrid(std::vector<double> omegas);

  static FrequencyGrid logspace(double omega_lo, double omega_hi,
                                std::size_t n);
  static FrequencyGrid logspace_hz(double hz_lo, double hz_hi, std::size_t n);

  std::size_t size() const { return omegas_.size(); }
  double operator[](std::size_t k) const { return omegas_[k]; }
  const std::vector<double>& omegas() const { return omegas_; }
  auto begin() const { return omegas_.begin(); }
  auto end() const { return omegas_.end(); }

  friend bool operator==(const FrequencyGrid&, const FrequencyGrid&) = default;

 private:
  std::vector<double> omegas_;
};

struct FrequencyResponse {
  FrequencyGrid grid;
  std::vector<CMatrix> values;

  std::size_t size() const { return values.size(); }
};

/// C (sI - A)^{-1} B + D at a single complex point.
CMatrix evaluate(const StateSpace& sys, Complex s);
FrequencyResponse freq_response(const StateSpace& sys,
                                const FrequencyGrid& grid);

/// g2 * g1 (g1 drives g2).
StateSpace series(const StateSpace& g1, const StateSpace& g2);
StateSpace parallel(const StateSpace& g1, const StateSpace& g2);
/// Block-diagonal stacking: inputs and outputs concatenated.
StateSpace append(const StateSpace& g1, const StateSpace& g2);
/// Shared input, outputs concatenated.
StateSpace stack_outputs(const StateSpace& g1, const StateSpace& g2);
/// Closed loop g (I - sign h g)^{-1} with h in the feedback path.
StateSpace feedback(const StateSpace& g, const StateSpace& h, int sign = -1);
/// F_l(P, K): the last k.outputs() inputs of p are controls, the last
/// k.inputs() outputs of p are measurements.
StateSpace lft_lower(const StateSpace& p, const StateSpace& k);
/// Inverse of a square system with invertible feedthrough.
StateSpace inverse(const StateSpace& sys);
/// State transformation x = T z.
StateSpace similarity(const StateSpace& sys, const Matrix& t);
/// Repeats a SISO system on the diagonal n times.
StateSpace diag_repeat(const StateSpace& siso, Eigen::Index n);

CVector poles(const StateSpace& sys);
/// All poles with real part strictly below -margin.
bool is_stable(const StateSpace& sys, double margin = 0.0);
/// Finite transmission zeros of a square system, from the Rosenbrock pencil.
CVector zeros(const StateSpace& sys);
/// Stable with all finite transmission zeros in the open left half-plane.
bool is_minimum_phase(const StateSpace& sys);

struct GriddedNorm {
  double value = 0.0;
  double omega = 0.0;
};

/// Peak of the largest singular value over a grid, refined by golden
/// section between the neighbours of the grid argmax. Requires stability.
GriddedNorm hinf_norm_gridded(const StateSpace& sys, const FrequencyGrid& grid);

struct DiscreteStateSpace {
  StateSpace sys;  // (A_d, B_d, C, D)
  double dt = 0.0;
};

/// Zero-order-hold discretization through the exponential of
/// [[A, B], [0, 0]] dt.
DiscreteStateSpace discretize_zoh(const StateSpace& sys, double dt);

/// Hold equivalent with the first n_zoh inputs held and the rest linearly
/// interpolated between samples (triangle hold). The discrete state is
/// xi = x - foh_gain * w, with w the interpolated inputs.
struct MixedHold {
  DiscreteStateSpace dsys;
  Matrix foh_gain;  // n_x by (inputs - n_zoh)
};

MixedHold discretize_mixed_hold(const StateSpace& sys, double dt,
                                Eigen::Index n_zoh);

/// C (e^{j w dt} I - A_d)^{-1} B_d + D on the grid.
FrequencyResponse freq_response(const DiscreteStateSpace& dsys,
                                const FrequencyGrid& grid);

/// Runs x[n+1] = A_d x[n] + B_d u[n], y[n] = C x[n] + D u[n] over the rows
/// of `inputs`; returns one output row per sample.
Matrix simulate(const DiscreteStateSpace& dsys, const Matrix& inputs,
                const Vector& x0 = Vector());

double sigma_max(const CMatrix& m);
Vector singular_values(const CMatrix& m);

/// Grid spanning the dynamics of a system: a decade beyond its slowest and
/// fastest nonzero pole magnitudes.
FrequencyGrid dynamics_grid(const StateSpace& sys, std::size_t n);

}  // namespace robobs
