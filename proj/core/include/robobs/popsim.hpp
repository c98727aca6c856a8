#pragma once

// Synthetic population of two-joint flexible manipulators: parametric
// models, multisine excitation, simulation, FRF estimation and estimator
// evaluation.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "robobs/observer.hpp"
#include "robobs/riccati.hpp"
#include "robobs/uncertainty.hpp"

namespace robobs {

/// One joint: hub driven by motor current, link attached through a spring.
///   J_h th'' = k_t u + k al - b_h th' - k_h th
///   J_l (th'' + al'') = -k al - b_l (th' + al')
struct JointParams {
  double j_h = 2e-3;  // kg m^2
  double j_l = 8e-3;  // kg m^2
  double k = 2.0;     // N m / rad
  double b_h = 5e-3;  // N m s / rad
  double b_l = 1e-3;  // N m s / rad
  double k_t = 0.1;   // N m / A
  double k_h = 0.6;   // N m / rad, hub restoring stiffness

  void validate() const;
};

using JointPair = std::array<JointParams, 2>;

JointPair default_joints();

/// States (th1, al1, th2, al2, th1', al1', th2', al2'), inputs (i1, i2),
/// outputs the four positions in radians.
StateSpace make_member(const JointPair& params);

/// Picks th1 and th2 out of the four positions.
Matrix measurement_matrix();

struct PopulationSpec {
  JointPair base = default_joints();
  std::vector<std::array<double, 2>> stiffness_scales = {
      {0.7, 0.7}, {0.85, 0.85}, {1.15, 1.15}, {1.4, 1.4}};
  std::uint64_t seed = 1;

  void validate() const;
  /// Per-joint geometric mean of the scales.
  std::array<double, 2> nominal_scales() const;
};

JointPair scaled_joints(const JointPair& base, const std::array<double, 2>& s);
PopulationModel make_population(const PopulationSpec& spec);

/// Sum of cosines on the given DFT bins of a record of n_samples, with
/// uniform random phases and the requested RMS.
Vector multisine(std::size_t n_samples, const std::vector<int>& lines,
                 double rms, std::uint64_t seed);

/// Odd bins k with k / (period dt) <= f_max_hz.
std::vector<int> odd_lines(std::size_t period, double dt, double f_max_hz);

struct Dataset {
  std::string label;
  double dt = 0.0;
  Matrix u;  // samples x n_u (A)
  Matrix x;  // samples x n_x positions (rad)
  Matrix y;  // samples x n_y measured positions (rad)
  std::uint64_t noise_seed = 0;
};

struct SimulationOptions {
  double y_std = 0.0;  // measurement noise standard deviation (rad)
  std::uint64_t seed = 0;
  Vector x0;           // initial model state, zero when empty
};

Dataset simulate(const StateSpace& model, const Matrix& c, const Matrix& u,
                 double dt, const SimulationOptions& opts = {});

/// Initial state that makes the response to a periodically repeated
/// u_period periodic from the first sample.
Vector periodic_initial_state(const StateSpace& model, const Matrix& u_period,
                              double dt);

struct FrfRecord {
  Matrix input;   // samples x n_u
  Matrix output;  // samples x n_out
};

/// FRF at the excited bins from at least n_u experiments. Each record is
/// split into periods; the first `transient_periods` are dropped and the
/// next `periods` averaged before the DFT. G solves Y = G U per bin.
FrequencyResponse frf_estimate(const std::vector<FrfRecord>& records,
                               std::size_t period, std::size_t transient_periods,
                               std::size_t periods, const std::vector<int>& lines,
                               double dt);

/// Estimates x_hat (samples x n_x) from the dataset's (u, y) with the
/// observer discretized as a whole: u held, y interpolated between samples.
Matrix run_observer(const ObserverRealization& obs, const Dataset& data);

/// Continuous steady-state Kalman filter on the full model, discretized as
/// run_observer. Returns position estimates.
Matrix run_kalman(const StateSpace& model, const Matrix& c,
                  const KalmanGain& gain, const Dataset& data);

/// Kalman gain for input disturbance and measurement noise intensities.
KalmanGain kalman_for_model(const StateSpace& model, const Matrix& c,
                            double q_input, double r_meas);

struct StateMetrics {
  double rms = 0.0;
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

struct ErrorMetrics {
  std::vector<StateMetrics> states;
};

/// Per-column RMS and absolute-error five-number summary after dropping
/// the first `discard_s` seconds.
ErrorMetrics metrics(const Matrix& truth, const Matrix& estimate, double dt,
                     double discard_s = 2.0);

inline constexpr double kRadToDeg = 180.0 / 3.14159265358979323846;

}  // namespace robobs
