#pragma once

// Input-output observers x_hat = G (u + K (y - C x_hat)), their estimation
// error dynamics and the weighted generalized plant used for synthesis.

#include <string>

#include "robobs/plant.hpp"
#include "robobs/uncertainty.hpp"

namespace robobs {

struct WeightSet {
  StateSpace w_d;   // input disturbance shaping, n_u x n_u
  StateSpace w_n;   // measurement noise shaping, n_y x n_y
  StateSpace w_e;   // state error penalty, n_x x n_x
  StateSpace w_nu;  // correction penalty, n_u x n_u
};

struct WeightParams {
  double d_gain = 1.0;
  double d_bw_hz = 1.0;    // W_d corner
  double n_floor = 0.05;   // W_n constant level
  double e_gain = 1.0;
  double e_bw_hz = 1.0;    // W_e corner
  double nu_gain = 1.0;    // W_nu high-frequency gain
  double nu_bw_hz = 10.0;  // W_nu corner
};

/// First-order diagonal weights: W_d and W_e low-pass, W_n constant,
/// W_nu high-pass g s / (s + w).
WeightSet default_weights(const WeightParams& p, Eigen::Index n_u,
                          Eigen::Index n_x, Eigen::Index n_y);

struct ObserverRealization {
  StateSpace sys;  // inputs (u, y), outputs x_hat
  std::string source_label;
  StateSpace model;  // G
  Matrix c;
  StateSpace k;
};

ObserverRealization build_observer(const StateSpace& g, const Matrix& c,
                                   const StateSpace& k,
                                   const std::string& label = {});

/// Inputs (d_u, d_x, n), outputs (e_x, e_y).
StateSpace build_error_dynamics(const StateSpace& g, const Matrix& c,
                                const StateSpace& k);

struct PlantOptions {
  /// Adds a state disturbance d_x = state_disturbance_gain * w3 to the
  /// exogenous inputs.
  bool state_disturbance = false;
  double state_disturbance_gain = 1.0;
};

/// Outputs (z_delta, z1, z2, rho), inputs (w_delta, w1, w2[, w3], nu).
GeneralizedPlant build_generalized_plant(const StateSpace& g0, const Matrix& c,
                                         const StateSpace& w_delta,
                                         const WeightSet& weights,
                                         const PlantOptions& opts = {});

}  // namespace robobs
