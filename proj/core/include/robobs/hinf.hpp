#pragma once

// H-infinity output-feedback synthesis by gamma bisection on the two
// Riccati equations, returning the central controller.

#include <optional>

#include "robobs/plant.hpp"
#include "robobs/riccati.hpp"

namespace robobs {

struct HinfOptions {
  double gamma_min = 1e-3;
  double gamma_max = 1e3;
  double rel_tol = 1e-3;
  /// Size of the identity appended to rank-deficient D12 / D21.
  double regularization = 1e-6;
  /// Points in the closed-loop verification grid.
  std::size_t check_points = 200;
  RiccatiOptions riccati;
};

struct SynthesisDiagnostics {
  double x_residual = 0.0;  // relative CARE residuals at the returned gamma
  double y_residual = 0.0;
  double spectral_radius = 0.0;  // rho(X Y) / gamma^2
  double closed_loop_norm = 0.0;  // gridded norm of F_l(P, K)
  bool regularized_d12 = false;
  bool regularized_d21 = false;
};

struct SynthesisResult {
  StateSpace controller;
  double gamma = 0.0;
  int iterations = 0;
  SynthesisDiagnostics diagnostics;
};

/// Central controller at a fixed gamma, or nullopt when gamma is not
/// achievable. The last n_meas outputs of `plant` are measurements and the
/// last n_ctl inputs are controls.
std::optional<StateSpace> hinf_controller_at(const StateSpace& plant,
                                             Eigen::Index n_meas,
                                             Eigen::Index n_ctl, double gamma,
                                             const HinfOptions& opts = {});

SynthesisResult hinf_synthesize(const StateSpace& plant, Eigen::Index n_meas,
                                Eigen::Index n_ctl,
                                const HinfOptions& opts = {});

/// Treats the uncertainty and performance channels together as exogenous.
SynthesisResult hinf_synthesize(const GeneralizedPlant& plant,
                                const HinfOptions& opts = {});

/// PBH rank tests on the unstable and marginal modes.
bool is_stabilizable(const Matrix& a, const Matrix& b, double tol = 1e-9);
bool is_detectable(const Matrix& a, const Matrix& c, double tol = 1e-9);

}  // namespace robobs
