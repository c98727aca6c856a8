#pragma once

// Stable minimum-phase SISO fits to magnitude samples. The squared
// magnitude is fitted as a rational function of x = w^2 in a barycentric
// basis by log-Chebyshev bisection over linear programs, then split by
// spectral factorization.

#include <vector>

#include "robobs/lti.hpp"

namespace robobs {

enum class FitMode {
  kOverbound,  // |w| >= target everywhere, minimize max log excess
  kMinimax,    // minimize max |log |w| - log target|
};

struct MagnitudeFitOptions {
  int order = 4;
  FitMode mode = FitMode::kMinimax;
  /// Bisection tolerance on the squared-magnitude log band.
  double band_tol = 1e-4;
  /// Log-spaced points used to keep numerator and denominator positive,
  /// spanning two decades beyond the fit grid on both sides.
  std::size_t positivity_points = 300;
  /// Pads the numerator with zeros far above the grid so the fit has a
  /// nonzero high-frequency gain.
  bool biproper = false;
};

struct MagnitudeFit {
  StateSpace sys;
  /// log(|w(j w_k)| / target_k), natural log, per grid point.
  std::vector<double> log_ratio;
  double max_abs_log_error = 0.0;
};

MagnitudeFit fit_magnitude(const FrequencyGrid& grid,
                           const std::vector<double>& target,
                           const MagnitudeFitOptions& opts);

/// Stable minimum-phase realization of k * prod(s - z) / prod(s - p) as a
/// cascade of unit-DC first and second order sections. Zeros and poles
/// must lie in the open left half-plane and come in conjugate pairs;
/// there may be no more zeros than poles.
StateSpace realize_zpk(const std::vector<Complex>& zeros,
                       const std::vector<Complex>& poles, double dc_gain);

}  // namespace robobs
