#pragma once

// DK iteration: H-infinity synthesis on the D-scaled plant alternated with
// mu analysis of the unscaled closed loop and a rational refit of D.

#include <vector>

#include "robobs/hinf.hpp"
#include "robobs/mu.hpp"

namespace robobs {

struct DKConfig {
  FrequencyGrid grid = FrequencyGrid::logspace_hz(0.01, 25.0, 61);
  int max_iters = 4;
  int d_fit_order = 8;
  double stop_mu = 1.0;
  HinfOptions hinf;

  void validate() const;
};

struct DKIteration {
  double gamma = 0.0;
  SSVReport ssv;
  /// Log-magnitude error of the D fit made after this iteration; zero when
  /// no refit followed.
  double d_fit_error = 0.0;
  StateSpace d_scale;  // scaling used for this iteration's synthesis
  SynthesisResult synthesis;
};

struct DKTrace {
  std::vector<DKIteration> iterations;
  SynthesisResult final;
  std::size_t final_index = 0;  // iteration supplying `final`
  bool converged = false;
};

/// Channel blocks of the closed loop F_l(P, K): Delta across the
/// uncertainty channels, the performance block across (w, z).
BlockStructure block_structure(const PlantDims& dims);

/// Closed-loop response F_l(P, K) on the grid.
FrequencyResponse closed_loop_response(const GeneralizedPlant& plant,
                                       const StateSpace& k,
                                       const FrequencyGrid& grid);

/// Starts from D = 1 and stops at the first iteration whose mu bound is
/// below stop_mu on the whole grid. Without convergence the iterate with the
/// lowest peak is returned as `final`.
DKTrace dk_iterate(const GeneralizedPlant& plant, const BlockStructure& blocks,
                   const DKConfig& cfg);

}  // namespace robobs
