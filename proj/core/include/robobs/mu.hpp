#pragma once

// Structured singular value upper bound for one full uncertainty block and
// one full performance block, and rational fits of the optimal D scaling.

#include <vector>

#include "robobs/plant.hpp"

namespace robobs {

/// Delta maps the N rows z_delta to the N columns w_delta; the performance
/// block likewise maps z to w.
struct BlockStructure {
  Eigen::Index delta_rows = 0;  // w_delta
  Eigen::Index delta_cols = 0;  // z_delta
  Eigen::Index perf_rows = 0;   // w
  Eigen::Index perf_cols = 0;   // z

  Eigen::Index n_rows() const { return delta_cols + perf_cols; }
  Eigen::Index n_cols() const { return delta_rows + perf_rows; }
};

inline constexpr double kDScaleMin = 1e-6;
inline constexpr double kDScaleMax = 1e6;

struct MuPoint {
  double mu = 0.0;
  double d = 1.0;
  bool edge = false;  // optimum at the boundary of [kDScaleMin, kDScaleMax]
};

/// sigma_max of diag(d I, I) n diag(I/d, I).
double scaled_sigma(const CMatrix& n, const BlockStructure& blocks, double d);

/// Minimizes scaled_sigma over d by a 25-point log grid followed by
/// golden-section search on log d.
MuPoint mu_upper_point(const CMatrix& n, const BlockStructure& blocks);

struct SSVReport {
  FrequencyGrid grid;
  std::vector<double> mu_upper;
  std::vector<double> d_opt;
  std::vector<char> edge;
  double peak_omega = 0.0;
  double peak_mu = 0.0;

  bool any_edge() const;
};

SSVReport mu_upper_two_blocks(const FrequencyResponse& n,
                              const BlockStructure& blocks);

/// True iff mu_upper < threshold at every grid point.
bool rp_check(const SSVReport& report, double threshold = 1.0);

struct DScaleFit {
  StateSpace d;
  double max_log_error = 0.0;  // natural-log magnitude error on the grid
};

DScaleFit fit_dscale(const std::vector<double>& d_samples,
                     const FrequencyGrid& grid, int order);

/// diag(d I, I, I) P diag(I/d, I, I) over the delta channels.
GeneralizedPlant scale_plant(const GeneralizedPlant& plant, const StateSpace& d);

}  // namespace robobs
