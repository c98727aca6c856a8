#include "robobs/mu.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "robobs/errors.hpp"
#include "robobs/magfit.hpp"

namespace robobs {
namespace {

void check_dims(const CMatrix& n, const BlockStructure& b) {
  if (n.rows() != b.n_rows() || n.cols() != b.n_cols()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "N does not match the block structure");
  }
}

}  // namespace

double scaled_sigma(const CMatrix& n, const BlockStructure& b, double d) {
  CMatrix m = n;
  m.topRightCorner(b.delta_cols, b.perf_rows) *= d;
  m.bottomLeftCorner(b.perf_cols, b.delta_rows) /= d;
  return sigma_max(m);
}

MuPoint mu_upper_point(const CMatrix& n, const BlockStructure& blocks) {
  check_dims(n, blocks);
  const double lo = std::log(kDScaleMin), hi = std::log(kDScaleMax);
  constexpr int kCoarse = 25;
  std::vector<double> vals(kCoarse);
  int best = 0;
  for (int i = 0; i < kCoarse; ++i) {
    const double ld = lo + (hi - lo) * i / (kCoarse - 1);
    vals[i] = scaled_sigma(n, blocks, std::exp(ld));
    if (vals[i] < vals[best]) best = i;
  }
  const double step = (hi - lo) / (kCoarse - 1);
  double a = lo + step * std::max(0, best - 1);
  double b = lo + step * std::min(kCoarse - 1, best + 1);
  const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - ratio * (b - a), x2 = a + ratio * (b - a);
  double f1 = scaled_sigma(n, blocks, std::exp(x1));
  double f2 = scaled_sigma(n, blocks, std::exp(x2));
  while (b - a > 1e-6) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - ratio * (b - a);
      f1 = scaled_sigma(n, blocks, std::exp(x1));
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + ratio * (b - a);
      f2 = scaled_sigma(n, blocks, std::exp(x2));
    }
  }
  MuPoint out;
  double ld = f1 <= f2 ? x1 : x2;
  out.mu = std::min(f1, f2);
  // The bracket endpoints themselves are candidates too.
  for (double cand : {a, b}) {
    const double f = scaled_sigma(n, blocks, std::exp(cand));
    if (f < out.mu) {
      out.mu = f;
      ld = cand;
    }
  }
  if (vals[best] < out.mu) {
    out.mu = vals[best];
    ld = lo + step * best;
  }
  out.d = std::exp(ld);
  out.edge = ld <= lo + 1e-5 || ld >= hi - 1e-5;
  return out;
}

bool SSVReport::any_edge() const {
  return std::any_of(edge.begin(), edge.end(), [](char e) { return e != 0; });
}

SSVReport mu_upper_two_blocks(const FrequencyResponse& n,
                              const BlockStructure& blocks) {
  if (n.values.size() != n.grid.size() || n.grid.size() == 0) {
    throw Error(ErrorKind::kDimensionMismatch, "mu: empty or inconsistent response");
  }
  SSVReport rep;
  rep.grid = n.grid;
  rep.mu_upper.resize(n.grid.size());
  rep.d_opt.resize(n.grid.size());
  rep.edge.resize(n.grid.size());
  for (std::size_t k = 0; k < n.grid.size(); ++k) {
    const MuPoint p = mu_upper_point(n.values[k], blocks);
    rep.mu_upper[k] = p.mu;
    rep.d_opt[k] = p.d;
    rep.edge[k] = p.edge ? 1 : 0;
    if (k == 0 || p.mu > rep.peak_mu) {
      rep.peak_mu = p.mu;
      rep.peak_omega = n.grid[k];
    }
  }
  return rep;
}

bool rp_check(const SSVReport& report, double threshold) {
  return std::all_of(report.mu_upper.begin(), report.mu_upper.end(),
                     [&](double m) { return m < threshold; });
}

DScaleFit fit_dscale(const std::vector<double>& d_samples,
                     const FrequencyGrid& grid, int order) {
  if (order < 0) {
    throw Error(ErrorKind::kInvalidArgument, "D-scale fit order must be >= 0");
  }
  if (d_samples.size() != grid.size() || grid.size() == 0) {
    throw Error(ErrorKind::kDimensionMismatch, "D samples differ from the grid");
  }
  // Hold the end values for a decade beyond the grid so the fit stays flat
  // where the closed loop was not analysed.
  const std::size_t pad = 4;
  std::vector<double> omegas, targets;
  for (std::size_t i = pad; i > 0; --i) {
    omegas.push_back(grid[0] * std::pow(10.0, -double(i) / double(pad)));
    targets.push_back(d_samples.front());
  }
  omegas.insert(omegas.end(), grid.begin(), grid.end());
  targets.insert(targets.end(), d_samples.begin(), d_samples.end());
  for (std::size_t i = 1; i <= pad; ++i) {
    omegas.push_back(grid[grid.size() - 1] * std::pow(10.0, double(i) / double(pad)));
    targets.push_back(d_samples.back());
  }
  // The order is an upper bound: every order up to it is fitted and the
  // realization with the smallest error on the grid is kept.
  DScaleFit best;
  best.max_log_error = std::numeric_limits<double>::infinity();
  const FrequencyGrid padded(omegas);
  for (int o = 0; o <= order; ++o) {
    MagnitudeFitOptions opts;
    opts.order = o;
    opts.mode = FitMode::kMinimax;
    opts.biproper = true;
    MagnitudeFit fit;
    try {
      fit = fit_magnitude(padded, targets, opts);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kInfeasibleFit) throw;
      continue;
    }
    if (!is_stable(fit.sys) || fit.sys.d()(0, 0) == 0.0) continue;
    double err = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      err = std::max(err, std::abs(fit.log_ratio[pad + i]));
    }
    if (err < best.max_log_error - 1e-3) {
      best.d = std::move(fit.sys);
      best.max_log_error = err;
    }
  }
  if (!std::isfinite(best.max_log_error)) {
    throw Error(ErrorKind::kInfeasibleFit, "no admissible D-scale fit");
  }
  return best;
}

GeneralizedPlant scale_plant(const GeneralizedPlant& plant, const StateSpace& d) {
  plant.validate();
  if (d.inputs() != 1 || d.outputs() != 1) {
    throw Error(ErrorKind::kDimensionMismatch, "D scaling must be SISO");
  }
  if (d.d()(0, 0) == 0.0) {
    throw Error(ErrorKind::kNonInvertibleScale,
                "D scaling has zero feedthrough and cannot be inverted");
  }
  const PlantDims& dims = plant.dims;
  const StateSpace dinv = inverse(d);
  StateSpace in_scale =
      dims.delta_in > 0 ? append(diag_repeat(dinv, dims.delta_in),
                                 StateSpace::identity(dims.w + dims.ctl))
                        : StateSpace::identity(dims.inputs());
  StateSpace out_scale =
      dims.delta_out > 0
          ? append(diag_repeat(d, dims.delta_out),
                   StateSpace::identity(dims.z + dims.meas))
          : StateSpace::identity(dims.outputs());
  GeneralizedPlant out{series(series(in_scale, plant.sys), out_scale), dims};
  return out;
}

}  // namespace robobs
