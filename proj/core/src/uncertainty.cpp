#include "robobs/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "robobs/errors.hpp"
#include "robobs/magfit.hpp"

namespace robobs {

void PopulationModel::validate() const {
  if (members.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "population has no members");
  }
  for (const auto& g : members) {
    if (g.inputs() != nominal.inputs() || g.outputs() != nominal.outputs()) {
      throw Error(ErrorKind::kDimensionMismatch,
                  "population member dimensions differ from the nominal");
    }
  }
  if (measurement.cols() != nominal.outputs()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "measurement matrix does not match the model state count");
  }
  if (!labels.empty() && labels.size() != members.size()) {
    throw Error(ErrorKind::kDimensionMismatch, "one label per member expected");
  }
}

FrequencyResponse residual_response(const StateSpace& nominal,
                                    const StateSpace& member,
                                    const FrequencyGrid& grid) {
  if (nominal.inputs() != member.inputs() ||
      nominal.outputs() != member.outputs()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "residual: member and nominal dimensions differ");
  }
  const Eigen::Index nu = nominal.inputs();
  FrequencyResponse out{grid, {}};
  out.values.reserve(grid.size());
  for (double w : grid) {
    const Complex s(0.0, w);
    const CMatrix g0 = evaluate(nominal, s);
    const CMatrix gi = evaluate(member, s);
    Eigen::JacobiSVD<CMatrix> svd(g0, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (sv.size() < nu || !(sv(nu - 1) > 1e-12 * std::max(1e-300, sv(0)))) {
      throw Error(ErrorKind::kRankDeficientNominal,
                  "nominal response rank deficient at omega = " +
                      std::to_string(w));
    }
    const CMatrix ratio = svd.solve(gi);  // G0^+ G_i
    Eigen::JacobiSVD<CMatrix> rs(ratio);
    const auto& rsv = rs.singularValues();
    if (!(rsv(nu - 1) > 1e-12 * std::max(1e-300, rsv(0)))) {
      throw Error(ErrorKind::kSingularRatio,
                  "G0^+ G singular at omega = " + std::to_string(w));
    }
    out.values.push_back(CMatrix::Identity(nu, nu) -
                         ratio.partialPivLu().inverse());
  }
  return out;
}

std::vector<FrequencyResponse> compute_residuals(const PopulationModel& pop,
                                                 const FrequencyGrid& grid) {
  pop.validate();
  std::vector<FrequencyResponse> out;
  out.reserve(pop.members.size());
  for (const auto& g : pop.members) {
    out.push_back(residual_response(pop.nominal, g, grid));
  }
  return out;
}

ResidualEnvelope envelope(const std::vector<FrequencyResponse>& residuals) {
  if (residuals.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "envelope of an empty set");
  }
  ResidualEnvelope env;
  env.grid = residuals.front().grid;
  env.envelope.assign(env.grid.size(), 0.0);
  for (const auto& r : residuals) {
    if (!(r.grid == env.grid) || r.values.size() != env.grid.size()) {
      throw Error(ErrorKind::kGridMismatch, "residual sets use different grids");
    }
    std::vector<double> trace(env.grid.size());
    for (std::size_t k = 0; k < trace.size(); ++k) {
      trace[k] = sigma_max(r.values[k]);
      env.envelope[k] = std::max(env.envelope[k], trace[k]);
    }
    env.per_member.push_back(std::move(trace));
  }
  return env;
}

UncertaintyWeight fit_overbound_weight(const ResidualEnvelope& env, int order,
                                       double headroom) {
  if (order < 1) {
    throw Error(ErrorKind::kInvalidArgument, "weight order must be >= 1");
  }
  if (!(headroom >= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "headroom must be >= 1");
  }
  std::vector<double> target(env.envelope.size());
  for (std::size_t k = 0; k < target.size(); ++k) {
    const double e = env.envelope[k];
    if (!(e >= 0.0) || !std::isfinite(e)) {
      throw Error(ErrorKind::kNonPositiveEnvelope,
                  "envelope has a negative or non-finite entry");
    }
    target[k] = headroom * std::max(e, kEnvelopeFloor);
  }
  MagnitudeFitOptions opts;
  opts.order = order;
  opts.mode = FitMode::kOverbound;
  MagnitudeFit fit = fit_magnitude(env.grid, target, opts);
  UncertaintyWeight out;
  out.w = std::move(fit.sys);
  out.order = order;
  out.margin_db.resize(target.size());
  for (std::size_t k = 0; k < target.size(); ++k) {
    const double m = std::abs(evaluate(out.w, Complex(0.0, env.grid[k]))(0, 0));
    out.margin_db[k] =
        20.0 * std::log10(m / std::max(env.envelope[k], kEnvelopeFloor));
  }
  return out;
}

}  // namespace robobs
