#include "robobs/dk.hpp"

#include <string>

#include "robobs/errors.hpp"

namespace robobs {

void DKConfig::validate() const {
  if (max_iters < 1 || d_fit_order < 0 || !(stop_mu > 0.0) || grid.size() == 0) {
    throw Error(ErrorKind::kInvalidArgument,
                "DK config needs max_iters >= 1, d_fit_order >= 0, stop_mu > 0 and a grid");
  }
}

BlockStructure block_structure(const PlantDims& dims) {
  return BlockStructure{dims.delta_in, dims.delta_out, dims.w, dims.z};
}

FrequencyResponse closed_loop_response(const GeneralizedPlant& plant,
                                       const StateSpace& k,
                                       const FrequencyGrid& grid) {
  return freq_response(lft_lower(plant.sys, k), grid);
}

DKTrace dk_iterate(const GeneralizedPlant& plant, const BlockStructure& blocks,
                   const DKConfig& cfg) {
  cfg.validate();
  plant.validate();
  if (blocks.n_rows() != plant.dims.delta_out + plant.dims.z ||
      blocks.n_cols() != plant.dims.delta_in + plant.dims.w) {
    throw Error(ErrorKind::kDimensionMismatch,
                "DK block structure does not match the plant channels");
  }
  DKTrace trace;
  StateSpace d = StateSpace::gain(Matrix::Identity(1, 1));
  for (int it = 0; it < cfg.max_iters; ++it) {
    DKIteration rec;
    rec.d_scale = d;
    try {
      rec.synthesis = hinf_synthesize(scale_plant(plant, d), cfg.hinf);
      rec.gamma = rec.synthesis.gamma;
      rec.ssv = mu_upper_two_blocks(
          closed_loop_response(plant, rec.synthesis.controller, cfg.grid), blocks);
    } catch (const Error& e) {
      throw Error(e.kind(), "DK iteration " + std::to_string(it + 1) + ": " + e.what());
    }
    const bool done = rp_check(rec.ssv, cfg.stop_mu);
    if (trace.iterations.empty() ||
        rec.ssv.peak_mu < trace.iterations[trace.final_index].ssv.peak_mu) {
      trace.final_index = trace.iterations.size();
    }
    if (done) {
      trace.final_index = trace.iterations.size();
      trace.converged = true;
    } else if (it + 1 < cfg.max_iters) {
      try {
        DScaleFit fit = fit_dscale(rec.ssv.d_opt, cfg.grid, cfg.d_fit_order);
        rec.d_fit_error = fit.max_log_error;
        d = std::move(fit.d);
      } catch (const Error& e) {
        throw Error(e.kind(), "DK iteration " + std::to_string(it + 1) +
                                  " D fit: " + e.what());
      }
    }
    trace.iterations.push_back(std::move(rec));
    if (done) break;
  }
  trace.final = trace.iterations[trace.final_index].synthesis;
  return trace;
}

}  // namespace robobs
