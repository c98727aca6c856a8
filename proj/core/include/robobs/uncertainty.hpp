#pragma once

// Inverse input multiplicative residuals of a model population and the
// scalar weight that overbounds them.

#include <string>
#include <vector>

#include "robobs/lti.hpp"

namespace robobs {

struct PopulationModel {
  StateSpace nominal;               // G0: u -> x
  std::vector<StateSpace> members;  // G_i, same dimensions as the nominal
  Matrix measurement;               // C: x -> y
  std::vector<std::string> labels;

  void validate() const;
};

/// E(jw) = I - (G0(jw)^+ G(jw))^{-1} on the grid.
FrequencyResponse residual_response(const StateSpace& nominal,
                                    const StateSpace& member,
                                    const FrequencyGrid& grid);

std::vector<FrequencyResponse> compute_residuals(const PopulationModel& pop,
                                                 const FrequencyGrid& grid);

struct ResidualEnvelope {
  FrequencyGrid grid;
  std::vector<std::vector<double>> per_member;  // sigma_max traces
  std::vector<double> envelope;                 // pointwise max
};

ResidualEnvelope envelope(const std::vector<FrequencyResponse>& residuals);

struct UncertaintyWeight {
  StateSpace w;  // SISO, applied as w(s) I
  int order = 0;
  std::vector<double> margin_db;  // 20 log10(|w| / envelope) per grid point
};

/// Envelope values below this are lifted before fitting.
inline constexpr double kEnvelopeFloor = 1e-8;

UncertaintyWeight fit_overbound_weight(const ResidualEnvelope& env, int order,
                                       double headroom = 1.0);

}  // namespace robobs
