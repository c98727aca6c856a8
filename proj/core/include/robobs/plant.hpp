#pragma once

#include "robobs/lti.hpp"

namespace robobs {

/// Channel partition of a generalized plant. Outputs are ordered
/// (delta_out, z, meas) and inputs (delta_in, w, ctl).
struct PlantDims {
  Eigen::Index delta_out = 0;
  Eigen::Index z = 0;
  Eigen::Index delta_in = 0;
  Eigen::Index w = 0;
  Eigen::Index meas = 0;
  Eigen::Index ctl = 0;

  Eigen::Index outputs() const { return delta_out + z + meas; }
  Eigen::Index inputs() const { return delta_in + w + ctl; }
  friend bool operator==(const PlantDims&, const PlantDims&) = default;
};

struct GeneralizedPlant {
  StateSpace sys;
  PlantDims dims;

  /// Throws DimensionMismatch if dims do not partition sys.
  void validate() const;
};

}  // namespace robobs
