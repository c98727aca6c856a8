#pragma once

// Signal-level interconnection of state-space blocks. Each block input is a
// linear combination of external inputs and block outputs; each external
// output is a linear combination of block outputs and external inputs.

#include <vector>

#include "robobs/lti.hpp"

namespace robobs {

class BlockDiagram {
 public:
  /// Adds an external input group of the given width; returns its id.
  int add_input(Eigen::Index width);
  /// Adds a block; returns its id.
  int add_block(StateSpace sys);
  /// Adds an external output group; returns its id.
  int add_output(Eigen::Index width);

  /// block `to` input += gain * external input `from`.
  void input_to_block(int from, int to, const Matrix& gain);
  void input_to_block(int from, int to, double gain = 1.0);
  /// block `to` input += gain * block `from` output.
  void block_to_block(int from, int to, const Matrix& gain);
  void block_to_block(int from, int to, double gain = 1.0);
  /// external output `to` += gain * block `from` output.
  void block_to_output(int from, int to, const Matrix& gain);
  void block_to_output(int from, int to, double gain = 1.0);
  /// external output `to` += gain * external input `from`.
  void input_to_output(int from, int to, const Matrix& gain);
  void input_to_output(int from, int to, double gain = 1.0);

  /// Realization from all external inputs (in creation order) to all
  /// external outputs (in creation order). Throws AlgebraicLoop if the
  /// feedthrough loop is singular.
  StateSpace build() const;

 private:
  struct Link {
    int from;
    int to;
    Matrix gain;
  };
  Matrix identity_gain(Eigen::Index rows, Eigen::Index cols, double g) const;

  std::vector<Eigen::Index> input_widths_;
  std::vector<Eigen::Index> output_widths_;
  std::vector<StateSpace> blocks_;
  std::vector<Link> in_to_block_, block_to_block_, block_to_out_, in_to_out_;
};

}  // namespace robobs
