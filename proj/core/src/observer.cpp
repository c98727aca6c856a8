#include "robobs/observer.hpp"

#include <cmath>

#include "robobs/errors.hpp"
#include "robobs/interconnect.hpp"

namespace robobs {
namespace {

StateSpace first_order_lowpass(double gain, double wc) {
  return StateSpace(Matrix::Constant(1, 1, -wc), Matrix::Constant(1, 1, 1.0),
                    Matrix::Constant(1, 1, gain * wc), Matrix::Zero(1, 1));
}

StateSpace first_order_highpass(double gain, double wc) {
  // g s / (s + wc) = g - g wc / (s + wc)
  return StateSpace(Matrix::Constant(1, 1, -wc), Matrix::Constant(1, 1, 1.0),
                    Matrix::Constant(1, 1, -gain * wc),
                    Matrix::Constant(1, 1, gain));
}

void check_observer_dims(const StateSpace& g, const Matrix& c,
                         const StateSpace& k) {
  if (c.cols() != g.outputs() || k.inputs() != c.rows() ||
      k.outputs() != g.inputs()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "observer: G, C and K dimensions are inconsistent");
  }
}

}  // namespace

WeightSet default_weights(const WeightParams& p, Eigen::Index n_u,
                          Eigen::Index n_x, Eigen::Index n_y) {
  if (!(p.d_bw_hz > 0.0 && p.e_bw_hz > 0.0 && p.nu_bw_hz > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "weight bandwidths must be positive");
  }
  const double two_pi = 2.0 * M_PI;
  WeightSet w;
  w.w_d = diag_repeat(first_order_lowpass(p.d_gain, two_pi * p.d_bw_hz), n_u);
  w.w_n = StateSpace::gain(p.n_floor * Matrix::Identity(n_y, n_y));
  w.w_e = diag_repeat(first_order_lowpass(p.e_gain, two_pi * p.e_bw_hz), n_x);
  w.w_nu = diag_repeat(first_order_highpass(p.nu_gain, two_pi * p.nu_bw_hz), n_u);
  return w;
}

namespace {

// x_hat = G (u + K (y - C x_hat)); the same algebra holds for sampled blocks.
StateSpace observer_loop(const StateSpace& g, const Matrix& c, const StateSpace& k) {
  BlockDiagram bd;
  const int u = bd.add_input(g.inputs());
  const int y = bd.add_input(c.rows());
  const int bg = bd.add_block(g);
  const int bk = bd.add_block(k);
  const int xhat = bd.add_output(g.outputs());
  bd.input_to_block(u, bg);
  bd.block_to_block(bk, bg);
  bd.input_to_block(y, bk);
  bd.block_to_block(bg, bk, -c);
  bd.block_to_output(bg, xhat);
  return bd.build();
}

}  // namespace

ObserverRealization build_observer(const StateSpace& g, const Matrix& c,
                                   const StateSpace& k,
                                   const std::string& label) {
  check_observer_dims(g, c, k);
  ObserverRealization obs{observer_loop(g, c, k), label, g, c, k};
  if (!is_stable(obs.sys)) {
    throw Error(ErrorKind::kUnstableObserver,
                "observer " + (label.empty() ? std::string("(unnamed)") : label) +
                    " is not internally stable");
  }
  return obs;
}

StateSpace build_error_dynamics(const StateSpace& g, const Matrix& c,
                                const StateSpace& k) {
  check_observer_dims(g, c, k);
  const Eigen::Index nu = g.inputs(), nx = g.outputs(), ny = c.rows();
  BlockDiagram bd;
  const int du = bd.add_input(nu);
  const int dx = bd.add_input(nx);
  const int n = bd.add_input(ny);
  const int bg = bd.add_block(g);
  const int bk = bd.add_block(k);
  const int ex = bd.add_output(nx);
  const int ey = bd.add_output(ny);
  // e_x = G (d_u - nu) + d_x, nu = K (C e_x + n)
  bd.input_to_block(du, bg);
  bd.block_to_block(bk, bg, -1.0);
  bd.block_to_block(bg, bk, c);
  bd.input_to_block(dx, bk, c);
  bd.input_to_block(n, bk);
  bd.block_to_output(bg, ex);
  bd.input_to_output(dx, ex);
  bd.block_to_output(bg, ey, c);
  bd.input_to_output(dx, ey, c);
  bd.input_to_output(n, ey);
  return bd.build();
}

GeneralizedPlant build_generalized_plant(const StateSpace& g0, const Matrix& c,
                                         const StateSpace& w_delta,
                                         const WeightSet& weights,
                                         const PlantOptions& opts) {
  const Eigen::Index nu = g0.inputs(), nx = g0.outputs(), ny = c.rows();
  if (c.cols() != nx || w_delta.inputs() != 1 || w_delta.outputs() != 1 ||
      weights.w_d.inputs() != nu || weights.w_d.outputs() != nu ||
      weights.w_n.inputs() != ny || weights.w_n.outputs() != ny ||
      weights.w_e.inputs() != nx || weights.w_e.outputs() != nx ||
      weights.w_nu.inputs() != nu || weights.w_nu.outputs() != nu) {
    throw Error(ErrorKind::kDimensionMismatch,
                "generalized plant: model and weight dimensions disagree");
  }
  BlockDiagram bd;
  const int w_del = bd.add_input(nu);
  const int w1 = bd.add_input(nu);
  const int w2 = bd.add_input(ny);
  const int w3 = opts.state_disturbance ? bd.add_input(nx) : -1;
  const int nu_in = bd.add_input(nu);

  const int bwd = bd.add_block(weights.w_d);
  const int bg = bd.add_block(g0);
  const int bdel = bd.add_block(diag_repeat(w_delta, nu));
  const int bwe = bd.add_block(weights.w_e);
  const int bwnu = bd.add_block(weights.w_nu);
  const int bwn = bd.add_block(weights.w_n);

  const int z_del = bd.add_output(nu);
  const int z1 = bd.add_output(nx);
  const int z2 = bd.add_output(nu);
  const int rho = bd.add_output(ny);

  // v = W_d w1 - nu + w_delta drives both G0 and W_delta.
  bd.input_to_block(w1, bwd);
  for (int target : {bg, bdel}) {
    bd.block_to_block(bwd, target);
    bd.input_to_block(nu_in, target, -1.0);
    bd.input_to_block(w_del, target);
  }
  // e_x = G0 v (+ d_x)
  bd.block_to_block(bg, bwe);
  bd.block_to_output(bg, rho, c);
  if (w3 >= 0) {
    const Matrix gx = opts.state_disturbance_gain * Matrix::Identity(nx, nx);
    bd.input_to_block(w3, bwe, gx);
    bd.input_to_output(w3, rho, c * gx);
  }
  bd.input_to_block(nu_in, bwnu);
  bd.input_to_block(w2, bwn);

  bd.block_to_output(bdel, z_del);
  bd.block_to_output(bwe, z1);
  bd.block_to_output(bwnu, z2);
  bd.block_to_output(bwn, rho);

  PlantDims dims;
  dims.delta_out = nu;
  dims.z = nx + nu;
  dims.delta_in = nu;
  dims.w = nu + ny + (opts.state_disturbance ? nx : 0);
  dims.meas = ny;
  dims.ctl = nu;
  GeneralizedPlant p{bd.build(), dims};
  p.validate();
  return p;
}

}  // namespace robobs
