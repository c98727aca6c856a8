#include "robobs/interconnect.hpp"

#include <numeric>
#include <string>

#include "robobs/errors.hpp"

namespace robobs {

namespace {

std::vector<Eigen::Index> offsets(const std::vector<Eigen::Index>& widths) {
  std::vector<Eigen::Index> off(widths.size() + 1, 0);
  std::partial_sum(widths.begin(), widths.end(), off.begin() + 1);
  return off;
}

void check_id(int id, std::size_t count, const char* what) {
  if (id < 0 || static_cast<std::size_t>(id) >= count) {
    throw Error(ErrorKind::kInvalidArgument,
                std::string("BlockDiagram: unknown ") + what + " id");
  }
}

}  // namespace

int BlockDiagram::add_input(Eigen::Index width) {
  input_widths_.push_back(width);
  return static_cast<int>(input_widths_.size()) - 1;
}

int BlockDiagram::add_block(StateSpace sys) {
  blocks_.push_back(std::move(sys));
  return static_cast<int>(blocks_.size()) - 1;
}

int BlockDiagram::add_output(Eigen::Index width) {
  output_widths_.push_back(width);
  return static_cast<int>(output_widths_.size()) - 1;
}

Matrix BlockDiagram::identity_gain(Eigen::Index rows, Eigen::Index cols,
                                   double g) const {
  if (rows != cols) {
    throw Error(ErrorKind::kDimensionMismatch,
                "BlockDiagram: scalar gain needs equal widths (" +
                    std::to_string(rows) + " vs " + std::to_string(cols) + ")");
  }
  return g * Matrix::Identity(rows, cols);
}

void BlockDiagram::input_to_block(int from, int to, const Matrix& gain) {
  check_id(from, input_widths_.size(), "input");
  check_id(to, blocks_.size(), "block");
  if (gain.rows() != blocks_[to].inputs() || gain.cols() != input_widths_[from])
    throw Error(ErrorKind::kDimensionMismatch, "input_to_block gain shape");
  in_to_block_.push_back({from, to, gain});
}
void BlockDiagram::input_to_block(int from, int to, double gain) {
  check_id(from, input_widths_.size(), "input");
  check_id(to, blocks_.size(), "block");
  input_to_block(from, to,
                 identity_gain(blocks_[to].inputs(), input_widths_[from], gain));
}

void BlockDiagram::block_to_block(int from, int to, const Matrix& gain) {
  check_id(from, blocks_.size(), "block");
  check_id(to, blocks_.size(), "block");
  if (gain.rows() != blocks_[to].inputs() ||
      gain.cols() != blocks_[from].outputs())
    throw Error(ErrorKind::kDimensionMismatch, "block_to_block gain shape");
  block_to_block_.push_back({from, to, gain});
}
void BlockDiagram::block_to_block(int from, int to, double gain) {
  check_id(from, blocks_.size(), "block");
  check_id(to, blocks_.size(), "block");
  block_to_block(
      from, to,
      identity_gain(blocks_[to].inputs(), blocks_[from].outputs(), gain));
}

void BlockDiagram::block_to_output(int from, int to, const Matrix& gain) {
  check_id(from, blocks_.size(), "block");
  check_id(to, output_widths_.size(), "output");
  if (gain.rows() != output_widths_[to] ||
      gain.cols() != blocks_[from].outputs())
    throw Error(ErrorKind::kDimensionMismatch, "block_to_output gain shape");
  block_to_out_.push_back({from, to, gain});
}
void BlockDiagram::block_to_output(int from, int to, double gain) {
  check_id(from, blocks_.size(), "block");
  check_id(to, output_widths_.size(), "output");
  block_to_output(
      from, to, identity_gain(output_widths_[to], blocks_[from].outputs(), gain));
}

void BlockDiagram::input_to_output(int from, int to, const Matrix& gain) {
  check_id(from, input_widths_.size(), "input");
  check_id(to, output_widths_.size(), "output");
  if (gain.rows() != output_widths_[to] || gain.cols() != input_widths_[from])
    throw Error(ErrorKind::kDimensionMismatch, "input_to_output gain shape");
  in_to_out_.push_back({from, to, gain});
}
void BlockDiagram::input_to_output(int from, int to, double gain) {
  check_id(from, input_widths_.size(), "input");
  check_id(to, output_widths_.size(), "output");
  input_to_output(from, to,
                  identity_gain(output_widths_[to], input_widths_[from], gain));
}

StateSpace BlockDiagram::build() const {
  std::vector<Eigen::Index> bx, bu, by;
  for (const auto& b : blocks_) {
    bx.push_back(b.states());
    bu.push_back(b.inputs());
    by.push_back(b.outputs());
  }
  const auto ox = offsets(bx), ou = offsets(bu), oy = offsets(by);
  const auto ow = offsets(input_widths_), oz = offsets(output_widths_);
  const Eigen::Index nx = ox.back(), nu = ou.back(), ny = oy.back();
  const Eigen::Index nw = ow.back(), nz = oz.back();

  Matrix a = Matrix::Zero(nx, nx), b = Matrix::Zero(nx, nu);
  Matrix c = Matrix::Zero(ny, nx), d = Matrix::Zero(ny, nu);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& s = blocks_[i];
    a.block(ox[i], ox[i], bx[i], bx[i]) = s.a();
    b.block(ox[i], ou[i], bx[i], bu[i]) = s.b();
    c.block(oy[i], ox[i], by[i], bx[i]) = s.c();
    d.block(oy[i], ou[i], by[i], bu[i]) = s.d();
  }
  // u_blocks = My y_blocks + Mw w ; z = Ny y_blocks + Nw w
  Matrix my = Matrix::Zero(nu, ny), mw = Matrix::Zero(nu, nw);
  Matrix ny_m = Matrix::Zero(nz, ny), nw_m = Matrix::Zero(nz, nw);
  for (const auto& l : in_to_block_)
    mw.block(ou[l.to], ow[l.from], bu[l.to], input_widths_[l.from]) += l.gain;
  for (const auto& l : block_to_block_)
    my.block(ou[l.to], oy[l.from], bu[l.to], by[l.from]) += l.gain;
  for (const auto& l : block_to_out_)
    ny_m.block(oz[l.to], oy[l.from], output_widths_[l.to], by[l.from]) +=
        l.gain;
  for (const auto& l : in_to_out_)
    nw_m.block(oz[l.to], ow[l.from], output_widths_[l.to],
               input_widths_[l.from]) += l.gain;

  // (I - My D) u = My C x + Mw w
  Matrix u_x(nu, nx), u_w(nu, nw);
  if (nu > 0) {
    const Matrix e = Matrix::Identity(nu, nu) - my * d;
    Eigen::FullPivLU<Matrix> lu(e);
    if (!lu.isInvertible()) {
      throw Error(ErrorKind::kAlgebraicLoop,
                  "BlockDiagram: feedthrough loop is singular");
    }
    u_x = lu.solve(my * c);
    u_w = lu.solve(mw);
  }
  const Matrix y_x = c + d * u_x, y_w = d * u_w;
  return StateSpace(a + b * u_x, b * u_w, ny_m * y_x, ny_m * y_w + nw_m);
}

}  // namespace robobs
