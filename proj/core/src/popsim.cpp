#include "robobs/popsim.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "robobs/errors.hpp"

namespace robobs {

void JointParams::validate() const {
  for (double v : {j_h, j_l, k, b_h, b_l, k_t, k_h}) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorKind::kInvalidArgument,
                  "joint parameters must be strictly positive");
    }
  }
}

JointPair default_joints() {
  JointPair p;
  p[0].k = 2.0;
  p[1].k = 3.0;
  return p;
}

StateSpace make_member(const JointPair& params) {
  for (const auto& p : params) p.validate();
  Matrix a = Matrix::Zero(8, 8), b = Matrix::Zero(8, 2);
  for (int j = 0; j < 2; ++j) {
    const JointParams& p = params[j];
    const int th = 2 * j, al = 2 * j + 1;  // position indices
    const int dth = 4 + th, dal = 4 + al;  // rate indices
    a(th, dth) = 1.0;
    a(al, dal) = 1.0;
    // Hub acceleration.
    a(dth, th) = -p.k_h / p.j_h;
    a(dth, al) = p.k / p.j_h;
    a(dth, dth) = -p.b_h / p.j_h;
    b(dth, j) = p.k_t / p.j_h;
    // al'' = -(k al + b_l (th' + al')) / J_l - th''
    a.row(dal) = -a.row(dth);
    a(dal, al) -= p.k / p.j_l;
    a(dal, dth) -= p.b_l / p.j_l;
    a(dal, dal) -= p.b_l / p.j_l;
    b(dal, j) = -b(dth, j);
  }
  Matrix c = Matrix::Zero(4, 8);
  c.leftCols(4).setIdentity();
  return StateSpace(a, b, c, Matrix::Zero(4, 2));
}

Matrix measurement_matrix() {
  Matrix c = Matrix::Zero(2, 4);
  c(0, 0) = 1.0;
  c(1, 2) = 1.0;
  return c;
}

void PopulationSpec::validate() const {
  for (const auto& p : base) p.validate();
  if (stiffness_scales.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "population needs a configuration");
  }
  for (const auto& s : stiffness_scales) {
    if (!(s[0] > 0.0 && s[1] > 0.0)) {
      throw Error(ErrorKind::kInvalidArgument, "stiffness scales must be positive");
    }
  }
}

std::array<double, 2> PopulationSpec::nominal_scales() const {
  std::array<double, 2> out{0.0, 0.0};
  for (const auto& s : stiffness_scales) {
    out[0] += std::log(s[0]);
    out[1] += std::log(s[1]);
  }
  const double n = static_cast<double>(stiffness_scales.size());
  return {std::exp(out[0] / n), std::exp(out[1] / n)};
}

JointPair scaled_joints(const JointPair& base, const std::array<double, 2>& s) {
  JointPair p = base;
  p[0].k *= s[0];
  p[1].k *= s[1];
  return p;
}

PopulationModel make_population(const PopulationSpec& spec) {
  spec.validate();
  PopulationModel pop;
  pop.nominal = make_member(scaled_joints(spec.base, spec.nominal_scales()));
  pop.measurement = measurement_matrix();
  for (std::size_t i = 0; i < spec.stiffness_scales.size(); ++i) {
    const auto& s = spec.stiffness_scales[i];
    pop.members.push_back(make_member(scaled_joints(spec.base, s)));
    char buf[64];
    std::snprintf(buf, sizeof buf, "cfg%zu_k%.3g_%.3g", i, s[0], s[1]);
    pop.labels.emplace_back(buf);
  }
  return pop;
}

Vector multisine(std::size_t n_samples, const std::vector<int>& lines,
                 double rms, std::uint64_t seed) {
  if (!(rms > 0.0) || lines.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "multisine needs lines and rms > 0");
  }
  for (int k : lines) {
    if (k <= 0 || 2 * static_cast<std::size_t>(k) >= n_samples) {
      throw Error(ErrorKind::kLineAboveNyquist,
                  "multisine line " + std::to_string(k) + " is not below Nyquist");
    }
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
  Vector u = Vector::Zero(static_cast<Eigen::Index>(n_samples));
  const double n = static_cast<double>(n_samples);
  for (int k : lines) {
    const double ph = phase(rng);
    for (std::size_t t = 0; t < n_samples; ++t) {
      // Reduce k t mod N first so the argument stays exact.
      const double m = static_cast<double>((static_cast<std::size_t>(k) * t) % n_samples);
      u(static_cast<Eigen::Index>(t)) += std::cos(2.0 * M_PI * m / n + ph);
    }
  }
  return u * (rms / std::sqrt(0.5 * static_cast<double>(lines.size())));
}

std::vector<int> odd_lines(std::size_t period, double dt, double f_max_hz) {
  std::vector<int> out;
  const double df = 1.0 / (static_cast<double>(period) * dt);
  for (int k = 1; k * df <= f_max_hz && 2 * static_cast<std::size_t>(k) < period; k += 2) {
    out.push_back(k);
  }
  return out;
}

Dataset simulate(const StateSpace& model, const Matrix& c, const Matrix& u,
                 double dt, const SimulationOptions& opts) {
  if (!(dt > 0.0)) throw Error(ErrorKind::kInvalidArgument, "dt must be positive");
  if (c.cols() != model.outputs()) {
    throw Error(ErrorKind::kDimensionMismatch, "measurement matrix width");
  }
  Dataset d;
  d.dt = dt;
  d.u = u;
  d.noise_seed = opts.seed;
  d.x = simulate(discretize_zoh(model, dt), u, opts.x0);
  d.y = d.x * c.transpose();
  if (opts.y_std > 0.0) {
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> noise(0.0, opts.y_std);
    for (Eigen::Index n = 0; n < d.y.rows(); ++n)
      for (Eigen::Index j = 0; j < d.y.cols(); ++j) d.y(n, j) += noise(rng);
  }
  return d;
}

Vector periodic_initial_state(const StateSpace& model, const Matrix& u_period,
                              double dt) {
  const DiscreteStateSpace dsys = discretize_zoh(model, dt);
  const Matrix& a = dsys.sys.a();
  const Matrix& b = dsys.sys.b();
  const Eigen::Index n = a.rows();
  Vector x = Vector::Zero(n);
  Matrix phi = Matrix::Identity(n, n);
  for (Eigen::Index t = 0; t < u_period.rows(); ++t) {
    x = a * x + b * u_period.row(t).transpose();
    phi = a * phi;
  }
  // x0 = Phi^N x0 + x_N(0)
  return (Matrix::Identity(n, n) - phi).partialPivLu().solve(x);
}

FrequencyResponse frf_estimate(const std::vector<FrfRecord>& records,
                               std::size_t period, std::size_t transient_periods,
                               std::size_t periods, const std::vector<int>& lines,
                               double dt) {
  if (records.empty() || lines.empty() || periods == 0 || period == 0) {
    throw Error(ErrorKind::kInvalidArgument, "frf_estimate: empty experiment");
  }
  const Eigen::Index nu = records.front().input.cols();
  const Eigen::Index ny = records.front().output.cols();
  const std::size_t needed = (transient_periods + periods) * period;
  for (const auto& r : records) {
    if (r.input.cols() != nu || r.output.cols() != ny ||
        r.input.rows() != r.output.rows()) {
      throw Error(ErrorKind::kDimensionMismatch, "frf_estimate: record shapes differ");
    }
    if (static_cast<std::size_t>(r.input.rows()) < needed) {
      throw Error(ErrorKind::kLengthMismatch,
                  "frf_estimate: record shorter than the requested periods");
    }
  }
  if (static_cast<Eigen::Index>(records.size()) < nu) {
    throw Error(ErrorKind::kRankDeficientExcitation,
                "frf_estimate: fewer experiments than inputs");
  }
  const Eigen::Index ne = static_cast<Eigen::Index>(records.size());
  const Eigen::Index nl = static_cast<Eigen::Index>(lines.size());
  // Period-averaged DFT at the excited bins: spectra[e] is (channels x lines).
  std::vector<CMatrix> u_spec, y_spec;
  const double np = static_cast<double>(period);
  for (const auto& r : records) {
    Matrix uavg = Matrix::Zero(static_cast<Eigen::Index>(period), nu);
    Matrix yavg = Matrix::Zero(static_cast<Eigen::Index>(period), ny);
    for (std::size_t p = 0; p < periods; ++p) {
      const Eigen::Index start =
          static_cast<Eigen::Index>((transient_periods + p) * period);
      uavg += r.input.middleRows(start, static_cast<Eigen::Index>(period));
      yavg += r.output.middleRows(start, static_cast<Eigen::Index>(period));
    }
    uavg /= static_cast<double>(periods);
    yavg /= static_cast<double>(periods);
    CMatrix us(nu, nl), ys(ny, nl);
    for (Eigen::Index l = 0; l < nl; ++l) {
      CVector tw(static_cast<Eigen::Index>(period));
      for (std::size_t t = 0; t < period; ++t) {
        const double m = static_cast<double>(
            (static_cast<std::size_t>(lines[l]) * t) % period);
        tw(static_cast<Eigen::Index>(t)) = std::polar(1.0, -2.0 * M_PI * m / np);
      }
      us.col(l) = uavg.transpose().cast<Complex>() * tw;
      ys.col(l) = yavg.transpose().cast<Complex>() * tw;
    }
    u_spec.push_back(us);
    y_spec.push_back(ys);
  }
  std::vector<double> omegas;
  for (int k : lines) omegas.push_back(2.0 * M_PI * k / (np * dt));
  FrequencyResponse out{FrequencyGrid(omegas), {}};
  for (Eigen::Index l = 0; l < nl; ++l) {
    CMatrix u(nu, ne), y(ny, ne);
    for (Eigen::Index e = 0; e < ne; ++e) {
      u.col(e) = u_spec[e].col(l);
      y.col(e) = y_spec[e].col(l);
    }
    // G U = Y  ->  U^H G^H = Y^H in the least-squares sense.
    Eigen::JacobiSVD<CMatrix> svd(u.adjoint(), Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    if (!(s(nu - 1) > 1e-10 * std::max(1e-300, s(0)))) {
      throw Error(ErrorKind::kRankDeficientExcitation,
                  "frf_estimate: excitation rank deficient at bin " +
                      std::to_string(lines[l]));
    }
    out.values.push_back(svd.solve(y.adjoint()).adjoint());
  }
  return out;
}

namespace {

// Continuous estimator with inputs (u, y): u held, y interpolated.
Matrix run_estimator(const StateSpace& est, const Dataset& data) {
  const MixedHold h = discretize_mixed_hold(est, data.dt, data.u.cols());
  Matrix uy(data.u.rows(), data.u.cols() + data.y.cols());
  uy << data.u, data.y;
  const Vector xi0 = -h.foh_gain * data.y.row(0).transpose();
  return simulate(h.dsys, uy, xi0);
}

}  // namespace

Matrix run_observer(const ObserverRealization& obs, const Dataset& data) {
  if (obs.sys.inputs() != data.u.cols() + data.y.cols()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "run_observer: observer inputs differ from (u, y)");
  }
  if (data.u.rows() == 0) return Matrix(0, obs.sys.outputs());
  return run_estimator(obs.sys, data);
}

KalmanGain kalman_for_model(const StateSpace& model, const Matrix& c,
                            double q_input, double r_meas) {
  const Eigen::Index nu = model.inputs(), ny = c.rows();
  const Matrix c_meas = c * model.c();
  return kalman_steady_state(model.a(), model.b(),
                             c_meas, q_input * Matrix::Identity(nu, nu),
                             r_meas * Matrix::Identity(ny, ny));
}

Matrix run_kalman(const StateSpace& model, const Matrix& c,
                  const KalmanGain& gain, const Dataset& data) {
  const Matrix c_meas = c * model.c();
  if (gain.gain.rows() != model.states() || gain.gain.cols() != c.rows() ||
      data.u.cols() != model.inputs() || data.y.cols() != c.rows()) {
    throw Error(ErrorKind::kDimensionMismatch, "run_kalman: dimensions");
  }
  if (data.u.rows() == 0) return Matrix(0, model.outputs());
  // x_hat' = (A - L C) x_hat + B u + L y
  Matrix bl(model.states(), model.inputs() + c.rows());
  bl << model.b(), gain.gain;
  const StateSpace filt(model.a() - gain.gain * c_meas, bl, model.c(),
                        Matrix::Zero(model.outputs(), bl.cols()));
  return run_estimator(filt, data);
}

namespace {

double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t i = static_cast<std::size_t>(std::floor(pos));
  const double f = pos - static_cast<double>(i);
  if (i + 1 >= sorted.size()) return sorted.back();
  return sorted[i] + f * (sorted[i + 1] - sorted[i]);
}

}  // namespace

ErrorMetrics metrics(const Matrix& truth, const Matrix& estimate, double dt,
                     double discard_s) {
  if (truth.rows() != estimate.rows() || truth.cols() != estimate.cols()) {
    throw Error(ErrorKind::kLengthMismatch, "metrics: truth and estimate differ in shape");
  }
  const Eigen::Index skip =
      std::min<Eigen::Index>(truth.rows(), static_cast<Eigen::Index>(std::llround(discard_s / dt)));
  const Eigen::Index n = truth.rows() - skip;
  if (n <= 0) {
    throw Error(ErrorKind::kLengthMismatch, "metrics: nothing left after the transient");
  }
  ErrorMetrics out;
  for (Eigen::Index j = 0; j < truth.cols(); ++j) {
    std::vector<double> abs_err(static_cast<std::size_t>(n));
    double sq = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double e = truth(skip + i, j) - estimate(skip + i, j);
      abs_err[static_cast<std::size_t>(i)] = std::abs(e);
      sq += e * e;
    }
    std::sort(abs_err.begin(), abs_err.end());
    StateMetrics m;
    m.rms = std::sqrt(sq / static_cast<double>(n));
    m.min = abs_err.front();
    m.q1 = quantile(abs_err, 0.25);
    m.median = quantile(abs_err, 0.5);
    m.q3 = quantile(abs_err, 0.75);
    m.max = abs_err.back();
    out.states.push_back(m);
  }
  return out;
}

}  // namespace robobs
