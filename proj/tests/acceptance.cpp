// Acceptance suite: one PASS/FAIL line per criterion. Exits 0 once every
// criterion has been evaluated; with --strict, exits 1 if any failed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oracles.hpp"
#include "robobs/errors.hpp"
#include "robobs/interconnect.hpp"
#include "robobs/io.hpp"
#include "robobs/pipeline.hpp"
#include "robobs/uncertainty.hpp"

using namespace robobs;
using robobs::testing::crandn;
using robobs::testing::randn;
using robobs::testing::rel_err;
using robobs::testing::smax;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct PipelineRun {
  PipelineState state;
  fs::path dir;
  double seconds = 0.0;
  std::vector<fs::path> report;
};

PipelineRun run_pipeline(const fs::path& dir) {
  const auto t0 = std::chrono::steady_clock::now();
  PipelineRun r{PipelineState(PipelineConfig{}), dir, 0.0, {}};
  for (Stage s : kAllStages) r.state.run(s);
  r.report = write_report(r.state, dir);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

Verdict ac1(const PipelineRun& run) {
  const json& syn = run.state.output(Stage::kSynthesize);
  const json& iters = syn.at("iterations");
  std::ostringstream d;
  d << "peaks";
  for (const auto& it : iters) d << " " << fmt("%.4f", it.at("peak_mu").get<double>());
  const double first = iters.at(0).at("peak_mu").get<double>();
  int below = -1;
  for (std::size_t i = 1; i < iters.size() && i < 4; ++i) {
    const auto mu = iters[i].at("mu_upper").get<std::vector<double>>();
    if (mu.size() == 61 && *std::max_element(mu.begin(), mu.end()) < 1.0) {
      below = static_cast<int>(i);
      break;
    }
  }
  const double final_peak =
      iters.at(syn.at("final_index").get<std::size_t>()).at("peak_mu").get<double>();
  d << "; iteration 1 peak " << fmt("%.4f", first) << ", all 61 points below 1 at iteration "
    << (below < 0 ? std::string("none") : std::to_string(below + 1)) << ", final peak "
    << fmt("%.4f", final_peak) << ", wall time " << fmt("%.1f", run.seconds) << " s";
  return {first > 1.0 && below > 0 && final_peak <= 0.99 && run.seconds <= 600.0, d.str()};
}

Verdict ac2() {
  std::mt19937_64 rng(20);
  std::uniform_int_distribution<int> size(1, 3);
  double worst_rel = 0.0;
  int bound_violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    BlockStructure b;
    b.delta_rows = size(rng);
    b.delta_cols = size(rng);
    b.perf_rows = size(rng);
    b.perf_cols = size(rng);
    const CMatrix n = crandn(b.n_rows(), b.n_cols(), rng);
    FrequencyResponse fr{FrequencyGrid({1.0}), {n}};
    const double mu = mu_upper_two_blocks(fr, b).mu_upper.at(0);
    const double oracle = robobs::testing::dense_mu_oracle(n, b.delta_cols, b.delta_rows,
                                                           1000000, kDScaleMin, kDScaleMax);
    worst_rel = std::max(worst_rel, std::abs(mu - oracle) / oracle);
    const double lower = std::max(smax(n.topLeftCorner(b.delta_cols, b.delta_rows)),
                                  smax(n.bottomRightCorner(b.perf_cols, b.perf_rows)));
    if (mu < lower - 1e-9 || mu > smax(n) + 1e-9) ++bound_violations;
  }
  return {worst_rel <= 0.01 && bound_violations == 0,
          "100 random matrices, worst relative gap to the dense d-grid " +
              fmt("%.2e", worst_rel) + ", bound violations " +
              std::to_string(bound_violations)};
}

struct SynthCheck {
  int calls = 0, failures = 0;
  double worst_ratio = 0.0, worst_residual = 0.0;
  std::string first_failure;

  void add(const std::string& what, const StateSpace& cl, double gamma, double xr,
           double yr) {
    ++calls;
    const bool stable = is_stable(cl);
    const double nrm = stable ? hinf_norm_gridded(cl, dynamics_grid(cl, 200)).value
                              : std::numeric_limits<double>::infinity();
    worst_ratio = std::max(worst_ratio, nrm / gamma);
    worst_residual = std::max({worst_residual, xr, yr});
    if (!stable || nrm > 1.05 * gamma || xr > 1e-8 || yr > 1e-8) {
      if (failures++ == 0) first_failure = what;
    }
  }
};

Verdict ac3(const PipelineRun& run) {
  SynthCheck chk;
  const GeneralizedPlant plant = plant_of(run.state);
  const json& iters = run.state.output(Stage::kSynthesize).at("iterations");
  for (std::size_t i = 0; i < iters.size(); ++i) {
    const auto& it = iters[i];
    const GeneralizedPlant scaled =
        scale_plant(plant, state_space_from_json(it.at("d_scale")));
    const StateSpace k = state_space_from_json(it.at("controller"));
    chk.add("pipeline iteration " + std::to_string(i + 1), lft_lower(scaled.sys, k),
            it.at("gamma").get<double>(), it.at("x_residual").get<double>(),
            it.at("y_residual").get<double>());
  }
  std::mt19937_64 rng(30);
  HinfOptions opts;
  opts.gamma_max = 1e6;
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 2 + trial % 4, nw = 2, nu = 1, nz = 2, ny = 1;
    Matrix d = Matrix::Zero(nz + ny, nw + nu);
    d.topLeftCorner(nz, nw) = 0.3 * randn(nz, nw, rng);
    d.topRightCorner(nz, nu) = randn(nz, nu, rng);
    d.bottomLeftCorner(ny, nw) = randn(ny, nw, rng);
    if (d.topRightCorner(nz, nu).norm() < 0.2) d(0, nw) = 1.0;
    if (d.bottomLeftCorner(ny, nw).norm() < 0.2) d(nz, 0) = 1.0;
    const StateSpace p(randn(n, n, rng), randn(n, nw + nu, rng), randn(nz + ny, n, rng), d);
    const std::string what = "random plant " + std::to_string(trial);
    try {
      const SynthesisResult res = hinf_synthesize(p, ny, nu, opts);
      chk.add(what, lft_lower(p, res.controller), res.gamma,
              res.diagnostics.x_residual, res.diagnostics.y_residual);
    } catch (const Error& e) {
      ++chk.calls;
      if (chk.failures++ == 0) chk.first_failure = what + " (" + e.what() + ")";
    }
  }
  std::string detail = std::to_string(chk.calls) + " synthesis results, worst norm/gamma " +
                       fmt("%.4f", chk.worst_ratio) + ", worst CARE residual " +
                       fmt("%.1e", chk.worst_residual);
  if (chk.failures) detail += ", first failure: " + chk.first_failure;
  return {chk.failures == 0, detail};
}

Verdict ac4(const PipelineRun& run) {
  const PopulationModel pop = population_of(run.state);
  const json& ch = run.state.output(Stage::kCharacterize);
  const FrequencyGrid grid(ch.at("grid").get<std::vector<double>>());
  const StateSpace w = w_delta_of(run.state);
  double worst_identity = 0.0, worst_literal = 0.0;
  int overbound_violations = 0;
  for (const auto& gi : pop.members) {
    const FrequencyResponse e = residual_response(pop.nominal, gi, grid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const Complex s(0.0, grid[k]);
      const CMatrix g0 = evaluate(pop.nominal, s), g = evaluate(gi, s);
      const CMatrix inv = (CMatrix::Identity(e.values[k].rows(), e.values[k].cols()) -
                           e.values[k]).inverse();
      // Least-squares ratio computed independently of the library.
      const CMatrix ratio = g0.colPivHouseholderQr().solve(g);
      worst_identity = std::max(worst_identity, rel_err(inv, ratio));
      worst_literal = std::max(worst_literal, rel_err(g0 * inv, g));
      if (smax(e.values[k]) > std::abs(evaluate(w, s)(0, 0))) ++overbound_violations;
    }
  }
  int admitted = 0, stable = 0;
  for (const auto& gi : pop.members) {
    const AdmitReport a = admit_model(run.state, gi);
    admitted += a.admit;
    stable += a.observer_stable;
  }
  const auto n = static_cast<int>(pop.members.size());
  std::ostringstream d;
  d << "G0 (I - E)^-1 vs G_i " << fmt("%.2e", worst_literal)
    << "; (I - E)^-1 vs G0^+ G_i " << fmt("%.1e", worst_identity)
    << "; overbound violations " << overbound_violations << "; admitted "
    << admitted << "/" << n << "; paired observer stable " << stable << "/" << n;
  return {worst_literal <= 1e-8 && worst_identity <= 1e-8 && overbound_violations == 0 &&
              admitted == n,
          d.str()};
}

// (d_u, n) -> (W_e e_x, W_nu nu) from the observer error equations at s.
CMatrix weighted_error_oracle(const StateSpace& g, const Matrix& c, const StateSpace& k,
                              const WeightSet& w, Complex s) {
  const CMatrix gs = evaluate(g, s), ks = evaluate(k, s), cc = c.cast<Complex>();
  const Eigen::Index nx = gs.rows(), nu = gs.cols(), ny = cc.rows();
  const CMatrix fe = (CMatrix::Identity(nx, nx) + gs * ks * cc).partialPivLu().inverse();
  const CMatrix ex_du = fe * gs, ex_n = -fe * gs * ks;
  const CMatrix ey_du = cc * ex_du, ey_n = cc * ex_n + CMatrix::Identity(ny, ny);
  const CMatrix wd = evaluate(w.w_d, s), wn = evaluate(w.w_n, s);
  const CMatrix we = evaluate(w.w_e, s), wnu = evaluate(w.w_nu, s);
  CMatrix out(nx + nu, nu + ny);
  out.topLeftCorner(nx, nu) = we * ex_du * wd;
  out.topRightCorner(nx, ny) = we * ex_n * wn;
  out.bottomLeftCorner(nu, nu) = wnu * ks * ey_du * wd;
  out.bottomRightCorner(nu, ny) = wnu * ks * ey_n * wn;
  return out;
}

// Plant copy and observer side by side, output x - x_hat; inputs (u, d_u, d_x, n).
StateSpace two_path_composite(const StateSpace& g, const Matrix& c, const StateSpace& k) {
  const Eigen::Index nu = g.inputs(), nx = g.outputs(), ny = c.rows();
  const ObserverRealization obs = build_observer(g, c, k);
  BlockDiagram bd;
  const int u = bd.add_input(nu), du = bd.add_input(nu);
  const int dx = bd.add_input(nx), n = bd.add_input(ny);
  const int plant = bd.add_block(g);
  const int est = bd.add_block(obs.sys);
  const int out = bd.add_output(nx);
  bd.input_to_block(u, plant);
  bd.input_to_block(du, plant);
  Matrix u_sel = Matrix::Zero(nu + ny, nu), y_sel = Matrix::Zero(nu + ny, ny);
  u_sel.topRows(nu).setIdentity();
  y_sel.bottomRows(ny).setIdentity();
  bd.input_to_block(u, est, u_sel);
  bd.block_to_block(plant, est, y_sel * c);
  bd.input_to_block(dx, est, y_sel * c);
  bd.input_to_block(n, est, y_sel);
  bd.block_to_output(plant, out);
  bd.input_to_output(dx, out);
  bd.block_to_output(est, out, -1.0);
  return bd.build();
}

Verdict ac5(const PipelineRun& run) {
  const PopulationModel pop = population_of(run.state);
  const GeneralizedPlant p = plant_of(run.state);
  const WeightSet w = weights_of(run.state);
  const StateSpace k = controller_of(run.state);
  const StateSpace n = lft_lower(p.sys, k);
  double worst_freq = 0.0;
  for (double om : FrequencyGrid::logspace_hz(0.01, 25.0, 50).omegas()) {
    const Complex s(0.0, om);
    const CMatrix perf = evaluate(n, s).block(p.dims.delta_out, p.dims.delta_in, p.dims.z, p.dims.w);
    worst_freq = std::max(worst_freq,
                          rel_err(perf, weighted_error_oracle(pop.nominal, pop.measurement, k, w, s)));
  }
  const StateSpace composite = two_path_composite(pop.nominal, pop.measurement, k);
  const StateSpace err = build_error_dynamics(pop.nominal, pop.measurement, k);
  std::mt19937_64 rng(50);
  const Eigen::Index nu = pop.nominal.inputs(), nx = pop.nominal.outputs();
  const Eigen::Index ny = pop.measurement.rows();
  const Matrix inputs = 0.1 * randn(4000, nu + nu + nx + ny, rng);
  const double dt = 0.005;
  const Matrix diff = simulate(discretize_zoh(composite, dt), inputs);
  const Matrix ex = simulate(discretize_zoh(err, dt), inputs.rightCols(nu + nx + ny)).leftCols(nx);
  const double worst_time =
      (diff - ex).cwiseAbs().maxCoeff() / std::max(1e-300, ex.cwiseAbs().maxCoeff());
  return {worst_freq <= 1e-8 && worst_time <= 1e-8,
          "F_l(P, K) vs error equations on 50 frequencies " + fmt("%.1e", worst_freq) +
              ", two-path time-domain difference " + fmt("%.1e", worst_time)};
}

Verdict ac6(const PipelineRun& run) {
  const json& ev = run.state.output(Stage::kEvaluate);
  const auto labels = ev.at("states").get<std::vector<std::string>>();
  double worst = 0.0;
  std::string worst_at;
  int unstable = 0;
  std::string unstable_labels;
  for (const auto& c : ev.at("configurations")) {
    const std::string label = c.at("label").get<std::string>();
    if (!c.at("observer_stable").get<bool>()) {
      ++unstable;
      unstable_labels += (unstable_labels.empty() ? "" : ",") + label;
      continue;
    }
    for (std::size_t j = 0; j < labels.size(); ++j) {
      const double r = c.at("robust").at(j).at("rms").get<double>() /
                       c.at("kalman").at(j).at("rms").get<double>();
      if (r > worst) {
        worst = r;
        worst_at = label + " " + labels[j];
      }
    }
  }
  std::string detail = "worst robust/Kalman RMS ratio " + fmt("%.3f", worst) + " (" + worst_at +
                       ") over stable configurations; unstable on " + std::to_string(unstable);
  if (unstable) detail += " (" + unstable_labels + ")";
  return {worst <= 2.0 && unstable == 0, detail};
}

Verdict ac7(const PipelineRun& a, const PipelineRun& b) {
  int csv = 0, differing = 0;
  for (const auto& pa : a.report) {
    if (pa.extension() != ".csv") continue;
    ++csv;
    const fs::path pb = b.dir / pa.filename();
    if (!fs::exists(pb) || read_file(pa) != read_file(pb)) ++differing;
  }
  const bool same_set = a.report.size() == b.report.size();
  return {csv > 0 && differing == 0 && same_set,
          std::to_string(csv) + " CSV files compared, " + std::to_string(differing) +
              " differ"};
}

constexpr double kFrfDt = 0.005;

struct FrfExperiment {
  std::vector<FrfRecord> records;
  std::vector<int> lines;
};

FrfExperiment frf_experiment(const StateSpace& g, std::size_t period, std::size_t n_periods,
                             double noise_rad, std::uint64_t seed) {
  FrfExperiment ex{{}, odd_lines(period, kFrfDt, 25.0)};
  for (Eigen::Index e = 0; e < g.inputs(); ++e) {
    Matrix up(static_cast<Eigen::Index>(period), g.inputs());
    for (Eigen::Index j = 0; j < g.inputs(); ++j)
      up.col(j) = multisine(period, ex.lines, 0.5, seed + 10 * e + j);
    Matrix u(static_cast<Eigen::Index>(period * n_periods), g.inputs());
    for (std::size_t p = 0; p < n_periods; ++p)
      u.middleRows(static_cast<Eigen::Index>(p * period), up.rows()) = up;
    SimulationOptions so;
    so.y_std = noise_rad;
    so.seed = seed + 1000 + e;
    so.x0 = periodic_initial_state(g, up, kFrfDt);
    const Dataset d = simulate(g, Matrix::Identity(g.outputs(), g.outputs()), u, kFrfDt, so);
    ex.records.push_back({d.u, d.y});
  }
  return ex;
}

std::vector<double> frf_errors(const StateSpace& g, const FrequencyResponse& est) {
  const FrequencyResponse truth = freq_response(discretize_zoh(g, kFrfDt), est.grid);
  std::vector<double> errs;
  for (std::size_t k = 0; k < est.size(); ++k)
    errs.push_back(rel_err(est.values[k], truth.values[k]));
  return errs;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Verdict ac8() {
  const StateSpace g = make_member(default_joints());
  const std::size_t period = 1024;
  const auto clean = frf_experiment(g, period, 2, 0.0, 80);
  const auto e0 = frf_errors(g, frf_estimate(clean.records, period, 1, 1, clean.lines, kFrfDt));
  const double worst_clean = *std::max_element(e0.begin(), e0.end());
  const auto noisy = frf_experiment(g, period, 21, EvaluationConfig{}.noise_deg / kRadToDeg, 81);
  std::vector<double> medians;
  for (std::size_t periods : {1u, 5u, 20u}) {
    medians.push_back(
        median(frf_errors(g, frf_estimate(noisy.records, period, 1, periods, noisy.lines, kFrfDt))));
  }
  const bool monotone = medians[0] > medians[1] && medians[1] > medians[2];
  return {worst_clean <= 1e-6 && monotone,
          "noise-free worst relative error " + fmt("%.1e", worst_clean) +
              "; median error over 1/5/20 periods " + fmt("%.2e", medians[0]) + " / " +
              fmt("%.2e", medians[1]) + " / " + fmt("%.2e", medians[2])};
}

Verdict guarded(const std::function<Verdict()>& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    return {false, std::string("error: ") + e.what()};
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"robobs acceptance suite"};
  fs::path work = "acceptance_work";
  bool strict = false;
  app.add_option("--work", work, "Directory for the two pipeline reports");
  app.add_flag("--strict", strict, "Exit 1 if any criterion fails");
  CLI11_PARSE(app, argc, argv);

  std::vector<std::pair<std::string, Verdict>> results;
  std::string log;
  auto emit = [&](const std::string& line) {
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    log += line + "\n";
  };
  auto report = [&](const std::string& name, const Verdict& v) {
    emit(name + (v.pass ? " PASS: " : " FAIL: ") + v.detail);
    results.emplace_back(name, v);
  };

  PipelineRun first, second;
  bool pipeline_ok = true;
  std::string pipeline_error;
  try {
    first = run_pipeline(work / "run1");
    second = run_pipeline(work / "run2");
  } catch (const std::exception& e) {
    pipeline_ok = false;
    pipeline_error = std::string("pipeline error: ") + e.what();
  }
  auto with_pipeline = [&](const std::function<Verdict()>& f) {
    return pipeline_ok ? guarded(f) : Verdict{false, pipeline_error};
  };

  report("AC-1", with_pipeline([&] { return ac1(first); }));
  report("AC-2", guarded(ac2));
  report("AC-3", with_pipeline([&] { return ac3(first); }));
  report("AC-4", with_pipeline([&] { return ac4(first); }));
  report("AC-5", with_pipeline([&] { return ac5(first); }));
  report("AC-6", with_pipeline([&] { return ac6(first); }));
  report("AC-7", with_pipeline([&] { return ac7(first, second); }));
  report("AC-8", guarded(ac8));

  const auto passed = std::count_if(results.begin(), results.end(),
                                    [](const auto& r) { return r.second.pass; });
  emit("acceptance: " + std::to_string(passed) + "/" + std::to_string(results.size()) +
       " criteria pass");
  fs::create_directories(work);
  write_file_atomic(work / "acceptance.txt", log);
  return strict && passed != static_cast<long>(results.size()) ? 1 : 0;
}
