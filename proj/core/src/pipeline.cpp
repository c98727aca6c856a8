#include "robobs/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "robobs/errors.hpp"
#include "robobs/io.hpp"

namespace robobs {

namespace {

using nlohmann::json;

constexpr int kStateVersion = 1;

std::vector<Stage> dependencies(Stage s) {
  switch (s) {
    case Stage::kPopulation: return {};
    case Stage::kCharacterize: return {Stage::kPopulation};
    case Stage::kPlant: return {Stage::kPopulation, Stage::kCharacterize};
    case Stage::kSynthesize: return {Stage::kPlant};
    case Stage::kEvaluate: return {Stage::kPopulation, Stage::kPlant, Stage::kSynthesize};
  }
  return {};
}

// Message without the "Kind: " prefix the Error constructor adds.
std::string bare_message(const Error& e) {
  const std::string what = e.what();
  const std::string prefix = std::string(to_string(e.kind())) + ": ";
  return what.rfind(prefix, 0) == 0 ? what.substr(prefix.size()) : what;
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kSchema, std::string("\"") + key + "\": " + e.what());
  }
}

const json& section(const json& j, const char* key) {
  static const json empty = json::object();
  if (!j.contains(key)) return empty;
  if (!j.at(key).is_object()) {
    throw Error(ErrorKind::kSchema, std::string("\"") + key + "\" must be an object");
  }
  return j.at(key);
}

json joint_to_json(const JointParams& p) {
  return {{"j_h", p.j_h}, {"j_l", p.j_l}, {"k", p.k}, {"b_h", p.b_h},
          {"b_l", p.b_l}, {"k_t", p.k_t}, {"k_h", p.k_h}};
}

JointParams joint_from_json(const json& j) {
  JointParams p;
  p.j_h = get_or(j, "j_h", p.j_h);
  p.j_l = get_or(j, "j_l", p.j_l);
  p.k = get_or(j, "k", p.k);
  p.b_h = get_or(j, "b_h", p.b_h);
  p.b_l = get_or(j, "b_l", p.b_l);
  p.k_t = get_or(j, "k_t", p.k_t);
  p.k_h = get_or(j, "k_h", p.k_h);
  return p;
}

json vec_json(const std::vector<double>& v) { return json(v); }

std::vector<double> vec_from(const json& j) {
  try {
    return j.get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kSchema, e.what());
  }
}

json metrics_json(const ErrorMetrics& m) {
  json states = json::array();
  for (const auto& s : m.states) {
    states.push_back({{"rms", s.rms}, {"min", s.min}, {"q1", s.q1},
                      {"median", s.median}, {"q3", s.q3}, {"max", s.max}});
  }
  return states;
}

const char* const kStateLabels[] = {"th1", "al1", "th2", "al2"};

// Config sections each stage reads.
json stage_config(const json& cfg, Stage s) {
  switch (s) {
    case Stage::kPopulation:
      return {{"population", cfg.at("population")}};
    case Stage::kCharacterize:
      return {{"grid", cfg.at("grid")}, {"uncertainty", cfg.at("uncertainty")}};
    case Stage::kPlant:
      return {{"weights", cfg.at("weights")}};
    case Stage::kSynthesize:
      return {{"grid", cfg.at("grid")}, {"dk", cfg.at("dk")}};
    case Stage::kEvaluate:
      return {{"evaluation", cfg.at("evaluation")}, {"seed", cfg.at("seed")}};
  }
  return {};
}

json run_population(const PipelineConfig& cfg) {
  const PopulationModel pop = make_population(cfg.population);
  json members = json::array();
  for (const auto& m : pop.members) members.push_back(to_json(m));
  return {{"nominal", to_json(pop.nominal)},
          {"members", members},
          {"labels", pop.labels},
          {"measurement", matrix_to_json(pop.measurement)}};
}

json run_characterize(const PipelineConfig& cfg, const PopulationModel& pop) {
  const FrequencyGrid grid = cfg.grid.grid();
  const ResidualEnvelope env = envelope(compute_residuals(pop, grid));
  ResidualEnvelope lifted = env;
  const double peak = *std::max_element(env.envelope.begin(), env.envelope.end());
  const double floor = cfg.uncertainty.floor_ratio * peak;
  for (double& e : lifted.envelope) e = std::max(e, floor);
  const UncertaintyWeight w = fit_overbound_weight(lifted, cfg.uncertainty.order);
  json per_member = json::array();
  for (const auto& t : env.per_member) per_member.push_back(vec_json(t));
  std::vector<double> w_mag;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    w_mag.push_back(std::abs(evaluate(w.w, Complex(0.0, grid[k]))(0, 0)));
  }
  return {{"grid", grid.omegas()},
          {"per_member", per_member},
          {"envelope", env.envelope},
          {"floor", floor},
          {"w_delta", to_json(w.w)},
          {"w_delta_mag", w_mag},
          {"margin_db", w.margin_db}};
}

json dims_json(const PlantDims& d) {
  return {{"delta_out", d.delta_out}, {"z", d.z},       {"delta_in", d.delta_in},
          {"w", d.w},                 {"meas", d.meas}, {"ctl", d.ctl}};
}

json run_plant(const PipelineConfig& cfg, const PopulationModel& pop,
               const StateSpace& w_delta) {
  const WeightSet ws = default_weights(cfg.weights, pop.nominal.inputs(),
                                       pop.nominal.outputs(), pop.measurement.rows());
  const GeneralizedPlant p =
      build_generalized_plant(pop.nominal, pop.measurement, w_delta, ws);
  return {{"weights",
           {{"w_d", to_json(ws.w_d)},
            {"w_n", to_json(ws.w_n)},
            {"w_e", to_json(ws.w_e)},
            {"w_nu", to_json(ws.w_nu)}}},
          {"plant", to_json(p.sys)},
          {"dims", dims_json(p.dims)}};
}

json run_synthesize(const PipelineConfig& cfg, const GeneralizedPlant& plant) {
  DKConfig dk = cfg.dk;
  dk.grid = cfg.grid.grid();
  const DKTrace trace = dk_iterate(plant, block_structure(plant.dims), dk);
  json iters = json::array();
  for (const auto& it : trace.iterations) {
    const auto& d = it.synthesis.diagnostics;
    iters.push_back({{"gamma", it.gamma},
                     {"peak_mu", it.ssv.peak_mu},
                     {"peak_omega", it.ssv.peak_omega},
                     {"mu_upper", it.ssv.mu_upper},
                     {"d_opt", it.ssv.d_opt},
                     {"d_fit_error", it.d_fit_error},
                     {"d_scale", to_json(it.d_scale)},
                     {"controller", to_json(it.synthesis.controller)},
                     {"x_residual", d.x_residual},
                     {"y_residual", d.y_residual},
                     {"closed_loop_norm", d.closed_loop_norm}});
  }
  return {{"iterations", iters},
          {"final_index", trace.final_index},
          {"converged", trace.converged},
          {"gamma", trace.final.gamma},
          {"controller", to_json(trace.final.controller)}};
}

json run_evaluate(const PipelineState& st) {
  const std::size_t n = st.output(Stage::kPopulation).at("members").size();
  json configs = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    const EvaluationRun r = evaluate_configuration(st, i);
    configs.push_back({{"label", r.data.label},
                       {"observer_stable", r.observer_stable},
                       {"robust", r.observer_stable ? metrics_json(r.robust_metrics) : json()},
                       {"kalman", metrics_json(r.kalman_metrics)}});
  }
  return {{"states", kStateLabels}, {"units", "deg"}, {"configurations", configs}};
}

std::string label_at(const PipelineState& st, std::size_t i) {
  return st.output(Stage::kPopulation).at("labels").at(i).get<std::string>();
}

}  // namespace

WeightParams PipelineConfig::default_weight_params() {
  WeightParams w;
  w.d_gain = 10.0;
  w.d_bw_hz = 1.0;
  w.n_floor = 1e-3;
  w.e_gain = 50.0;
  w.e_bw_hz = 1.0;
  w.nu_gain = 0.1;
  w.nu_bw_hz = 10.0;
  return w;
}

void PipelineConfig::validate() const {
  population.validate();
  if (!(grid.lo_hz > 0.0 && grid.hi_hz > grid.lo_hz && grid.points >= 2)) {
    throw Error(ErrorKind::kInvalidArgument, "grid needs 0 < lo_hz < hi_hz and >= 2 points");
  }
  if (uncertainty.order < 0 || !(uncertainty.floor_ratio >= 0.0 && uncertainty.floor_ratio < 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "uncertainty order >= 0 and floor_ratio in [0, 1)");
  }
  dk.validate();
  const auto& e = evaluation;
  if (!(e.duration_s > 0.0 && e.rate_hz > 0.0 && e.noise_deg >= 0.0 && e.input_rms_a > 0.0 &&
        e.f_max_hz > 0.0 && e.discard_s >= 0.0 && e.discard_s < e.duration_s)) {
    throw Error(ErrorKind::kInvalidArgument, "invalid evaluation settings");
  }
}

json to_json(const PipelineConfig& cfg) {
  json scales = json::array();
  for (const auto& s : cfg.population.stiffness_scales) scales.push_back({s[0], s[1]});
  const auto& w = cfg.weights;
  const auto& e = cfg.evaluation;
  return {
      {"population",
       {{"base", {joint_to_json(cfg.population.base[0]), joint_to_json(cfg.population.base[1])}},
        {"stiffness_scales", scales}}},
      {"grid", {{"lo_hz", cfg.grid.lo_hz}, {"hi_hz", cfg.grid.hi_hz}, {"points", cfg.grid.points}}},
      {"uncertainty", {{"order", cfg.uncertainty.order}, {"floor_ratio", cfg.uncertainty.floor_ratio}}},
      {"weights",
       {{"d_gain", w.d_gain}, {"d_bw_hz", w.d_bw_hz}, {"n_floor", w.n_floor},
        {"e_gain", w.e_gain}, {"e_bw_hz", w.e_bw_hz}, {"nu_gain", w.nu_gain},
        {"nu_bw_hz", w.nu_bw_hz}}},
      {"dk",
       {{"max_iters", cfg.dk.max_iters}, {"d_fit_order", cfg.dk.d_fit_order},
        {"stop_mu", cfg.dk.stop_mu}, {"gamma_min", cfg.dk.hinf.gamma_min},
        {"gamma_max", cfg.dk.hinf.gamma_max}, {"rel_tol", cfg.dk.hinf.rel_tol}}},
      {"evaluation",
       {{"duration_s", e.duration_s}, {"rate_hz", e.rate_hz}, {"noise_deg", e.noise_deg},
        {"input_rms_a", e.input_rms_a}, {"f_max_hz", e.f_max_hz}, {"discard_s", e.discard_s}}},
      {"seed", cfg.seed}};
}

PipelineConfig config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::kSchema, "config must be an object");
  PipelineConfig cfg;
  const json& pop = section(j, "population");
  if (pop.contains("base")) {
    const json& b = pop.at("base");
    if (!b.is_array() || b.size() != 2) {
      throw Error(ErrorKind::kSchema, "\"base\" must hold two joints");
    }
    cfg.population.base = {joint_from_json(b[0]), joint_from_json(b[1])};
  }
  if (pop.contains("stiffness_scales")) {
    cfg.population.stiffness_scales =
        get_or(pop, "stiffness_scales", std::vector<std::array<double, 2>>{});
  }
  const json& g = section(j, "grid");
  cfg.grid.lo_hz = get_or(g, "lo_hz", cfg.grid.lo_hz);
  cfg.grid.hi_hz = get_or(g, "hi_hz", cfg.grid.hi_hz);
  cfg.grid.points = get_or(g, "points", cfg.grid.points);
  const json& u = section(j, "uncertainty");
  cfg.uncertainty.order = get_or(u, "order", cfg.uncertainty.order);
  cfg.uncertainty.floor_ratio = get_or(u, "floor_ratio", cfg.uncertainty.floor_ratio);
  const json& w = section(j, "weights");
  auto& wp = cfg.weights;
  wp.d_gain = get_or(w, "d_gain", wp.d_gain);
  wp.d_bw_hz = get_or(w, "d_bw_hz", wp.d_bw_hz);
  wp.n_floor = get_or(w, "n_floor", wp.n_floor);
  wp.e_gain = get_or(w, "e_gain", wp.e_gain);
  wp.e_bw_hz = get_or(w, "e_bw_hz", wp.e_bw_hz);
  wp.nu_gain = get_or(w, "nu_gain", wp.nu_gain);
  wp.nu_bw_hz = get_or(w, "nu_bw_hz", wp.nu_bw_hz);
  const json& dk = section(j, "dk");
  cfg.dk.max_iters = get_or(dk, "max_iters", cfg.dk.max_iters);
  cfg.dk.d_fit_order = get_or(dk, "d_fit_order", cfg.dk.d_fit_order);
  cfg.dk.stop_mu = get_or(dk, "stop_mu", cfg.dk.stop_mu);
  cfg.dk.hinf.gamma_min = get_or(dk, "gamma_min", cfg.dk.hinf.gamma_min);
  cfg.dk.hinf.gamma_max = get_or(dk, "gamma_max", cfg.dk.hinf.gamma_max);
  cfg.dk.hinf.rel_tol = get_or(dk, "rel_tol", cfg.dk.hinf.rel_tol);
  const json& e = section(j, "evaluation");
  auto& ev = cfg.evaluation;
  ev.duration_s = get_or(e, "duration_s", ev.duration_s);
  ev.rate_hz = get_or(e, "rate_hz", ev.rate_hz);
  ev.noise_deg = get_or(e, "noise_deg", ev.noise_deg);
  ev.input_rms_a = get_or(e, "input_rms_a", ev.input_rms_a);
  ev.f_max_hz = get_or(e, "f_max_hz", ev.f_max_hz);
  ev.discard_s = get_or(e, "discard_s", ev.discard_s);
  cfg.seed = get_or(j, "seed", cfg.seed);
  cfg.population.seed = cfg.seed;
  cfg.dk.grid = cfg.grid.grid();
  return cfg;
}

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::kPopulation: return "population";
    case Stage::kCharacterize: return "characterize";
    case Stage::kPlant: return "plant";
    case Stage::kSynthesize: return "synthesize";
    case Stage::kEvaluate: return "evaluate";
  }
  return "?";
}

Stage stage_from_name(const std::string& name) {
  for (Stage s : kAllStages) {
    if (name == stage_name(s)) return s;
  }
  throw Error(ErrorKind::kInvalidArgument, "unknown stage \"" + name + "\"");
}

std::string content_hash(const json& j) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

PipelineState::PipelineState(const PipelineConfig& cfg) {
  doc_ = {{"version", kStateVersion}, {"stages", json::object()}};
  set_config(cfg);
}

PipelineState PipelineState::load(const std::filesystem::path& path) {
  PipelineState st;
  try {
    st.doc_ = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kSchema, path.string() + ": " + e.what());
  }
  if (!st.doc_.is_object() || get_or(st.doc_, "version", 0) != kStateVersion ||
      !st.doc_.contains("config") || !st.doc_.contains("stages")) {
    throw Error(ErrorKind::kSchema, path.string() + ": not a pipeline state");
  }
  return st;
}

void PipelineState::save(const std::filesystem::path& path) const {
  write_file_atomic(path, doc_.dump(1) + "\n");
}

PipelineConfig PipelineState::config() const { return config_from_json(doc_.at("config")); }

void PipelineState::set_config(const PipelineConfig& cfg) {
  cfg.validate();
  doc_["config"] = to_json(cfg);
}

bool PipelineState::complete(Stage s) const {
  return doc_.at("stages").contains(stage_name(s));
}

const json& PipelineState::output(Stage s) const {
  if (!complete(s)) {
    throw Error(ErrorKind::kStageIncomplete, std::string(stage_name(s)) + " has not run");
  }
  return doc_.at("stages").at(stage_name(s)).at("output");
}

std::string PipelineState::output_hash(Stage s) const {
  output(s);
  return doc_.at("stages").at(stage_name(s)).at("output_hash").get<std::string>();
}

std::string PipelineState::current_input_hash(Stage s) const {
  json inputs = {{"config", stage_config(doc_.at("config"), s)}};
  for (Stage d : dependencies(s)) inputs[stage_name(d)] = output_hash(d);
  return content_hash(inputs);
}

bool PipelineState::fresh(Stage s) const {
  if (!complete(s)) return false;
  for (Stage d : dependencies(s)) {
    if (!fresh(d)) return false;
  }
  return doc_.at("stages").at(stage_name(s)).at("input_hash").get<std::string>() ==
         current_input_hash(s);
}

void PipelineState::run(Stage s, bool force) {
  for (Stage d : dependencies(s)) {
    if (!complete(d)) {
      throw Error(ErrorKind::kStageIncomplete, std::string(stage_name(s)) + " needs " +
                                                   stage_name(d) + " to run first");
    }
    if (!force && !fresh(d)) {
      throw Error(ErrorKind::kHashMismatch,
                  std::string(stage_name(d)) + " is stale; rerun it or pass --force");
    }
  }
  const PipelineConfig cfg = config();
  json out;
  try {
    switch (s) {
      case Stage::kPopulation: out = run_population(cfg); break;
      case Stage::kCharacterize: out = run_characterize(cfg, population_of(*this)); break;
      case Stage::kPlant:
        out = run_plant(cfg, population_of(*this), w_delta_of(*this));
        break;
      case Stage::kSynthesize: out = run_synthesize(cfg, plant_of(*this)); break;
      case Stage::kEvaluate: out = run_evaluate(*this); break;
    }
  } catch (const Error& e) {
    throw Error(e.kind(), std::string(stage_name(s)) + ": " + bare_message(e));
  }
  doc_["stages"][stage_name(s)] = {{"input_hash", current_input_hash(s)},
                                   {"output_hash", content_hash(out)},
                                   {"output", std::move(out)}};
}

PopulationModel population_of(const PipelineState& st) {
  const json& o = st.output(Stage::kPopulation);
  PopulationModel pop;
  pop.nominal = state_space_from_json(o.at("nominal"));
  for (const auto& m : o.at("members")) pop.members.push_back(state_space_from_json(m));
  pop.labels = o.at("labels").get<std::vector<std::string>>();
  pop.measurement = matrix_from_json(o.at("measurement"));
  return pop;
}

StateSpace w_delta_of(const PipelineState& st) {
  return state_space_from_json(st.output(Stage::kCharacterize).at("w_delta"));
}

GeneralizedPlant plant_of(const PipelineState& st) {
  const json& o = st.output(Stage::kPlant);
  const json& d = o.at("dims");
  GeneralizedPlant p;
  p.sys = state_space_from_json(o.at("plant"));
  p.dims.delta_out = d.at("delta_out").get<Eigen::Index>();
  p.dims.z = d.at("z").get<Eigen::Index>();
  p.dims.delta_in = d.at("delta_in").get<Eigen::Index>();
  p.dims.w = d.at("w").get<Eigen::Index>();
  p.dims.meas = d.at("meas").get<Eigen::Index>();
  p.dims.ctl = d.at("ctl").get<Eigen::Index>();
  p.validate();
  return p;
}

WeightSet weights_of(const PipelineState& st) {
  const json& w = st.output(Stage::kPlant).at("weights");
  return {state_space_from_json(w.at("w_d")), state_space_from_json(w.at("w_n")),
          state_space_from_json(w.at("w_e")), state_space_from_json(w.at("w_nu"))};
}

StateSpace controller_of(const PipelineState& st) {
  return state_space_from_json(st.output(Stage::kSynthesize).at("controller"));
}

EvaluationRun evaluate_configuration(const PipelineState& st, std::size_t i) {
  const PipelineConfig cfg = st.config();
  const PopulationModel pop = population_of(st);
  if (i >= pop.members.size()) {
    throw Error(ErrorKind::kInvalidArgument, "no configuration " + std::to_string(i));
  }
  const auto& ev = cfg.evaluation;
  const double dt = 1.0 / ev.rate_hz;
  const auto n = static_cast<std::size_t>(std::llround(ev.duration_s * ev.rate_hz));
  const std::vector<int> lines = odd_lines(n, dt, ev.f_max_hz);
  Matrix u(static_cast<Eigen::Index>(n), pop.nominal.inputs());
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    u.col(j) = multisine(n, lines, ev.input_rms_a, cfg.seed * 1000 + 2 * i + j);
  }
  SimulationOptions sim;
  sim.y_std = ev.noise_deg / kRadToDeg;
  sim.seed = cfg.seed * 1000 + 2 * i + 1000000;

  EvaluationRun r;
  r.data = simulate(pop.members[i], pop.measurement, u, dt, sim);
  r.data.label = pop.labels[i];

  // The configuration's own model paired with the shared correction filter.
  const Matrix truth = r.data.x * kRadToDeg;
  try {
    const ObserverRealization obs =
        build_observer(pop.members[i], pop.measurement, controller_of(st), r.data.label);
    r.observer_stable = true;
    r.robust = run_observer(obs, r.data);
    r.robust_metrics = metrics(truth, r.robust * kRadToDeg, dt, ev.discard_s);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kUnstableObserver) throw;
    r.observer_stable = false;
    r.robust = Matrix::Constant(r.data.x.rows(), r.data.x.cols(),
                                std::numeric_limits<double>::quiet_NaN());
  }

  const WeightSet ws = weights_of(st);
  const double q = std::pow(sigma_max(evaluate(ws.w_d, Complex(0.0, 0.0))), 2);
  const double rr = std::pow(sigma_max(evaluate(ws.w_n, Complex(0.0, 0.0))), 2);
  const KalmanGain kal = kalman_for_model(pop.members[i], pop.measurement, q, rr);
  r.kalman = run_kalman(pop.members[i], pop.measurement, kal, r.data);

  r.kalman_metrics = metrics(truth, r.kalman * kRadToDeg, dt, ev.discard_s);
  return r;
}

std::vector<std::filesystem::path> write_report(const PipelineState& st,
                                                const std::filesystem::path& dir) {
  st.output(Stage::kEvaluate);
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  auto put = [&](const std::string& name, const std::string& text) {
    written.push_back(dir / name);
    write_file_atomic(written.back(), text);
  };

  const json& syn = st.output(Stage::kSynthesize);
  const json& ch = st.output(Stage::kCharacterize);
  const FrequencyGrid grid(vec_from(ch.at("grid")));
  json trace = {{"final_index", syn.at("final_index")},
                {"converged", syn.at("converged")},
                {"iterations", json::array()}};
  std::size_t idx = 1;
  for (const auto& it : syn.at("iterations")) {
    SSVReport rep;
    rep.grid = grid;
    rep.mu_upper = vec_from(it.at("mu_upper"));
    rep.d_opt = vec_from(it.at("d_opt"));
    put("ssv_iter_" + std::to_string(idx++) + ".csv", ssv_csv(rep));
    trace["iterations"].push_back({{"gamma", it.at("gamma")},
                                   {"peak_mu", it.at("peak_mu")},
                                   {"peak_omega_rad_s", it.at("peak_omega")},
                                   {"d_fit_error", it.at("d_fit_error")},
                                   {"controller_states", it.at("controller").at("a").size()}});
  }
  put("dk_trace.json", trace.dump(2) + "\n");

  const json& per = ch.at("per_member");
  std::string env = "omega_rad_s";
  for (std::size_t m = 0; m < per.size(); ++m) env += "," + label_at(st, m);
  env += ",envelope,w_delta\n";
  for (std::size_t k = 0; k < grid.size(); ++k) {
    env += format_number(grid[k]);
    for (const auto& t : per) env += "," + format_number(t.at(k).get<double>());
    env += "," + format_number(ch.at("envelope").at(k).get<double>()) + "," +
           format_number(ch.at("w_delta_mag").at(k).get<double>()) + "\n";
  }
  put("envelope.csv", env);
  put("uncertainty.json", json({{"grid_rad_s", ch.at("grid")},
                                {"envelope", ch.at("envelope")},
                                {"floor", ch.at("floor")},
                                {"w_delta", ch.at("w_delta")},
                                {"w_delta_mag", ch.at("w_delta_mag")},
                                {"margin_db", ch.at("margin_db")}})
                              .dump(2) +
                              "\n");

  const std::size_t n = st.output(Stage::kPopulation).at("members").size();
  for (std::size_t i = 0; i < n; ++i) {
    const EvaluationRun r = evaluate_configuration(st, i);
    put("dataset_" + r.data.label + ".csv", dataset_csv(r.data));
    std::string est = "t_s";
    for (const char* who : {"true", "robust", "kalman"}) {
      for (const char* s : kStateLabels) est += std::string(",") + s + "_" + who + "_deg";
    }
    est += "\n";
    for (Eigen::Index t = 0; t < r.data.x.rows(); ++t) {
      est += format_number(double(t) * r.data.dt);
      for (const Matrix* m : {&r.data.x, &r.robust, &r.kalman}) {
        for (Eigen::Index c = 0; c < m->cols(); ++c) {
          est += "," + format_number((*m)(t, c) * kRadToDeg);
        }
      }
      est += "\n";
    }
    put("estimates_" + r.data.label + ".csv", est);
  }
  put("metrics.json", st.output(Stage::kEvaluate).dump(2) + "\n");
  return written;
}

AdmitReport admit_model(const PipelineState& st, const StateSpace& model) {
  const PopulationModel pop = population_of(st);
  const StateSpace k = controller_of(st);
  if (model.inputs() != pop.nominal.inputs() || model.outputs() != pop.nominal.outputs()) {
    throw Error(ErrorKind::kSchema, "model must map " + std::to_string(pop.nominal.inputs()) +
                                        " inputs to " + std::to_string(pop.nominal.outputs()) +
                                        " positions");
  }
  const json& ch = st.output(Stage::kCharacterize);
  const FrequencyGrid grid(vec_from(ch.at("grid")));
  const FrequencyResponse e = residual_response(pop.nominal, model, grid);
  AdmitReport rep;
  rep.bound = vec_from(ch.at("w_delta_mag"));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    rep.sigma.push_back(sigma_max(e.values[i]));
    if (rep.sigma.back() > rep.bound[i] * (1.0 + 1e-9)) rep.violating_omegas.push_back(grid[i]);
  }
  rep.admit = rep.violating_omegas.empty();
  if (rep.admit) {
    try {
      rep.observer = build_observer(model, pop.measurement, k, "admitted");
      rep.observer_stable = true;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kUnstableObserver) throw;
    }
  }
  return rep;
}

}  // namespace robobs
