#pragma once

// Staged observer design pipeline over a persisted JSON state:
// population -> characterize -> plant -> synthesize -> evaluate, then report
// emission and admission of new models.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "robobs/dk.hpp"
#include "robobs/observer.hpp"
#include "robobs/popsim.hpp"

namespace robobs {

struct GridConfig {
  double lo_hz = 0.01;
  double hi_hz = 25.0;
  std::size_t points = 61;

  FrequencyGrid grid() const { return FrequencyGrid::logspace_hz(lo_hz, hi_hz, points); }
};

struct UncertaintyConfig {
  int order = 4;
  /// Envelope values are lifted to this fraction of the envelope peak
  /// before the overbound fit.
  double floor_ratio = 1e-3;
};

struct EvaluationConfig {
  double duration_s = 81.92;
  double rate_hz = 200.0;
  double noise_deg = 0.05;
  double input_rms_a = 0.5;
  double f_max_hz = 20.0;
  double discard_s = 2.0;
};

struct PipelineConfig {
  PopulationSpec population;
  GridConfig grid;
  UncertaintyConfig uncertainty;
  WeightParams weights = default_weight_params();
  DKConfig dk;
  EvaluationConfig evaluation;
  std::uint64_t seed = 1;

  static WeightParams default_weight_params();
  void validate() const;
};

nlohmann::json to_json(const PipelineConfig& cfg);
/// Missing keys keep their defaults. Throws Schema on malformed values.
PipelineConfig config_from_json(const nlohmann::json& j);

enum class Stage { kPopulation, kCharacterize, kPlant, kSynthesize, kEvaluate };

inline constexpr Stage kAllStages[] = {Stage::kPopulation, Stage::kCharacterize,
                                       Stage::kPlant, Stage::kSynthesize,
                                       Stage::kEvaluate};

const char* stage_name(Stage s);
/// Throws InvalidArgument for unknown names.
Stage stage_from_name(const std::string& name);

/// 64-bit FNV-1a of the compact dump, as 16 hex digits.
std::string content_hash(const nlohmann::json& j);

class PipelineState {
 public:
  PipelineState() = default;
  explicit PipelineState(const PipelineConfig& cfg);

  static PipelineState load(const std::filesystem::path& path);
  /// Atomic: temporary file then rename.
  void save(const std::filesystem::path& path) const;

  const nlohmann::json& doc() const { return doc_; }
  PipelineConfig config() const;
  /// Replaces the stored configuration; stages run under the old one become
  /// stale.
  void set_config(const PipelineConfig& cfg);

  bool complete(Stage s) const;
  /// Recorded output of a completed stage. Throws StageIncomplete.
  const nlohmann::json& output(Stage s) const;
  std::string output_hash(Stage s) const;
  /// Hash the stage's inputs have now.
  std::string current_input_hash(Stage s) const;
  /// Completed and every ancestor's recorded inputs equal the current ones.
  bool fresh(Stage s) const;

  /// Runs one stage. Missing upstream stages throw StageIncomplete; stale
  /// upstream stages throw HashMismatch unless `force`.
  void run(Stage s, bool force = false);

 private:
  nlohmann::json doc_;
};

/// Decoded stage outputs.
PopulationModel population_of(const PipelineState& st);
StateSpace w_delta_of(const PipelineState& st);
GeneralizedPlant plant_of(const PipelineState& st);
WeightSet weights_of(const PipelineState& st);
StateSpace controller_of(const PipelineState& st);

struct EvaluationRun {
  Dataset data;
  Matrix robust;  // position estimates (rad), NaN when the observer is unstable
  Matrix kalman;
  ErrorMetrics robust_metrics;  // deg, empty when the observer is unstable
  ErrorMetrics kalman_metrics;
  bool observer_stable = false;
};

/// Simulates configuration i of the population and runs two estimators on
/// it: that configuration's model closed by the shared correction filter,
/// and that configuration's steady-state Kalman filter.
EvaluationRun evaluate_configuration(const PipelineState& st, std::size_t i);

/// Writes ssv_iter_<i>.csv, envelope.csv, dataset_<cfg>.csv,
/// estimates_<cfg>.csv, metrics.json, uncertainty.json and dk_trace.json.
/// Requires the evaluate stage. Returns the written paths.
std::vector<std::filesystem::path> write_report(const PipelineState& st,
                                                const std::filesystem::path& dir);

struct AdmitReport {
  bool admit = false;
  std::vector<double> sigma;    // residual sigma_max per grid point
  std::vector<double> bound;    // |W_delta| per grid point
  std::vector<double> violating_omegas;
  /// The model paired with the shared filter; set when admitted and stable.
  ObserverRealization observer;
  bool observer_stable = false;
};

/// A new model u -> positions is admitted iff its residual against the
/// stored nominal stays under |W_delta| on the whole grid.
AdmitReport admit_model(const PipelineState& st, const StateSpace& model);

}  // namespace robobs
