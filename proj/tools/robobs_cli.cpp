#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "robobs/errors.hpp"
#include "robobs/io.hpp"
#include "robobs/pipeline.hpp"

namespace {

using robobs::ErrorKind;

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::kStageIncomplete:
    case ErrorKind::kHashMismatch:
    case ErrorKind::kSchema:
    case ErrorKind::kInvalidArgument:
      return 2;
    default:
      return 1;
  }
}

struct Options {
  std::string config;
  std::string state = "robobs_state.json";
  bool force = false;
  std::optional<std::uint64_t> seed;
  std::string report_dir = "report";
  std::string model;
  std::string observer_out;
};

robobs::PipelineConfig load_config(const Options& o, const robobs::PipelineConfig& fallback) {
  robobs::PipelineConfig cfg = fallback;
  if (!o.config.empty()) {
    try {
      cfg = robobs::config_from_json(nlohmann::json::parse(robobs::read_file(o.config)));
    } catch (const nlohmann::json::exception& e) {
      throw robobs::Error(ErrorKind::kSchema, o.config + ": " + e.what());
    }
  }
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.population.seed = *o.seed;
  }
  return cfg;
}

// Opens the state, creating it for the first stage only.
robobs::PipelineState open_state(const Options& o, bool create) {
  robobs::PipelineState st;
  if (std::filesystem::exists(o.state)) {
    st = robobs::PipelineState::load(o.state);
    if (!o.config.empty() || o.seed) st.set_config(load_config(o, st.config()));
  } else if (create) {
    st = robobs::PipelineState(load_config(o, robobs::PipelineConfig{}));
  } else {
    throw robobs::Error(ErrorKind::kStageIncomplete,
                        "no state at " + o.state + "; run population first");
  }
  return st;
}

void run_stage(const Options& o, robobs::Stage s) {
  robobs::PipelineState st = open_state(o, s == robobs::Stage::kPopulation);
  st.run(s, o.force);
  st.save(o.state);
  std::printf("%s done (output %s)\n", robobs::stage_name(s), st.output_hash(s).c_str());
}

void report(const Options& o) {
  const robobs::PipelineState st = open_state(o, false);
  for (const auto& p : robobs::write_report(st, o.report_dir)) {
    std::printf("wrote %s\n", p.string().c_str());
  }
}

int admit(const Options& o) {
  const robobs::PipelineState st = open_state(o, false);
  const auto rep = robobs::admit_model(st, robobs::read_model(o.model));
  if (!rep.admit) {
    std::printf("REJECT: residual exceeds |W_delta| at %zu grid points\n",
                rep.violating_omegas.size());
    for (double w : rep.violating_omegas) std::printf("  %.6g rad/s\n", w);
    return 0;
  }
  std::printf("ADMIT\n");
  if (!rep.observer_stable) {
    std::printf("paired observer is unstable; no observer written\n");
    return 1;
  }
  if (!o.observer_out.empty()) {
    robobs::write_model(o.observer_out, rep.observer.sys);
    std::printf("observer written to %s\n", o.observer_out.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust input-output observer design for a model population"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config, "Pipeline configuration (JSON)");
  app.add_option("--state", o.state, "Pipeline state file")->capture_default_str();
  app.add_flag("--force", o.force, "Run even if upstream stages are stale");
  app.add_option("--seed", o.seed, "Override the configuration seed");

  for (robobs::Stage s : robobs::kAllStages) {
    app.add_subcommand(robobs::stage_name(s), std::string("Run the ") +
                                                  robobs::stage_name(s) + " stage");
  }
  auto* all = app.add_subcommand("run", "Run every stage in order, then the report");
  all->add_option("--out", o.report_dir, "Report directory")->capture_default_str();
  auto* rep = app.add_subcommand("report", "Write CSV and JSON report files");
  rep->add_option("--out", o.report_dir, "Report directory")->capture_default_str();
  auto* adm = app.add_subcommand("admit", "Check a new model against the uncertainty bound");
  adm->add_option("model", o.model, "Model file {a, b, c, d}")->required();
  adm->add_option("--observer-out", o.observer_out, "Where to write the paired observer");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*adm) return admit(o);
    if (*rep) {
      report(o);
      return 0;
    }
    if (*all) {
      for (robobs::Stage s : robobs::kAllStages) run_stage(o, s);
      report(o);
      return 0;
    }
    for (robobs::Stage s : robobs::kAllStages) {
      if (*app.get_subcommand(robobs::stage_name(s))) run_stage(o, s);
    }
    return 0;
  } catch (const robobs::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
