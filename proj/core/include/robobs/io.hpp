#pragma once

// JSON model files and the CSV tables written by the pipeline reports.

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "robobs/lti.hpp"
#include "robobs/mu.hpp"
#include "robobs/popsim.hpp"

namespace robobs {

/// {"a": [[...]], "b": ..., "c": ..., "d": ...}, row-major nested arrays.
nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j, Eigen::Index cols_if_empty = 0);
nlohmann::json to_json(const StateSpace& sys);
/// Throws Schema on missing keys, ragged rows or inconsistent sizes.
StateSpace state_space_from_json(const nlohmann::json& j);

StateSpace read_model(const std::filesystem::path& path);
void write_model(const std::filesystem::path& path, const StateSpace& sys);

/// Replaces `path` by writing a sibling temporary file and renaming it.
void write_file_atomic(const std::filesystem::path& path, const std::string& text);
std::string read_file(const std::filesystem::path& path);

/// Fixed "%.17g" formatting so equal values give byte-equal tables.
std::string format_number(double v);

/// omega_rad_s then re/im of every entry, row-major.
std::string frf_csv(const FrequencyResponse& frf);
/// omega_rad_s, mu_upper, d_opt.
std::string ssv_csv(const SSVReport& report);
/// t_s, u1_A, u2_A, th1_deg, al1_deg, th2_deg, al2_deg, y1_deg, y2_deg.
std::string dataset_csv(const Dataset& data);

}  // namespace robobs
