#include "robobs/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "robobs/errors.hpp"

namespace robobs {

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j, Eigen::Index cols_if_empty) {
  if (!j.is_array()) throw Error(ErrorKind::kSchema, "matrix must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return Matrix(0, cols_if_empty);
  if (!j[0].is_array()) throw Error(ErrorKind::kSchema, "matrix rows must be arrays");
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw Error(ErrorKind::kSchema, "ragged matrix row " + std::to_string(i));
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) throw Error(ErrorKind::kSchema, "matrix entries must be numbers");
      m(i, c) = v.get<double>();
    }
  }
  return m;
}

nlohmann::json to_json(const StateSpace& sys) {
  return {{"a", matrix_to_json(sys.a())},
          {"b", matrix_to_json(sys.b())},
          {"c", matrix_to_json(sys.c())},
          {"d", matrix_to_json(sys.d())}};
}

StateSpace state_space_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorKind::kSchema, "model must be an object");
  for (const char* key : {"a", "b", "c", "d"}) {
    if (!j.contains(key)) throw Error(ErrorKind::kSchema, std::string("model lacks \"") + key + "\"");
  }
  const Matrix d = matrix_from_json(j["d"]);
  const Matrix a = matrix_from_json(j["a"]);
  const Matrix b = matrix_from_json(j["b"], d.cols());
  Matrix c = matrix_from_json(j["c"], a.rows());
  if (c.rows() == 0 && d.rows() > 0) c.resize(d.rows(), a.rows());
  try {
    return StateSpace(a, b, c, d);
  } catch (const Error& e) {
    throw Error(ErrorKind::kSchema, e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kInvalidArgument, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kInvalidArgument, "cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw Error(ErrorKind::kInvalidArgument, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

StateSpace read_model(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kSchema, path.string() + ": " + e.what());
  }
  return state_space_from_json(j);
}

void write_model(const std::filesystem::path& path, const StateSpace& sys) {
  write_file_atomic(path, to_json(sys).dump(2) + "\n");
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string frf_csv(const FrequencyResponse& frf) {
  std::string out = "omega_rad_s";
  if (frf.size() == 0) return out + "\n";
  const CMatrix& g0 = frf.values[0];
  for (Eigen::Index i = 0; i < g0.rows(); ++i) {
    for (Eigen::Index j = 0; j < g0.cols(); ++j) {
      const std::string ij = std::to_string(i + 1) + "_" + std::to_string(j + 1);
      out += ",re_" + ij + ",im_" + ij;
    }
  }
  out += "\n";
  for (std::size_t k = 0; k < frf.size(); ++k) {
    out += format_number(frf.grid[k]);
    const CMatrix& g = frf.values[k];
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      for (Eigen::Index j = 0; j < g.cols(); ++j) {
        out += "," + format_number(g(i, j).real()) + "," + format_number(g(i, j).imag());
      }
    }
    out += "\n";
  }
  return out;
}

std::string ssv_csv(const SSVReport& report) {
  std::string out = "omega_rad_s,mu_upper,d_opt\n";
  for (std::size_t k = 0; k < report.mu_upper.size(); ++k) {
    out += format_number(report.grid[k]) + "," + format_number(report.mu_upper[k]) +
           "," + format_number(report.d_opt[k]) + "\n";
  }
  return out;
}

std::string dataset_csv(const Dataset& data) {
  if (data.u.cols() != 2 || data.x.cols() != 4 || data.y.cols() != 2) {
    throw Error(ErrorKind::kDimensionMismatch, "dataset table needs 2 inputs, 4 states, 2 outputs");
  }
  if (data.x.rows() != data.u.rows() || data.y.rows() != data.u.rows()) {
    throw Error(ErrorKind::kLengthMismatch, "dataset columns differ in length");
  }
  std::string out = "t_s,u1_A,u2_A,th1_deg,al1_deg,th2_deg,al2_deg,y1_deg,y2_deg\n";
  for (Eigen::Index n = 0; n < data.u.rows(); ++n) {
    out += format_number(double(n) * data.dt);
    for (Eigen::Index j = 0; j < 2; ++j) out += "," + format_number(data.u(n, j));
    for (Eigen::Index j = 0; j < 4; ++j) out += "," + format_number(data.x(n, j) * kRadToDeg);
    for (Eigen::Index j = 0; j < 2; ++j) out += "," + format_number(data.y(n, j) * kRadToDeg);
    out += "\n";
  }
  return out;
}

}  // namespace robobs
