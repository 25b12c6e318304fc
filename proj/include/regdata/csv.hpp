#pragma once

// CSV reading/writing with a bit-faithful numeric format: 17 significant
// digits, '.' decimal point, LF line endings.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "regdata/datagen.hpp"
#include "regdata/numerics.hpp"
#include "regdata/oracle.hpp"

namespace regdata {

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_matrix_csv(const std::string& path, const Mat& a) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open for writing: " + path);
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      if (j) f << ',';
      f << format_real(a(i, j));
    }
    f << '\n';
  }
}

inline Mat read_matrix_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open for reading: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        size_t used = 0;
        row.push_back(std::stod(cell, &used));
        while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ConfigError(path + ":" + std::to_string(lineno) +
                          ": not a number: '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ConfigError(path + ":" + std::to_string(lineno) + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError(path + ": empty matrix file");
  Mat a(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      a(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
  return a;
}

// Header: t,x1..xn,z1..znz,v1..vq,u1..um,e1..ep
inline void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open for writing: " + path);
  f << 't';
  for (Index j = 0; j < traj.x.cols(); ++j) f << ",x" << (j + 1);
  for (Index j = 0; j < traj.z.cols(); ++j) f << ",z" << (j + 1);
  for (Index j = 0; j < traj.v.cols(); ++j) f << ",v" << (j + 1);
  for (Index j = 0; j < traj.u.cols(); ++j) f << ",u" << (j + 1);
  for (Index j = 0; j < traj.e.cols(); ++j) f << ",e" << (j + 1);
  f << '\n';
  for (Index i = 0; i < traj.samples(); ++i) {
    f << format_real(traj.t[static_cast<size_t>(i)]);
    for (Index j = 0; j < traj.x.cols(); ++j) f << ',' << format_real(traj.x(i, j));
    for (Index j = 0; j < traj.z.cols(); ++j) f << ',' << format_real(traj.z(i, j));
    for (Index j = 0; j < traj.v.cols(); ++j) f << ',' << format_real(traj.v(i, j));
    for (Index j = 0; j < traj.u.cols(); ++j) f << ',' << format_real(traj.u(i, j));
    for (Index j = 0; j < traj.e.cols(); ++j) f << ',' << format_real(traj.e(i, j));
    f << '\n';
  }
}

// Per-iteration rows; the oracle-error column appears only when a reference
// P* was available (blind runs have none).
inline void write_learn_report_csv(const std::string& path,
                                   const std::vector<ViIterRow>& trace,
                                   bool with_oracle) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open for writing: " + path);
  f << "k,q,eps_k,conv_stat,update_norm";
  if (with_oracle) f << ",p_err";
  f << '\n';
  for (const auto& row : trace) {
    f << row.k << ',' << row.q << ',' << format_real(row.eps_k) << ','
      << format_real(row.stat) << ',' << format_real(row.update_norm);
    if (with_oracle) f << ',' << format_real(row.p_err);
    f << '\n';
  }
}

// Header: t,e1..ep,e_norm
inline void write_eval_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open for writing: " + path);
  f << 't';
  for (Index j = 0; j < traj.e.cols(); ++j) f << ",e" << (j + 1);
  f << ",e_norm\n";
  for (Index i = 0; i < traj.samples(); ++i) {
    f << format_real(traj.t[static_cast<size_t>(i)]);
    for (Index j = 0; j < traj.e.cols(); ++j) f << ',' << format_real(traj.e(i, j));
    f << ',' << format_real(traj.e.row(i).norm()) << '\n';
  }
}

}  // namespace regdata
