#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "wdrc/dr_riccati.hpp"
#include "wdrc/errors.hpp"
#include "wdrc/linalg.hpp"
#include "wdrc/qlearning.hpp"

namespace wdrc {

using Json = nlohmann::ordered_json;

// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& text) {
  double v = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc{}) {
    throw ContractViolation("parse_double: not a number: '" + text + "'");
  }
  return v;
}

namespace detail {

inline Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Json vector_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ContractViolation("cannot open for writing: " + path.string());
  out << content;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace detail

// Field names and order are frozen; downstream tooling golden-tests them.
inline Json solve_report_json(const SolveReport& rep) {
  Json j;
  j["P"] = detail::matrix_json(rep.value.P);
  j["g"] = detail::vector_json(rep.value.g);
  j["z"] = rep.value.z;
  j["K"] = detail::matrix_json(rep.policy.K);
  j["r"] = detail::vector_json(rep.policy.r);
  j["L"] = detail::matrix_json(rep.policy.L);
  j["l"] = detail::vector_json(rep.policy.l);
  Json lj = Json::array();
  for (const auto& off : rep.worst_case.offsets) lj.push_back(detail::vector_json(off));
  j["l_j"] = std::move(lj);
  j["iterations"] = rep.iterations;
  j["residual"] = rep.residual;
  j["rho_closed"] = rep.rho_closed;
  j["rho_game"] = rep.rho_game;
  j["feasible"] = rep.feasible;
  return j;
}

inline Json qparams_json(const QParams& qp) {
  Json j;
  j["H"] = detail::matrix_json(qp.H);
  j["G"] = detail::vector_json(qp.G);
  j["s"] = qp.s;
  return j;
}

// policy.csv layout: K rows, then r as one row, then L rows, then l.
inline std::string policy_csv(const PolicyPair& p) {
  std::string out;
  auto emit_row = [&out](const auto& row) {
    for (Eigen::Index j = 0; j < row.size(); ++j) {
      if (j) out += ',';
      out += format_double(row(j));
    }
    out += '\n';
  };
  for (Eigen::Index i = 0; i < p.K.rows(); ++i) emit_row(Vector(p.K.row(i)));
  emit_row(p.r);
  for (Eigen::Index i = 0; i < p.L.rows(); ++i) emit_row(Vector(p.L.row(i)));
  emit_row(p.l);
  return out;
}

inline PolicyPair parse_policy_csv(const std::string& text, int n, int m, int d) {
  std::istringstream in(text);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& f : detail::split(line, ',')) row.push_back(parse_double(f));
    rows.push_back(std::move(row));
  }
  if (static_cast<int>(rows.size()) != m + d + 2) {
    throw ContractViolation("policy csv: expected " + std::to_string(m + d + 2) + " rows");
  }
  auto take_matrix = [&](int first, int count, int cols) {
    Matrix out(count, cols);
    for (int i = 0; i < count; ++i) {
      const auto& row = rows[static_cast<std::size_t>(first + i)];
      if (static_cast<int>(row.size()) != cols) {
        throw ContractViolation("policy csv: row width mismatch");
      }
      for (int j = 0; j < cols; ++j) out(i, j) = row[static_cast<std::size_t>(j)];
    }
    return out;
  };
  PolicyPair p;
  p.K = take_matrix(0, m, n);
  p.r = Vector(take_matrix(m, 1, m).row(0).transpose());
  p.L = take_matrix(m + 1, d, n);
  p.l = Vector(take_matrix(m + 1 + d, 1, d).row(0).transpose());
  return p;
}

inline PolicyPair read_policy_csv(const std::filesystem::path& path, int n, int m, int d) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractViolation("cannot open policy csv: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_policy_csv(ss.str(), n, m, d);
}

// One atom per row, d comma-separated columns.
inline std::string atoms_csv(const std::vector<Vector>& atoms) {
  std::string out;
  for (const auto& a : atoms) {
    for (Eigen::Index j = 0; j < a.size(); ++j) {
      if (j) out += ',';
      out += format_double(a(j));
    }
    out += '\n';
  }
  return out;
}

inline std::vector<Vector> parse_atoms_csv(const std::string& text) {
  std::istringstream in(text);
  std::vector<Vector> atoms;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split(line, ',');
    Vector a(static_cast<Eigen::Index>(fields.size()));
    for (std::size_t j = 0; j < fields.size(); ++j) {
      a(static_cast<Eigen::Index>(j)) = parse_double(fields[j]);
    }
    atoms.push_back(std::move(a));
  }
  return atoms;
}

inline std::vector<Vector> read_atoms_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractViolation("cannot open samples csv: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_atoms_csv(ss.str());
}

inline std::string theta_csv(const ThetaVector& theta) {
  std::string out;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    out += format_double(theta(i));
    out += '\n';
  }
  return out;
}

inline std::string iterations_csv(const std::vector<IterationLog>& logs) {
  std::string out = "iter,delta,J,design_condition\n";
  for (const auto& log : logs) {
    out += std::to_string(log.index);
    out += ',';
    out += format_double(log.delta);
    out += ',';
    out += format_double(log.J);
    out += ',';
    out += format_double(log.design_condition);
    out += '\n';
  }
  return out;
}

}  // namespace wdrc
