#pragma once

#include <Eigen/Dense>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "simulation.hpp"

namespace dcp {

inline std::string format_double(double v, const char* spec = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

inline std::vector<std::string> split_fields(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline bool try_parse_double(const std::string& field, double& out) {
  const std::string t = trim(field);
  if (t.empty()) return false;
  char* end = nullptr;
  out = std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size();
}

inline double parse_double_or_throw(const std::string& field, std::size_t line_no) {
  double v = 0.0;
  if (!try_parse_double(field, v))
    throw std::runtime_error("csv line " + std::to_string(line_no) + ": could not parse '" +
                             trim(field) + "' as a number");
  return v;
}

inline std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  for (const std::string& f : split_fields(text)) {
    double v = 0.0;
    if (!try_parse_double(f, v))
      throw std::runtime_error("could not parse '" + trim(f) + "' as a number");
    out.push_back(v);
  }
  return out;
}

// Training table: header x1,...,xp,y then one row per observation.
inline Dataset read_training_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("csv line 1: empty input, expected a header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> head = split_fields(line);
  if (head.size() < 2 || trim(head.back()) != "y")
    throw std::runtime_error("csv line 1: header must be x1,...,xp,y");
  const std::size_t p = head.size() - 1;
  for (std::size_t j = 0; j < p; ++j)
    if (trim(head[j]) != "x" + std::to_string(j + 1))
      throw std::runtime_error("csv line 1: header must be x1,...,xp,y (saw '" +
                               trim(head[j]) + "' in column " + std::to_string(j + 1) + ")");

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_fields(line);
    if (fields.size() != p + 1)
      throw std::runtime_error("csv line " + std::to_string(line_no) + ": expected " +
                               std::to_string(p + 1) + " fields, saw " +
                               std::to_string(fields.size()));
    std::vector<double> row(p + 1);
    for (std::size_t j = 0; j <= p; ++j) row[j] = parse_double_or_throw(fields[j], line_no);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("csv: no data rows after the header");

  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p));
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < p; ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    y[static_cast<Eigen::Index>(i)] = rows[i][p];
  }
  return Dataset(std::move(x), std::move(y));
}

// Single test point, either a bare row of numbers or a header line followed
// by one row.
inline Eigen::VectorXd read_covariates_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_fields(line);
    double probe = 0.0;
    if (!try_parse_double(fields[0], probe)) {
      if (line_no == 1 && !header_seen) {
        header_seen = true;
        continue;
      }
      throw std::runtime_error("csv line " + std::to_string(line_no) + ": could not parse '" +
                               trim(fields[0]) + "' as a number");
    }
    std::vector<double> row(fields.size());
    for (std::size_t j = 0; j < fields.size(); ++j)
      row[j] = parse_double_or_throw(fields[j], line_no);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("csv: no covariate row found");
  if (rows.size() > 1)
    throw std::runtime_error("csv: expected a single covariate row, saw " +
                             std::to_string(rows.size()));
  Eigen::VectorXd x(static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t j = 0; j < rows[0].size(); ++j) x[static_cast<Eigen::Index>(j)] = rows[0][j];
  return x;
}

// Pinned summary layout, one row per (method, grid size).
inline void write_summary_csv(std::ostream& out, const ExperimentResult& result,
                              const ExperimentConfig& cfg) {
  out << "method,n,p,M,trials,coverage,coverage_se,mean_length,length_se,"
         "clipped_fraction,mean_fit_count,wall_time_s\n";
  for (const SummaryRow& row : result.summary) {
    out << method_name(row.method) << ',' << cfg.n << ',' << cfg.p << ',' << row.grid_size
        << ',' << row.trials_used << ',' << format_double(row.coverage) << ','
        << format_double(row.coverage_se) << ',' << format_double(row.mean_length) << ','
        << format_double(row.length_se) << ',' << format_double(row.clipped_fraction) << ','
        << format_double(row.mean_fit_count) << ',' << format_double(row.wall_time_s) << '\n';
  }
}

inline void write_trials_csv(std::ostream& out, const ExperimentResult& result) {
  out << "method,M,trial,covered,length,clipped,fit_count,wall_time_s,status\n";
  for (const TrialRecord& rec : result.records) {
    std::string status = rec.failure.empty() ? "ok" : rec.failure;
    for (char& ch : status)
      if (ch == ',' || ch == '\n') ch = ';';
    out << method_name(rec.method) << ',' << rec.grid_size << ',' << rec.trial << ','
        << (rec.covered ? 1 : 0) << ',' << format_double(rec.length, "%.10g") << ','
        << (rec.clipped ? 1 : 0) << ',' << rec.fit_count << ','
        << format_double(rec.wall_time_s) << ',' << status << '\n';
  }
}

}  // namespace dcp
