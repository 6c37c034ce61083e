#pragma once

#include <fstream>
#include <iomanip>

#include "tsaa/series.hpp"

namespace tsaa {

namespace detail {
inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  std::size_t pos = 0;
  try {
    out = std::stod(s, &pos);
  } catch (...) {
    return false;
  }
  while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  return pos == s.size();
}
}  // namespace detail

// Reads a series CSV: header row required, optional leading timestamp column
// (detected when the first data row's first field is non-numeric), remaining
// columns are numeric channels.
inline TimeSeries read_csv(const std::string& path, const std::string& frequency = "") {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("read_csv: empty file " + path);
  auto header = detail::split_line(line);

  std::vector<std::vector<double>> rows;
  bool skip_first = false;
  bool first_row = true;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = detail::split_line(line);
    if (first_row) {
      double tmp;
      skip_first = !detail::parse_double(fields[0], tmp);
      first_row = false;
    }
    std::size_t start = skip_first ? 1 : 0;
    if (fields.size() <= start)
      throw std::runtime_error("read_csv: no numeric columns at line " + std::to_string(lineno));
    std::vector<double> row;
    row.reserve(fields.size() - start);
    for (std::size_t i = start; i < fields.size(); ++i) {
      double v;
      if (!detail::parse_double(fields[i], v))
        throw std::runtime_error("read_csv: bad value '" + fields[i] + "' at line " + std::to_string(lineno));
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error("read_csv: ragged row at line " + std::to_string(lineno));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("read_csv: no data rows in " + path);

  TimeSeries ts;
  ts.frequency = frequency;
  std::size_t start = skip_first ? 1 : 0;
  for (std::size_t i = start; i < header.size() && i - start < rows.front().size(); ++i)
    ts.channel_names.push_back(header[i]);
  while (ts.channel_names.size() < rows.front().size())
    ts.channel_names.push_back("ch" + std::to_string(ts.channel_names.size()));
  ts.values = Matrix(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) ts.values(r, c) = rows[r][c];
  ts.validate();
  return ts;
}

inline void write_csv(const std::string& path, const Matrix& m,
                      const std::vector<std::string>& header = {}) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_csv: cannot open " + path);
  out << std::setprecision(17);
  if (!header.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    out << "\n";
  }
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) out << (c ? "," : "") << m(r, c);
    out << "\n";
  }
}

inline void write_csv(const std::string& path, const TimeSeries& ts) {
  write_csv(path, ts.values, ts.channel_names);
}

}  // namespace tsaa
