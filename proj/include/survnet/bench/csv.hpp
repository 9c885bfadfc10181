#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "../core.hpp"
#include "../serialize.hpp"

//! Dataset files: UTF-8, comma separated, one header row. The columns named
//! `time` (positive) and `event` (0/1) are reserved; every other column is
//! a numeric covariate, in file order.

namespace survnet::bench {

struct DatasetFile
{
  SurvivalDataset data;
  std::vector<std::string> covariate_names;
};

namespace detail {

inline std::string_view trim(std::string_view s)
{
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line)
{
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t k = 0; k <= line.size(); ++k) {
    if (k == line.size() || line[k] == ',') {
      out.push_back(trim(line.substr(start, k - start)));
      start = k + 1;
    }
  }
  return out;
}

inline bool parse_finite(std::string_view s, double& v)
{
  if (s.empty())
    return false;
  if (s.front() == '+')
    s.remove_prefix(1);
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(v);
}

} // namespace detail

//! Parses a dataset; `source` names the input in diagnostics.
inline DatasetFile parse_dataset(std::istream& in, const std::string& source = "input")
{
  auto fail = [&](const std::string& msg) -> void { throw std::runtime_error(source + ": " + msg); };
  std::string line;
  if (!std::getline(in, line))
    fail("empty file, expected a header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
    line.erase(0, 3);
  auto header = detail::split_commas(line);
  int time_col = -1, event_col = -1;
  std::vector<int> cov_cols;
  DatasetFile file;
  for (std::size_t c = 0; c < header.size(); ++c) {
    std::string name(header[c]);
    if (name.empty())
      fail("header column " + std::to_string(c + 1) + " has no name");
    for (std::size_t d = 0; d < c; ++d)
      if (header[d] == header[c])
        fail("duplicate header column '" + name + "'");
    if (name == "time")
      time_col = static_cast<int>(c);
    else if (name == "event")
      event_col = static_cast<int>(c);
    else {
      cov_cols.push_back(static_cast<int>(c));
      file.covariate_names.push_back(name);
    }
  }
  if (time_col < 0 || event_col < 0)
    fail("header must contain 'time' and 'event' columns");

  std::vector<double> values, times;
  std::vector<int> events;
  std::size_t row = 0, line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty())
      continue;
    ++row;
    auto where = [&] { return "row " + std::to_string(row) + " (line " + std::to_string(line_no) + ")"; };
    auto cells = detail::split_commas(line);
    if (cells.size() != header.size())
      fail(where() + ": expected " + std::to_string(header.size()) + " fields, found " +
           std::to_string(cells.size()));
    double t = 0.0;
    if (!detail::parse_finite(cells[static_cast<std::size_t>(time_col)], t))
      fail(where() + ": time '" + std::string(cells[static_cast<std::size_t>(time_col)]) + "' is not a finite number");
    if (!(t > 0.0))
      fail(where() + ": time must be positive, found " + std::string(cells[static_cast<std::size_t>(time_col)]));
    auto ev = cells[static_cast<std::size_t>(event_col)];
    if (ev != "0" && ev != "1")
      fail(where() + ": event must be 0 or 1, found '" + std::string(ev) + "'");
    times.push_back(t);
    events.push_back(ev == "1" ? 1 : 0);
    for (std::size_t k = 0; k < cov_cols.size(); ++k) {
      double v = 0.0;
      auto cell = cells[static_cast<std::size_t>(cov_cols[k])];
      if (!detail::parse_finite(cell, v))
        fail(where() + ": column '" + file.covariate_names[k] + "' value '" + std::string(cell) +
             "' is not a finite number");
      values.push_back(v);
    }
  }
  if (row == 0)
    fail("no data rows");
  const auto n = static_cast<Index>(row), p = static_cast<Index>(cov_cols.size());
  Matrix x(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j)
      x(i, j) = values[static_cast<std::size_t>(i * p + j)];
  file.data = SurvivalDataset(std::move(x), Eigen::Map<const Vector>(times.data(), n), std::move(events));
  return file;
}

inline DatasetFile load_dataset_file(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open dataset '" + path + "'");
  return parse_dataset(in, path);
}

inline SurvivalDataset load_csv(const std::string& path) { return load_dataset_file(path).data; }

//! Writes `time,event,<covariates>`; names default to x1..xp.
inline void write_dataset(std::ostream& os, const SurvivalDataset& data, std::vector<std::string> names = {})
{
  if (names.empty())
    for (Index j = 0; j < data.p(); ++j)
      names.push_back("x" + std::to_string(j + 1));
  if (static_cast<Index>(names.size()) != data.p())
    throw std::invalid_argument("write_dataset: one name per covariate required");
  os << "time,event";
  for (const auto& n : names)
    os << ',' << n;
  os << '\n';
  for (Index i = 0; i < data.n(); ++i) {
    os << io::format_double(data.time(i)) << ',' << data.event(i);
    for (Index j = 0; j < data.p(); ++j)
      os << ',' << io::format_double(data.x()(i, j));
    os << '\n';
  }
  if (!os)
    throw std::runtime_error("write_dataset: write failed");
}

inline void save_csv(const SurvivalDataset& data, const std::string& path, std::vector<std::string> names = {})
{
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot create '" + path + "'");
  write_dataset(out, data, std::move(names));
}

} // namespace survnet::bench
