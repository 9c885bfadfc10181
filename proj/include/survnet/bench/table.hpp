#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "results.hpp"

//! Summary tables. One row per (cell, model), cells in order of first
//! appearance and models in the order their rows appear.
//!
//! CSV columns:
//!   family,baseline,n,p,model,reps,failed,c_td_mean,c_td_sd,ibs_mean,ibs_sd
//! Markdown columns:
//!   | family | baseline | n | p | model | reps | failed | C_td | IBS |
//! where a metric cell is "mean ± sd" to 4 decimals, "mean" alone for a
//! single successful repetition, and "NA" when every repetition failed.

namespace survnet::bench {

enum class TableFormat
{
  csv,
  markdown
};

inline TableFormat parse_table_format(const std::string& s)
{
  if (s == "csv")
    return TableFormat::csv;
  if (s == "markdown" || s == "md")
    return TableFormat::markdown;
  throw std::invalid_argument("unknown table format '" + s + "' (expected csv or markdown)");
}

struct TableRow
{
  std::string family;
  std::string baseline;
  Index n = 0;
  Index p = 0;
  std::string model;
  int reps = 0;    // successful repetitions
  int failed = 0;  // failed repetitions
  double c_mean = std::numeric_limits<double>::quiet_NaN();
  double c_sd = std::numeric_limits<double>::quiet_NaN();
  double ibs_mean = std::numeric_limits<double>::quiet_NaN();
  double ibs_sd = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

//! Mean and sample sd; sd is NaN for fewer than two values.
inline std::pair<double, double> mean_sd(const std::vector<double>& v)
{
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (v.empty())
    return {nan, nan};
  double m = 0.0;
  for (double x : v)
    m += x;
  m /= static_cast<double>(v.size());
  if (v.size() < 2)
    return {m, nan};
  double ss = 0.0;
  for (double x : v)
    ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

inline std::string fixed4(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  std::string s(buf);
  return s == "-0.0000" ? "0.0000" : s;
}

inline std::string metric_cell(double mean, double sd)
{
  if (std::isnan(mean))
    return "NA";
  if (std::isnan(sd))
    return fixed4(mean);
  return fixed4(mean) + " ± " + fixed4(sd);
}

inline std::string optional_number(double v) { return std::isnan(v) ? "NA" : fixed4(v); }

} // namespace detail

inline std::vector<TableRow> summarize(const std::vector<ResultRow>& rows)
{
  std::vector<std::string> cells;
  std::map<std::string, std::vector<std::string>> models;
  std::map<std::pair<std::string, std::string>, std::vector<const ResultRow*>> groups;
  for (const auto& r : rows) {
    const std::string cell = r.cell_key();
    if (!models.count(cell))
      cells.push_back(cell);
    auto& ms = models[cell];
    if (std::find(ms.begin(), ms.end(), r.model) == ms.end())
      ms.push_back(r.model);
    groups[{cell, r.model}].push_back(&r);
  }
  std::vector<TableRow> out;
  for (const auto& cell : cells)
    for (const auto& m : models[cell]) {
      const auto& g = groups[{cell, m}];
      TableRow t;
      t.family = g.front()->family;
      t.baseline = g.front()->baseline;
      t.n = g.front()->n;
      t.p = g.front()->p;
      t.model = m;
      std::vector<double> c, ibs;
      for (const ResultRow* r : g) {
        if (r->failed()) {
          ++t.failed;
          continue;
        }
        c.push_back(r->c_td);
        ibs.push_back(r->ibs);
      }
      t.reps = static_cast<int>(c.size());
      std::tie(t.c_mean, t.c_sd) = detail::mean_sd(c);
      std::tie(t.ibs_mean, t.ibs_sd) = detail::mean_sd(ibs);
      out.push_back(t);
    }
  return out;
}

inline void emit_table(std::ostream& os, const std::vector<TableRow>& table, TableFormat format)
{
  using detail::metric_cell;
  using detail::optional_number;
  if (format == TableFormat::csv) {
    os << "family,baseline,n,p,model,reps,failed,c_td_mean,c_td_sd,ibs_mean,ibs_sd\n";
    for (const auto& t : table)
      os << t.family << ',' << t.baseline << ',' << t.n << ',' << t.p << ',' << t.model << ',' << t.reps << ','
         << t.failed << ',' << optional_number(t.c_mean) << ',' << optional_number(t.c_sd) << ','
         << optional_number(t.ibs_mean) << ',' << optional_number(t.ibs_sd) << '\n';
    return;
  }
  os << "| family | baseline | n | p | model | reps | failed | C_td | IBS |\n";
  os << "|---|---|---:|---:|---|---:|---:|---:|---:|\n";
  for (const auto& t : table)
    os << "| " << t.family << " | " << t.baseline << " | " << t.n << " | " << t.p << " | " << t.model << " | "
       << t.reps << " | " << t.failed << " | " << metric_cell(t.c_mean, t.c_sd) << " | "
       << metric_cell(t.ibs_mean, t.ibs_sd) << " |\n";
}

inline std::string emit_table(const std::vector<ResultRow>& rows, TableFormat format)
{
  std::ostringstream ss;
  emit_table(ss, summarize(rows), format);
  return ss.str();
}

//! Parses markdown written by emit_table; values carry 4-decimal precision.
inline std::vector<TableRow> parse_markdown_table(std::istream& in)
{
  auto fail = [](std::size_t line, const std::string& msg) {
    throw std::runtime_error("markdown table line " + std::to_string(line) + ": " + msg);
  };
  auto split_row = [](const std::string& line) {
    std::vector<std::string> out;
    std::string_view s = detail::trim(line);
    if (s.size() < 2 || s.front() != '|' || s.back() != '|')
      return out;
    s = s.substr(1, s.size() - 2);
    std::size_t start = 0;
    for (std::size_t k = 0; k <= s.size(); ++k)
      if (k == s.size() || s[k] == '|') {
        out.emplace_back(detail::trim(s.substr(start, k - start)));
        start = k + 1;
      }
    return out;
  };
  auto metric = [&](const std::string& cell, double& mean, double& sd, std::size_t line) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    mean = sd = nan;
    if (cell == "NA")
      return;
    const std::string pm = " ± ";
    auto pos = cell.find(pm);
    try {
      mean = io::parse_double(cell.substr(0, pos));
      if (pos != std::string::npos)
        sd = io::parse_double(cell.substr(pos + pm.size()));
    } catch (const std::exception& e) {
      fail(line, e.what());
    }
  };
  std::vector<TableRow> out;
  std::string line;
  std::size_t line_no = 0;
  const std::vector<std::string> header{"family", "baseline", "n", "p", "model", "reps", "failed", "C_td", "IBS"};
  while (std::getline(in, line)) {
    ++line_no;
    auto cells = split_row(line);
    if (cells.empty())
      continue;
    if (line_no == 1) {
      if (cells != header)
        fail(line_no, "unexpected header");
      continue;
    }
    if (line_no == 2)
      continue;
    if (cells.size() != header.size())
      fail(line_no, "expected 9 columns");
    TableRow t;
    t.family = cells[0];
    t.baseline = cells[1];
    try {
      t.n = static_cast<Index>(std::stoll(cells[2]));
      t.p = static_cast<Index>(std::stoll(cells[3]));
      t.reps = std::stoi(cells[5]);
      t.failed = std::stoi(cells[6]);
    } catch (const std::exception& e) {
      fail(line_no, e.what());
    }
    t.model = cells[4];
    metric(cells[7], t.c_mean, t.c_sd, line_no);
    metric(cells[8], t.ibs_mean, t.ibs_sd, line_no);
    out.push_back(t);
  }
  return out;
}

} // namespace survnet::bench
