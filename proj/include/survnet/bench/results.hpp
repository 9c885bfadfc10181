#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "../serialize.hpp"
#include "csv.hpp"

namespace survnet::bench {

inline constexpr const char* kReferenceName = "Reference";
inline constexpr const char* kResultsHeader = "family,baseline,n,p,model,rep,seed,c_td,ibs,wall_seconds";

//! One (cell, repetition, model) outcome. Failed fits carry NaN metrics.
struct ResultRow
{
  std::string family;
  std::string baseline;
  Index n = 0;
  Index p = 0;
  std::string model;
  int rep = 0;
  std::uint64_t seed = 0;
  double c_td = std::numeric_limits<double>::quiet_NaN();
  double ibs = std::numeric_limits<double>::quiet_NaN();
  double wall_seconds = 0.0;

  bool failed() const { return std::isnan(c_td) || std::isnan(ibs); }

  std::string cell_key() const
  {
    return family + "/" + baseline + "/" + std::to_string(n) + "/" + std::to_string(p);
  }

  //! Identity of the row for resume bookkeeping.
  std::tuple<std::string, int, std::string> key() const { return {cell_key(), rep, model}; }
};

inline std::string format_row(const ResultRow& r)
{
  std::ostringstream ss;
  ss << r.family << ',' << r.baseline << ',' << r.n << ',' << r.p << ',' << r.model << ',' << r.rep << ','
     << r.seed << ',' << io::format_double(r.c_td) << ',' << io::format_double(r.ibs) << ','
     << io::format_double(r.wall_seconds) << '\n';
  return ss.str();
}

inline ResultRow parse_row(const std::string& line, std::size_t line_no)
{
  auto cells = detail::split_commas(line);
  auto fail = [&](const std::string& msg) {
    throw std::runtime_error("results line " + std::to_string(line_no) + ": " + msg);
  };
  if (cells.size() != 10)
    fail("expected 10 fields, found " + std::to_string(cells.size()));
  ResultRow r;
  try {
    r.family = std::string(cells[0]);
    r.baseline = std::string(cells[1]);
    r.n = static_cast<Index>(std::stoll(std::string(cells[2])));
    r.p = static_cast<Index>(std::stoll(std::string(cells[3])));
    r.model = std::string(cells[4]);
    r.rep = std::stoi(std::string(cells[5]));
    r.seed = std::stoull(std::string(cells[6]));
    r.c_td = io::parse_double(std::string(cells[7]));
    r.ibs = io::parse_double(std::string(cells[8]));
    r.wall_seconds = io::parse_double(std::string(cells[9]));
  } catch (const std::exception& e) {
    fail(e.what());
  }
  return r;
}

inline std::vector<ResultRow> read_results(std::istream& in)
{
  std::vector<ResultRow> rows;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line))
    return rows;
  ++line_no;
  if (detail::trim(line) != kResultsHeader)
    throw std::runtime_error("results file: unexpected header '" + line + "'");
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty())
      continue;
    rows.push_back(parse_row(line, line_no));
  }
  return rows;
}

inline std::vector<ResultRow> load_results(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open results '" + path + "'");
  return read_results(in);
}

inline void write_results(std::ostream& os, const std::vector<ResultRow>& rows)
{
  os << kResultsHeader << '\n';
  for (const auto& r : rows)
    os << format_row(r);
}

//! Append-only results file. A partially written last line (an interrupted
//! write) is dropped when the store is opened.
class ResultStore
{
public:
  explicit ResultStore(std::string path)
    : path_(std::move(path))
  {
    std::ifstream in(path_, std::ios::binary);
    std::string content;
    if (in) {
      std::ostringstream ss;
      ss << in.rdbuf();
      content = ss.str();
    }
    if (!content.empty() && content.back() != '\n') {
      content.erase(content.find_last_of('\n') == std::string::npos ? 0 : content.find_last_of('\n') + 1);
      std::ofstream fix(path_, std::ios::binary | std::ios::trunc);
      fix << content;
    }
    if (content.empty()) {
      std::ofstream out(path_, std::ios::binary | std::ios::trunc);
      if (!out)
        throw std::runtime_error("cannot create results file '" + path_ + "'");
      out << kResultsHeader << '\n';
    } else {
      std::istringstream ss(content);
      rows_ = read_results(ss);
      for (const auto& r : rows_)
        keys_.insert(r.key());
    }
  }

  const std::string& path() const { return path_; }
  const std::vector<ResultRow>& rows() const { return rows_; }
  bool contains(const ResultRow& r) const { return keys_.count(r.key()) > 0; }

  void append(const ResultRow& r)
  {
    std::string line = format_row(r);
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    out.flush();
    if (!out)
      throw std::runtime_error("failed to append to '" + path_ + "'");
    rows_.push_back(r);
    keys_.insert(r.key());
  }

private:
  std::string path_;
  std::vector<ResultRow> rows_;
  std::set<std::tuple<std::string, int, std::string>> keys_;
};

} // namespace survnet::bench
