#pragma once

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "models.hpp"

//! Plain-text model files. Every line is `key value...`; doubles are written
//! in shortest round-trip form so a save/load cycle is bit-exact.
//!
//!   survnet-model 1
//!   kind <CoxL1|Cox-nnet|NNsurv|NNsurv-deep>
//!   ... model-specific fields ...
//!   end

namespace survnet {

inline constexpr int kModelFormatVersion = 1;

namespace io {

inline std::string format_double(double v)
{
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  if (res.ec != std::errc())
    throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s)
{
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    if (s == "inf" || s == "-inf" || s == "nan")
      return s == "nan" ? std::numeric_limits<double>::quiet_NaN()
                        : (s[0] == '-' ? -std::numeric_limits<double>::infinity()
                                       : std::numeric_limits<double>::infinity());
    throw std::invalid_argument("not a number: '" + s + "'");
  }
  return v;
}

class Writer
{
public:
  explicit Writer(std::ostream& os)
    : os_(os)
  {
  }

  void scalar(const std::string& key, double v) { os_ << key << ' ' << format_double(v) << '\n'; }
  void integer(const std::string& key, long long v) { os_ << key << ' ' << v << '\n'; }
  void word(const std::string& key, const std::string& v) { os_ << key << ' ' << v << '\n'; }

  template<typename Seq>
  void values(const std::string& key, const Seq& v)
  {
    os_ << key << ' ' << v.size();
    for (auto x : v)
      os_ << ' ' << format_double(static_cast<double>(x));
    os_ << '\n';
  }

private:
  std::ostream& os_;
};

class Reader
{
public:
  explicit Reader(std::istream& is)
    : is_(is)
  {
  }

  //! Next line's tokens; the first must equal `key`.
  std::vector<std::string> line(const std::string& key)
  {
    std::string text;
    while (std::getline(is_, text)) {
      ++line_no_;
      if (!text.empty())
        break;
    }
    if (!is_ && text.empty())
      fail("unexpected end of file, expected '" + key + "'");
    std::istringstream ss(text);
    std::vector<std::string> tok;
    for (std::string t; ss >> t;)
      tok.push_back(t);
    if (tok.empty() || tok[0] != key)
      fail("expected '" + key + "', found '" + (tok.empty() ? std::string() : tok[0]) + "'");
    return tok;
  }

  double scalar(const std::string& key)
  {
    auto tok = line(key);
    if (tok.size() != 2)
      fail("'" + key + "' takes one value");
    return number(tok[1]);
  }

  long long integer(const std::string& key)
  {
    auto tok = line(key);
    if (tok.size() != 2)
      fail("'" + key + "' takes one value");
    try {
      std::size_t used = 0;
      long long v = std::stoll(tok[1], &used);
      if (used != tok[1].size())
        throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      fail("'" + key + "' expects an integer");
    }
  }

  std::string word(const std::string& key)
  {
    auto tok = line(key);
    if (tok.size() != 2)
      fail("'" + key + "' takes one value");
    return tok[1];
  }

  std::vector<double> values(const std::string& key)
  {
    auto tok = line(key);
    if (tok.size() < 2)
      fail("'" + key + "' needs a count");
    std::size_t count = 0;
    try {
      count = static_cast<std::size_t>(std::stoull(tok[1]));
    } catch (const std::exception&) {
      fail("'" + key + "' has a malformed count");
    }
    if (tok.size() != count + 2)
      fail("'" + key + "' declares " + std::to_string(count) + " values but has " +
           std::to_string(tok.size() - 2));
    std::vector<double> v(count);
    for (std::size_t k = 0; k < count; ++k)
      v[k] = number(tok[k + 2]);
    return v;
  }

  Vector vector(const std::string& key)
  {
    auto v = values(key);
    return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
  }

  [[noreturn]] void fail(const std::string& msg) const
  {
    throw std::runtime_error("model file line " + std::to_string(line_no_) + ": " + msg);
  }

private:
  double number(const std::string& s) const
  {
    try {
      return parse_double(s);
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
  }

  std::istream& is_;
  int line_no_ = 0;
};

inline void write_standardizer(Writer& w, const Standardizer& s)
{
  w.values("transform_mean", s.mean);
  w.values("transform_scale", s.scale);
}

inline Standardizer read_standardizer(Reader& r)
{
  Standardizer s;
  s.mean = r.vector("transform_mean");
  s.scale = r.vector("transform_scale");
  if (s.mean.size() != s.scale.size())
    r.fail("transform mean and scale differ in length");
  return s;
}

inline void write_baseline(Writer& w, const BaselineEstimate& b)
{
  w.scalar("bandwidth", b.bandwidth);
  w.values("baseline_grid", b.grid);
  w.values("baseline_alpha", b.alpha_hat);
  w.values("baseline_cumulative", b.cumulative);
}

inline BaselineEstimate read_baseline(Reader& r)
{
  BaselineEstimate b;
  b.bandwidth = r.scalar("bandwidth");
  b.grid = r.values("baseline_grid");
  b.alpha_hat = r.values("baseline_alpha");
  b.cumulative = r.values("baseline_cumulative");
  if (b.grid.size() != b.alpha_hat.size() || b.grid.size() != b.cumulative.size() || b.grid.size() < 2)
    r.fail("baseline arrays differ in length");
  return b;
}

inline void write_mlp(Writer& w, const nnet::Mlp& net)
{
  w.integer("layers", static_cast<long long>(net.depth()));
  for (const auto& l : net.layers()) {
    std::ostringstream ss;
    ss << l.in << ' ' << l.out << ' ' << nnet::to_string(l.act);
    w.word("layer", ss.str());
  }
  w.values("params", net.params());
}

inline nnet::Mlp read_mlp(Reader& r)
{
  long long depth = r.integer("layers");
  if (depth < 1)
    r.fail("network needs at least one layer");
  std::vector<nnet::LayerShape> shapes;
  for (long long l = 0; l < depth; ++l) {
    auto tok = r.line("layer");
    if (tok.size() != 4)
      r.fail("layer lines hold: in out activation");
    try {
      shapes.push_back({static_cast<Index>(std::stoll(tok[1])), static_cast<Index>(std::stoll(tok[2])),
                        nnet::parse_activation(tok[3])});
    } catch (const std::exception& e) {
      r.fail(std::string("bad layer: ") + e.what());
    }
  }
  nnet::Mlp net(std::move(shapes));
  Vector theta = r.vector("params");
  if (theta.size() != net.num_params())
    r.fail("parameter count " + std::to_string(theta.size()) + " does not match the layers (" +
           std::to_string(net.num_params()) + ")");
  net.set_params(theta);
  return net;
}

} // namespace io

inline void save_model(const FittedModel& model, std::ostream& os)
{
  io::Writer w(os);
  w.integer("survnet-model", kModelFormatVersion);
  w.word("kind", model.name());
  if (auto* m = std::get_if<CoxLassoModel>(&model.state())) {
    w.scalar("lambda", m->fit.lambda);
    write_standardizer(w, m->fit.transform);
    w.values("beta", m->fit.beta_hat);
    write_baseline(w, m->baseline);
  } else if (auto* m = std::get_if<CoxNnetModel>(&model.state())) {
    w.scalar("ridge", m->fit.ridge);
    w.scalar("shift", m->fit.shift);
    write_standardizer(w, m->fit.transform);
    write_mlp(w, m->fit.net);
    write_baseline(w, m->baseline);
  } else {
    const auto& f = std::get<NnsurvModel>(model.state()).fit;
    w.scalar("ridge", f.ridge);
    w.integer("depth", f.depth);
    w.values("cuts", f.grid.cuts);
    write_standardizer(w, f.transform);
    write_mlp(w, f.net);
  }
  os << "end\n";
  if (!os)
    throw std::runtime_error("save_model: write failed");
}

inline FittedModel load_model(std::istream& is)
{
  io::Reader r(is);
  long long version = r.integer("survnet-model");
  if (version != kModelFormatVersion)
    r.fail("unsupported model format version " + std::to_string(version));
  ModelKind kind;
  try {
    kind = parse_model(r.word("kind"));
  } catch (const std::invalid_argument& e) {
    r.fail(e.what());
  }
  auto finish = [&](FittedModel m) {
    r.line("end");
    return m;
  };
  switch (kind) {
    case ModelKind::cox_l1: {
      CoxLassoModel m;
      m.fit.lambda = r.scalar("lambda");
      m.fit.transform = io::read_standardizer(r);
      m.fit.beta_hat = r.vector("beta");
      if (m.fit.beta_hat.size() != m.fit.transform.dim())
        r.fail("beta length does not match the transform");
      m.fit.converged = true;
      m.baseline = io::read_baseline(r);
      return finish(FittedModel(kind, std::move(m)));
    }
    case ModelKind::cox_nnet: {
      CoxNnetModel m;
      m.fit.ridge = r.scalar("ridge");
      m.fit.shift = r.scalar("shift");
      m.fit.transform = io::read_standardizer(r);
      m.fit.net = io::read_mlp(r);
      if (m.fit.net.input_dim() != m.fit.transform.dim())
        r.fail("network input size does not match the transform");
      m.baseline = io::read_baseline(r);
      return finish(FittedModel(kind, std::move(m)));
    }
    case ModelKind::nnsurv:
    case ModelKind::nnsurv_deep: {
      NnsurvModel m;
      m.fit.ridge = r.scalar("ridge");
      m.fit.depth = static_cast<int>(r.integer("depth"));
      try {
        m.fit.grid = nnet::DiscreteTimeGrid::from_cuts(r.values("cuts"));
      } catch (const std::invalid_argument& e) {
        r.fail(e.what());
      }
      m.fit.transform = io::read_standardizer(r);
      m.fit.net = io::read_mlp(r);
      if (m.fit.net.input_dim() != m.fit.transform.dim())
        r.fail("network input size does not match the transform");
      return finish(FittedModel(kind, std::move(m)));
    }
  }
  r.fail("unreachable");
}

} // namespace survnet
