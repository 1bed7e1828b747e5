#include "stgnrde/path.hpp"

#include <algorithm>
#include <string>

#include "stgnrde/error.hpp"

namespace stgnrde {

namespace {

// Natural cubic spline through (x[i], y[i]).  Second derivatives m[i] solve
// the tridiagonal system with m[0] = m[n] = 0 (Thomas algorithm).
std::vector<CubicPiece> natural_spline(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size() - 1;
  std::vector<double> h(n);
  for (std::size_t i = 0; i < n; ++i) h[i] = x[i + 1] - x[i];

  std::vector<double> m(n + 1, 0.0);
  if (n >= 2) {
    const std::size_t inner = n - 1;
    std::vector<double> diag(inner), upper(inner), rhs(inner);
    for (std::size_t k = 0; k < inner; ++k) {
      std::size_t i = k + 1;
      diag[k] = 2.0 * (h[i - 1] + h[i]);
      upper[k] = h[i];
      rhs[k] = 6.0 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]);
    }
    for (std::size_t k = 1; k < inner; ++k) {
      double w = h[k] / diag[k - 1];  // sub-diagonal entry of row k is h[k]
      diag[k] -= w * upper[k - 1];
      rhs[k] -= w * rhs[k - 1];
    }
    m[inner] = rhs[inner - 1] / diag[inner - 1];
    for (std::size_t k = inner - 1; k-- > 0;) {
      m[k + 1] = (rhs[k] - upper[k] * m[k + 2]) / diag[k];
    }
  }

  std::vector<CubicPiece> pieces(n);
  for (std::size_t i = 0; i < n; ++i) {
    CubicPiece& p = pieces[i];
    p.a = y[i];
    p.b = (y[i + 1] - y[i]) / h[i] - h[i] * (2.0 * m[i] + m[i + 1]) / 6.0;
    p.c = m[i] / 2.0;
    p.d = (m[i + 1] - m[i]) / (6.0 * h[i]);
  }
  return pieces;
}

std::size_t locate(const std::vector<double>& knots, double t) {
  auto it = std::upper_bound(knots.begin(), knots.end(), t);
  std::size_t idx = static_cast<std::size_t>(it - knots.begin());
  if (idx == 0) return 0;
  return std::min(idx - 1, knots.size() - 2);
}

}  // namespace

RawSeries RawSeries::dense(std::size_t nodes, std::size_t timesteps, std::size_t channels,
                           std::vector<double> values) {
  if (values.size() != nodes * timesteps * channels) {
    throw DimensionError("RawSeries::dense: value count does not match extents");
  }
  RawSeries s;
  s.nodes = nodes;
  s.timesteps = timesteps;
  s.channels = channels;
  s.values = std::move(values);
  s.mask.assign(nodes * timesteps, 1);
  s.times.resize(timesteps);
  for (std::size_t t = 0; t < timesteps; ++t) s.times[t] = static_cast<double>(t);
  return s;
}

SplinePath fit_spline(const RawSeries& series) {
  if (series.times.size() != series.timesteps || series.timesteps < 2) {
    throw DataError("series needs at least two timesteps with matching time stamps");
  }
  for (std::size_t t = 1; t < series.timesteps; ++t) {
    if (!(series.times[t] > series.times[t - 1])) {
      throw DataError("series times must be strictly increasing");
    }
  }
  SplinePath path;
  path.data_channels_ = series.channels;
  path.grid_ = series.times;
  path.splines_.resize(series.nodes);

  for (std::size_t v = 0; v < series.nodes; ++v) {
    std::vector<std::size_t> seen;
    for (std::size_t t = 0; t < series.timesteps; ++t)
      if (series.observed(v, t)) seen.push_back(t);
    if (seen.size() < 2) {
      throw DataError("node " + std::to_string(v) + " has fewer than 2 observed points");
    }
    if (seen.front() != 0 || seen.back() != series.timesteps - 1) {
      throw DataError("node " + std::to_string(v) +
                      " must be observed at the first and last timestep");
    }
    NodeSpline& ns = path.splines_[v];
    for (std::size_t t : seen) ns.knots.push_back(series.times[t]);
    ns.pieces.resize(series.channels);
    std::vector<double> y(seen.size());
    for (std::size_t ch = 0; ch < series.channels; ++ch) {
      for (std::size_t i = 0; i < seen.size(); ++i) y[i] = series.value(v, seen[i], ch);
      ns.pieces[ch] = natural_spline(ns.knots, y);
    }
  }
  return path;
}

std::vector<double> SplinePath::eval(std::size_t node, double t) const {
  std::vector<double> out = eval_derivative(node, t, 0);
  out.push_back((t - grid_.front()) / (grid_.back() - grid_.front()));
  return out;
}

std::vector<double> SplinePath::eval_derivative(std::size_t node, double t, int order) const {
  const NodeSpline& ns = spline(node);
  if (t < ns.knots.front() || t > ns.knots.back()) {
    throw DomainError("t = " + std::to_string(t) + " outside spline domain [" +
                      std::to_string(ns.knots.front()) + ", " + std::to_string(ns.knots.back()) + "]");
  }
  std::size_t i = locate(ns.knots, t);
  double s = t - ns.knots[i];
  std::vector<double> out(data_channels_);
  for (std::size_t ch = 0; ch < data_channels_; ++ch) {
    const CubicPiece& p = ns.pieces[ch][i];
    switch (order) {
      case 0: out[ch] = p.a + s * (p.b + s * (p.c + s * p.d)); break;
      case 1: out[ch] = p.b + s * (2.0 * p.c + 3.0 * s * p.d); break;
      case 2: out[ch] = 2.0 * p.c + 6.0 * s * p.d; break;
      case 3: out[ch] = 6.0 * p.d; break;
      default: throw ContractError("derivative order must be in 0..3");
    }
  }
  return out;
}

std::vector<std::vector<double>> sample_chords(const SplinePath& path, std::size_t node,
                                               double begin, double end, std::size_t substeps) {
  if (substeps < 1) throw ContractError("substeps must be at least 1");
  if (begin < path.domain_begin() || end > path.domain_end() || !(begin < end)) {
    throw DomainError("window [" + std::to_string(begin) + ", " + std::to_string(end) +
                      "] outside spline domain");
  }
  std::vector<std::vector<double>> samples;
  samples.reserve(substeps + 1);
  for (std::size_t j = 0; j <= substeps; ++j) {
    double t = j == substeps ? end
                             : begin + (end - begin) * static_cast<double>(j) /
                                           static_cast<double>(substeps);
    samples.push_back(path.eval(node, t));
  }
  return samples;
}

}  // namespace stgnrde
