#pragma once

// Continuous per-node paths built from discrete, possibly irregular,
// observations: a natural cubic spline through the observed knots of every
// data channel plus an exact time channel rescaled to [0, 1].

#include <cstddef>
#include <cstdint>
#include <vector>

namespace stgnrde {

// values: nodes x timesteps x channels (row-major); mask: nodes x timesteps,
// non-zero means observed.
struct RawSeries {
  std::size_t nodes = 0;
  std::size_t timesteps = 0;
  std::size_t channels = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> mask;
  std::vector<double> times;

  double value(std::size_t node, std::size_t t, std::size_t ch) const {
    return values[(node * timesteps + t) * channels + ch];
  }
  bool observed(std::size_t node, std::size_t t) const { return mask[node * timesteps + t] != 0; }

  // Fully observed series on the integer grid 0..timesteps-1.
  static RawSeries dense(std::size_t nodes, std::size_t timesteps, std::size_t channels,
                         std::vector<double> values);
};

struct CubicPiece {
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0;  // a + b s + c s^2 + d s^3, s = t - knot
};

struct NodeSpline {
  std::vector<double> knots;
  // pieces[channel][interval]
  std::vector<std::vector<CubicPiece>> pieces;
};

class SplinePath {
 public:
  std::size_t nodes() const { return splines_.size(); }
  std::size_t data_channels() const { return data_channels_; }
  std::size_t path_channels() const { return data_channels_ + 1; }
  // Full observation grid (observed or not); windows are defined on it.
  const std::vector<double>& grid() const { return grid_; }
  const NodeSpline& spline(std::size_t node) const { return splines_.at(node); }

  double domain_begin() const { return grid_.front(); }
  double domain_end() const { return grid_.back(); }

  // Value of every path channel at t; the time channel is last.
  std::vector<double> eval(std::size_t node, double t) const;
  // `order`-th derivative (0..3) of the data channels at t.
  std::vector<double> eval_derivative(std::size_t node, double t, int order) const;

 private:
  friend SplinePath fit_spline(const RawSeries& series);

  std::size_t data_channels_ = 0;
  std::vector<double> grid_;
  std::vector<NodeSpline> splines_;
};

SplinePath fit_spline(const RawSeries& series);

// substeps + 1 evenly spaced samples of the path over [begin, end], endpoints
// included.
std::vector<std::vector<double>> sample_chords(const SplinePath& path, std::size_t node,
                                               double begin, double end, std::size_t substeps);

}  // namespace stgnrde
