#pragma once

// Truncated signatures and log-signatures of piecewise-linear paths.
//
// Tensor words of length k over an alphabet of size d are indexed in base d,
// most significant letter first, so the word (i1, ..., ik) lives at
// i1*d^(k-1) + ... + ik of level k.  Log-signatures are reported in the
// Lyndon bracket basis: Lyndon words ordered by length, then
// lexicographically.

#include <cstddef>
#include <span>
#include <vector>

#include "stgnrde/path.hpp"

namespace stgnrde {

class TruncatedTensor {
 public:
  TruncatedTensor(std::size_t alphabet, std::size_t depth, double level0 = 0.0);

  // Unit of the truncated tensor algebra (level 0 = 1, all else 0).
  static TruncatedTensor identity(std::size_t alphabet, std::size_t depth);

  std::size_t alphabet() const { return alphabet_; }
  std::size_t depth() const { return depth_; }

  double level0() const { return level0_; }
  double& level0() { return level0_; }
  // Levels are 1-based: level(1) has d entries, level(k) has d^k.
  std::span<const double> level(std::size_t k) const { return levels_.at(k - 1); }
  std::span<double> level(std::size_t k) { return levels_.at(k - 1); }

  double max_abs_diff(const TruncatedTensor& other) const;

 private:
  std::size_t alphabet_;
  std::size_t depth_;
  double level0_;
  std::vector<std::vector<double>> levels_;
};

// Signature of a straight segment: level k = v^{(x)k} / k!.
TruncatedTensor sig_linear(std::span<const double> increment, std::size_t depth);

// Truncated tensor-algebra product (Chen concatenation).
TruncatedTensor chen_mul(const TruncatedTensor& a, const TruncatedTensor& b);

// Signature of the polyline through `points` (each of the same dimension).
TruncatedTensor polyline_signature(const std::vector<std::vector<double>>& points,
                                   std::size_t depth);

TruncatedTensor tensor_log(const TruncatedTensor& s);
TruncatedTensor tensor_exp(const TruncatedTensor& x);

struct LyndonWord {
  std::vector<std::size_t> letters;
  std::size_t index = 0;          // tensor-word index within its level
  std::vector<double> expansion;  // bracket polynomial, dense over level |w|
};

class LyndonBasis {
 public:
  LyndonBasis(std::size_t alphabet, std::size_t depth);

  std::size_t alphabet() const { return alphabet_; }
  std::size_t depth() const { return depth_; }
  std::size_t size() const { return words_.size(); }
  const std::vector<LyndonWord>& words() const { return words_; }

  // Lie element reconstructed from Lyndon coordinates.
  TruncatedTensor expand(std::span<const double> coords) const;

 private:
  std::size_t alphabet_;
  std::size_t depth_;
  std::vector<LyndonWord> words_;
};

// Dimension of the truncated free Lie algebra (Witt's formula).
std::size_t witt_dimension(std::size_t alphabet, std::size_t depth);

// Lyndon words of length <= depth by direct enumeration (Duval), sorted by
// length then lexicographically.
std::vector<std::vector<std::size_t>> lyndon_words(std::size_t alphabet, std::size_t depth);

// Coordinates of a Lie element in the Lyndon bracket basis.  Throws
// ContractError if the element is not in the span of the basis.
std::vector<double> lyndon_project(const TruncatedTensor& lie, const LyndonBasis& basis);

// Log-signature coordinates of the polyline through `points`.
std::vector<double> polyline_logsig(const std::vector<std::vector<double>>& points,
                                    const LyndonBasis& basis);

// Window grid over a series of `intervals` knot intervals: window i covers
// knot indices [i*P, min((i+1)*P, intervals)], the last window may be short.
std::vector<std::size_t> window_knots(std::size_t intervals, std::size_t subpath);

struct LogSigSequence {
  std::size_t windows = 0;
  std::size_t nodes = 0;
  std::size_t coords = 0;
  std::vector<double> data;        // windows x nodes x coords
  std::vector<double> boundaries;  // r_0 .. r_W in path time
  std::vector<double> divisors;    // r_{i+1} - r_i

  std::span<const double> at(std::size_t window, std::size_t node) const {
    return {data.data() + (window * nodes + node) * coords, coords};
  }
};

// Per node and window: chord samples (substeps per knot interval) ->
// signature -> log -> Lyndon coordinates.
LogSigSequence window_logsig(const SplinePath& path, std::size_t subpath, const LyndonBasis& basis,
                             std::size_t substeps = 1);

}  // namespace stgnrde
